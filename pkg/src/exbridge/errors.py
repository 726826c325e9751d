"""Exception hierarchy.

Every error raised on purpose by this package derives from ExbridgeError so
callers can catch one type at the boundary.  The CLI maps subclasses to exit
codes; the service maps them to HTTP statuses.
"""


class ExbridgeError(Exception):
    """Base class for all package errors."""


class ConfigError(ExbridgeError):
    """Invalid configuration: bad prior settings, malformed config file,
    unknown schema version, inconsistent weights."""


class DataError(ExbridgeError):
    """Invalid input data: negative counts, responders exceeding group size,
    unknown dose indices, malformed data files."""


class EngineError(ExbridgeError):
    """Numerical or sampling failure inside the inference engine."""


class InfeasibleBetaError(ExbridgeError):
    """A (mean, sd) pair admits no Beta distribution.

    Raised when sd**2 >= mean * (1 - mean); the message carries both the
    offending values and the bound so reports can surface it verbatim.
    """

    def __init__(self, mean: float, sd: float):
        bound = mean * (1.0 - mean)
        super().__init__(
            f"no Beta distribution has mean={mean:.6g} and sd={sd:.6g}: "
            f"requires sd^2 < mean*(1-mean) = {bound:.6g}, got sd^2 = {sd * sd:.6g}"
        )
        self.mean = mean
        self.sd = sd
        self.bound = bound


class StateError(ExbridgeError):
    """Operation not valid for the current trial/session state."""
