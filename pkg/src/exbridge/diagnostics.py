"""Chain convergence and precision diagnostics.

split_rhat implements the rank-normalized split R-hat: chains are split in
half, the pooled draws are replaced by normal scores Phi^-1((rank - 0.5)/S)
with ties averaged, and the classic between/within variance ratio
sqrt(((n-1)/n * W + var(chain means)) / W) is evaluated on the scores.

mc_ess estimates the Monte-Carlo effective sample size of the posterior
mean from split chains via FFT autocovariances combined with Geyer's
initial positive and monotone sequence truncation.

Constant output is reported as degenerate rather than as R-hat 1 or a NaN:
a flat chain carries no evidence of convergence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.fft import next_fast_len
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import DataError


@dataclass(frozen=True)
class ChainDiagnostic:
    split_rhat: float | None
    ess: float | None
    degenerate: bool


def _as_chain_matrix(chains: np.ndarray) -> np.ndarray:
    x = np.asarray(chains, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DataError(f"chains must be (n_chains, n_draws), got shape {x.shape}")
    if x.shape[1] < 4:
        raise DataError("need at least 4 draws per chain")
    if not np.all(np.isfinite(x)):
        raise DataError("chains contain non-finite draws")
    return x


def _split(x: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, half : 2 * half]], axis=0)


def _z_scale(x: np.ndarray) -> np.ndarray:
    ranks = rankdata(x, method="average").reshape(x.shape)
    return ndtri((ranks - 0.5) / x.size)


def _rhat_of(x: np.ndarray) -> float:
    n = x.shape[1]
    within = float(np.mean(np.var(x, axis=1, ddof=1)))
    var_means = float(np.var(np.mean(x, axis=1), ddof=1))
    if within == 0.0:
        return float("inf")  # chains are flat but not identical
    return float(np.sqrt((n - 1) / n + var_means / within))


def split_rhat(chains: np.ndarray) -> float | None:
    """Rank-normalized split R-hat; None for a single chain or flat input."""
    x = _as_chain_matrix(chains)
    if x.shape[0] < 2:
        return None
    if np.all(x == x.flat[0]):
        return None
    return _rhat_of(_z_scale(_split(x)))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row via FFT."""
    n = x.shape[1]
    m = next_fast_len(2 * n)
    centered = x - x.mean(axis=1, keepdims=True)
    freq = np.fft.rfft(centered, n=m, axis=1)
    cov = np.fft.irfft(freq * np.conj(freq), n=m, axis=1)[:, :n].real
    return cov / n


def mc_ess(chains: np.ndarray) -> float | None:
    """Effective sample size of the mean from split chains; None if flat."""
    x = _split(_as_chain_matrix(chains))
    if np.all(x == x.flat[0]):
        return None
    m, n = x.shape
    acov = _autocov(x)
    chain_means = x.mean(axis=1)
    mean_var = float(np.mean(acov[:, 0])) * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += float(np.var(chain_means, ddof=1))
    if var_plus == 0.0:
        return None

    rho_hat = np.zeros(n)
    rho_hat[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - float(np.mean(acov[:, 1]))) / var_plus
    rho_hat[1] = rho_odd
    # Geyer initial positive sequence: keep lag pairs while their sum is positive
    t = 1
    while t < n - 3 and (rho_even + rho_odd) > 0.0:
        rho_even = 1.0 - (mean_var - float(np.mean(acov[:, t + 1]))) / var_plus
        rho_odd = 1.0 - (mean_var - float(np.mean(acov[:, t + 2]))) / var_plus
        if (rho_even + rho_odd) >= 0:
            rho_hat[t + 1] = rho_even
            rho_hat[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0.0:
        rho_hat[max_t + 1] = rho_even
    # Geyer initial monotone sequence: enforce non-increasing pair sums
    t = 1
    while t <= max_t - 2:
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t]:
            rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2.0
            rho_hat[t + 2] = rho_hat[t + 1]
        t += 2

    total = m * n
    tau_hat = -1.0 + 2.0 * float(np.sum(rho_hat[: max_t + 1])) + float(rho_hat[max_t + 1])
    tau_hat = max(tau_hat, 1.0 / np.log10(total))
    return float(total / tau_hat)


def diagnostics(chains: Mapping[str, np.ndarray]) -> dict[str, ChainDiagnostic]:
    """split R-hat and MC-ESS for every named parameter.

    Single-chain inputs get R-hat None with ESS still computed; parameters
    with zero total variance are flagged degenerate with both set to None.
    """
    out: dict[str, ChainDiagnostic] = {}
    for name, arr in chains.items():
        x = _as_chain_matrix(arr)
        if np.all(x == x.flat[0]):
            out[name] = ChainDiagnostic(split_rhat=None, ess=None, degenerate=True)
            continue
        out[name] = ChainDiagnostic(split_rhat=split_rhat(x), ess=mc_ess(x), degenerate=False)
    return out
