"""Deterministic random streams.

Everything stochastic in the package draws from a counter-based Philox
generator keyed by (seed, stream word).  Streams never depend on execution
order: a chain, a simulated trial outcome or an initial state always sees
the same draws for the same seed, no matter what ran before it.

The 64-bit stream word packs a purpose tag with up to two indices, so
distinct purposes and indices can never collide.  Nested scopes (one seed
per simulation replicate, say) derive a fresh 64-bit seed with mix64.
"""

from __future__ import annotations

import numpy as np

# purpose tags, bits 56..63 of the stream word
CHAIN = 0x01  # one MCMC chain
INIT = 0x02  # chain starting point
OUTCOME = 0x03  # simulated patient outcomes
REPLICATE = 0x04  # per-replicate seed derivation
SESSION = 0x05  # conduct-service sessions

_MASK = (1 << 64) - 1


def stream_word(purpose: int, index: int = 0, subindex: int = 0) -> int:
    """Pack (purpose, index, subindex) into one 64-bit word."""
    if not 0 <= purpose < 256:
        raise ValueError("purpose tag must fit in 8 bits")
    if not 0 <= index < (1 << 32):
        raise ValueError("index must fit in 32 bits")
    if not 0 <= subindex < (1 << 24):
        raise ValueError("subindex must fit in 24 bits")
    return (purpose << 56) | (index << 24) | subindex


def generator(seed: int, word: int) -> np.random.Generator:
    """Philox generator for the (seed, word) stream."""
    key = np.array([seed & _MASK, word & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def mix64(*values: int) -> int:
    """Collapse integers into one well-mixed 64-bit seed (splitmix64 chain)."""
    acc = 0x9E3779B97F4A7C15
    for v in values:
        acc = (acc + (v & _MASK)) & _MASK
        z = acc
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        acc = z ^ (z >> 31)
    return acc


def replicate_seed(master_seed: int, replicate: int) -> int:
    """Independent seed for one simulation replicate."""
    return mix64(master_seed, stream_word(REPLICATE, replicate))
