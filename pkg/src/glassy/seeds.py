"""Deterministic 64-bit seed derivation for nested Monte Carlo streams.

Cell seeds mix the master seed with grid indices; trial streams mix the cell
seed with the trial index.  Results are therefore bit-identical under any
parallel schedule, as long as aggregation happens in index order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["mix64", "trial_rng"]

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix64(*parts: int) -> int:
    """Absorb integers into one well-mixed 64-bit value."""
    acc = 0x8E4CD8177A8E9E25
    for p in parts:
        acc = _splitmix64(acc ^ (int(p) & _MASK))
    return acc


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream for one trial, derived from (master_seed, trial_index)."""
    return np.random.default_rng(mix64(master_seed, trial_index))
