"""Independent oracles used by the test suite.

These deliberately avoid the package's own gradient and search code:
gradients come from central finite differences, discrete optima from
exhaustive enumeration.
"""
from __future__ import annotations

import itertools

import numpy as np

FD_STEP = 1e-5


def finite_difference_gradient(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function at x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xf = x.ravel()
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + h
        hi = f(x)
        xf[i] = orig - h
        lo = f(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Scale-free gradient disagreement: max |a-n| over max magnitude."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = max(np.max(np.abs(a)), np.max(np.abs(n)), 1e-12)
    return float(np.max(np.abs(a - n)) / denom)


def best_single_flip(score_fn, x: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    """Exhaustive search for the single in-bounds bit flip maximizing score_fn.

    Returns (index, flipped_vector) or (None, x) when no flip improves on
    doing nothing. Ties break toward the lowest index.
    """
    x = np.asarray(x, dtype=np.float64)
    base = score_fn(x)
    best_idx, best_val = None, base
    for j in range(x.size):
        cand = x.copy()
        cand[j] = 1.0 - cand[j]
        if cand[j] < lower[j] or cand[j] > upper[j]:
            continue
        val = score_fn(cand)
        if val > best_val + 1e-15:
            best_idx, best_val = j, val
    if best_idx is None:
        return None, x
    out = x.copy()
    out[best_idx] = 1.0 - out[best_idx]
    return best_idx, out


def minimal_evading_subset(evades_fn, x: np.ndarray, seed: np.ndarray) -> int | None:
    """Smallest number of seed flips that still evades, by brute force.

    evades_fn takes a full vector and returns True when the pipeline calls
    it benign. Returns the minimum flip count, or None when even the full
    seed fails. Only subsets of the seed's flipped coordinates are searched.
    """
    x = np.asarray(x, dtype=np.float64)
    seed = np.asarray(seed, dtype=np.float64)
    flipped = np.flatnonzero(seed != x)
    if not evades_fn(seed):
        return None
    for size in range(0, flipped.size + 1):
        for combo in itertools.combinations(flipped, size):
            cand = x.copy()
            for j in combo:
                cand[j] = 1.0 - cand[j]
            if evades_fn(cand):
                return size
    return flipped.size
