"""Numpy fallback for the sampling kernels.

np.cumsum accumulates sequentially, matching the compiled backend's
left-to-right summation, so both backends return the same index for the
same (weights, u) input.
"""
import numpy as np


def weighted_pick(weights, u):
    """Sample an index proportionally to `weights` using uniform draw `u`.

    Returns -1 when the total weight is not positive. A zero-weight entry
    is never selected.
    """
    cs = np.cumsum(weights)
    total = cs[-1] if cs.size else 0.0
    if not total > 0.0:
        return -1
    idx = int(np.searchsorted(cs, u * total, side="right"))
    return min(idx, cs.size - 1)


def masked_weighted_pick(row, excluded, u):
    """weighted_pick over a copy of `row` with `excluded` indices zeroed."""
    w = np.array(row, dtype=np.float64, copy=True)
    if len(excluded):
        w[np.asarray(excluded, dtype=np.int64)] = 0.0
    return weighted_pick(w, u)
