"""Hot sampling kernels with a compiled core and a pure-numpy fallback.

The simulation spends most of its time drawing weighted categorical
samples over the city's cell vector (mobility exploration, preferential
return, patrol targeting). Both backends implement the same contract:

  weighted_pick(weights, u)        -> index of the sampled entry, -1 if
                                      the total weight is not positive
  masked_weighted_pick(row, excluded, u)
                                   -> as weighted_pick on a copy of `row`
                                      with `excluded` indices zeroed

`u` is a uniform draw in [0, 1) supplied by the caller; the kernels own
no randomness, so simulations are reproducible regardless of backend.
Both backends accumulate weights sequentially in index order, so the
chosen index is bit-identical between them.
"""
from . import _python

try:
    from . import _native as _impl

    BACKEND = "native"
except ImportError:
    _impl = _python
    BACKEND = "python"

weighted_pick = _impl.weighted_pick
masked_weighted_pick = _impl.masked_weighted_pick


def backend_name() -> str:
    """Name of the active kernel backend: 'native' or 'python'."""
    return BACKEND
