"""Numba switch.

Set ``GFM_STAB_DISABLE_JIT=1`` to run every kernel as plain Python and send
basin sweeps through the vectorized numpy path instead.
"""
import functools
import os

JIT_ENABLED = os.environ.get("GFM_STAB_DISABLE_JIT", "").strip().lower() not in ("1", "true", "yes")

if JIT_ENABLED:
    try:
        import numba as nb
    except ImportError:  # pragma: no cover
        JIT_ENABLED = False

if JIT_ENABLED:
    njit = functools.partial(nb.njit, cache=True, nogil=True)
else:
    def njit(fn=None, **_kw):
        if fn is None:
            return lambda f: f
        return fn
