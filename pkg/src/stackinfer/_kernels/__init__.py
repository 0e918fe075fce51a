"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when the
extension is missing or when STACKINFER_BACKEND=python is set.  Both expose
the same functions and are covered by the same tests.
"""
import os

_forced = os.environ.get("STACKINFER_BACKEND", "").strip().lower()

if _forced in ("python", "py"):
    from . import _py as _impl
elif _forced in ("cython", "c", "fast"):
    from . import _fast as _impl  # raises if the extension was not built
else:
    try:
        from . import _fast as _impl
    except ImportError:
        from . import _py as _impl

BACKEND = _impl.BACKEND
crit_map = _impl.crit_map
design_map = _impl.design_map
cost_map = _impl.cost_map
mle_vgh = _impl.mle_vgh

KIND_A, KIND_D, KIND_E = 0, 1, 2
CRITERION_CODES = {"A": KIND_A, "D": KIND_D, "E": KIND_E}

__all__ = [
    "BACKEND",
    "CRITERION_CODES",
    "KIND_A",
    "KIND_D",
    "KIND_E",
    "cost_map",
    "crit_map",
    "design_map",
    "mle_vgh",
]
