"""Hot-loop kernels: compiled Cython core when built, numpy fallback otherwise.

Set ``DSENLG_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("DSENLG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

fcm_iterate = _impl.fcm_iterate
best_split = _impl.best_split
sq_dists = _fallback.sq_dists
fcm_memberships = _fallback.fcm_memberships
fcm_prototypes = _fallback.fcm_prototypes
fcm_objective = _fallback.fcm_objective

__all__ = ["BACKEND", "fcm_iterate", "best_split", "sq_dists", "fcm_memberships",
           "fcm_prototypes", "fcm_objective"]
