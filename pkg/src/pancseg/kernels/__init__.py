"""Hot-kernel dispatch: compiled Cython core when available, numpy fallback
otherwise.  Set PANCSEG_PURE_PYTHON=1 to force the fallback."""

import os

if os.environ.get("PANCSEG_PURE_PYTHON") == "1":
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

IMPLEMENTATION = _impl.IMPLEMENTATION
best_split = _impl.best_split
maxflow = _impl.maxflow

__all__ = ["IMPLEMENTATION", "best_split", "maxflow"]
