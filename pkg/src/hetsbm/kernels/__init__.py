"""Hot kernels with a numba backend and a pure-numpy fallback.

Set ``HETSBM_DISABLE_NUMBA=1`` before import to force the numpy path. The
numba path is also skipped automatically when numba is not importable.
"""

import os

from . import _numpy

_disabled = os.environ.get("HETSBM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

if _disabled:
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = _numpy
        BACKEND = "numpy"

row_mean = _impl.row_mean
dd_row_mean = _impl.dd_row_mean
floyd_positions = _impl.floyd_positions

__all__ = ["BACKEND", "row_mean", "dd_row_mean", "floyd_positions"]
