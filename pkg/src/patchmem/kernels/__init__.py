"""Kernel backend dispatch.

The hot numeric loops (exhaustive NN search, greedy selection, pooling,
blur, resize) exist twice: a numba-compiled path and a pure-numpy path.
Selection happens once at import via the PATCHMEM_BACKEND environment
variable:

  PATCHMEM_BACKEND=auto   (default) numba if importable, else numpy
  PATCHMEM_BACKEND=numba  require numba, fail if missing
  PATCHMEM_BACKEND=numpy  force the pure-numpy fallback

``benchmarks/bench_kernels.py`` compares both paths head to head.
"""

from __future__ import annotations

import os

_requested = os.environ.get("PATCHMEM_BACKEND", "auto").lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"PATCHMEM_BACKEND must be auto, numba, or numpy; got {_requested!r}"
    )

if _requested == "numpy":
    from . import numpy_impl as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl  # type: ignore[no-redef]

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import numpy_impl as _impl  # type: ignore[no-redef]

        BACKEND = "numpy"

greedy_select = _impl.greedy_select
assign_nearest = _impl.assign_nearest
nn_search = _impl.nn_search
avg_pool3x3 = _impl.avg_pool3x3
gaussian_blur = _impl.gaussian_blur
bilinear_resize = _impl.bilinear_resize


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return BACKEND


__all__ = [
    "BACKEND",
    "active_backend",
    "greedy_select",
    "assign_nearest",
    "nn_search",
    "avg_pool3x3",
    "gaussian_blur",
    "bilinear_resize",
]
