"""Hot numeric kernels with two interchangeable backends.

The numba backend compiles the inner loops with ``@njit``; the numpy backend
is pure vectorized numpy. Selection happens once at import time from the
``SPTSEG_BACKEND`` environment variable:

    SPTSEG_BACKEND=numba   force numba (ImportError if unavailable)
    SPTSEG_BACKEND=numpy   force pure numpy
    unset / auto           numba if importable, else numpy

Both backends implement the same math; `benchmarks/bench_kernels.py`
compares them.
"""

import os

from . import numpy_impl

_choice = os.environ.get("SPTSEG_BACKEND", "auto").lower()

if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"SPTSEG_BACKEND must be auto|numba|numpy, got {_choice!r}")

_impl = numpy_impl
if _choice in ("auto", "numba"):
    try:
        from . import numba_impl as _impl
    except ImportError:
        if _choice == "numba":
            raise

BACKEND = "numba" if _impl is not numpy_impl else "numpy"

dft2_matrix = _impl.dft2_matrix
fft2_radix2 = _impl.fft2_radix2
box_filter = _impl.box_filter
confusion_matrix = _impl.confusion_matrix
