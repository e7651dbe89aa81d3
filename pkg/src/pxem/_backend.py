"""Pick the numerical kernel implementation at import time."""
from pxem import _pykernels

try:
    from pxem import _ckernels as kernels
except ImportError:  # extension not built
    kernels = _pykernels
    BACKEND = "python"
else:
    BACKEND = "cython"

__all__ = ["BACKEND", "kernels"]
