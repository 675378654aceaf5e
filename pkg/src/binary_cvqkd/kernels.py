"""Backend selection for the hot numerical kernels.

The compiled Jacobi extension is preferred. Setting the environment
variable ``BINARY_CVQKD_PURE=1`` before import forces the numpy fallback.
``BACKEND`` names whichever implementation was loaded.
"""
import os

from . import _pykernels

if os.environ.get("BINARY_CVQKD_PURE") == "1":
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

symmetric_eigenvalues = _impl.symmetric_eigenvalues
max_eigenvalue = _impl.max_eigenvalue
bound_pairs = _impl.bound_pairs

__all__ = ["BACKEND", "symmetric_eigenvalues", "max_eigenvalue", "bound_pairs"]
