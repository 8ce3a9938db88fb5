"""Select the kernel backend at import time.

The compiled core is used when it was built; otherwise the numpy fallback.
Set ``HETDETECT_BACKEND=python`` to force the fallback.
"""

import os

if os.environ.get("HETDETECT_BACKEND", "").lower() == "python":
    from . import _kernels_py as kernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND


def load(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        from . import _kernels_py

        return _kernels_py
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
