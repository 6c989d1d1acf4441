"""Kernel backend selection.

The compiled core is used when importable; ``MFNC_BACKEND=python`` forces the
pure-Python fallback.  ``kernels`` is the module the rest of the package calls.
"""

import os

from . import _pure

kernels = _pure
name = "python"

if os.environ.get("MFNC_BACKEND", "").lower() != "python":
    try:
        from . import _core
    except ImportError:  # extension not built
        pass
    else:
        kernels = _core
        name = "compiled"


def get(backend=None):
    """Return the kernel module for ``backend`` ('python', 'compiled' or None for the active one)."""
    if backend is None:
        return kernels
    if backend == "python":
        return _pure
    if backend == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {backend!r}")
