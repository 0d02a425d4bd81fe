"""Kernel backend selection.

The compiled extension is preferred; the pure-Python module is used when the
extension is not built or when ``RELEST_PURE_PYTHON=1`` is set in the
environment before import.
"""

import os

from . import _pykernels

python_kernels = _pykernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("RELEST_PURE_PYTHON") != "1":
    kernels = compiled_kernels
else:
    kernels = python_kernels

BACKEND = kernels.BACKEND


def available_backends():
    """Names of the kernel modules importable in this environment."""
    names = ["python"]
    if compiled_kernels is not None:
        names.append("cython")
    return names


def get_kernels(name=None):
    """Kernel module by backend name; ``None`` returns the active one."""
    if name is None:
        return kernels
    if name == "python":
        return python_kernels
    if name == "cython":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not built")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")
