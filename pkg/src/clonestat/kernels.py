"""Backend selection for the hot likelihood kernels.

The compiled extension is preferred when importable; the pure-Python twin
is the fallback.  ``CLONESTAT_BACKEND=python`` (or ``cython``) forces a
choice, which the benchmark and the backend-equivalence tests use.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels_cy
except ImportError:  # extension not built; pure Python still works
    _kernels_cy = None

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "sir_log_likelihood",
    "sir_trajectory",
]


def available_backends() -> tuple:
    names = ["python"]
    if _kernels_cy is not None:
        names.insert(0, "cython")
    return tuple(names)


def get_backend(name: str):
    """Return the kernel module for an explicit backend name."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _kernels_cy is None:
            raise RuntimeError("compiled kernel backend is not available")
        return _kernels_cy
    raise ValueError(f"unknown backend {name!r}")


_forced = os.environ.get("CLONESTAT_BACKEND")
if _forced:
    _impl = get_backend(_forced)
elif _kernels_cy is not None:
    _impl = _kernels_cy
else:
    _impl = _kernels_py

BACKEND = _impl.backend_name()
sir_log_likelihood = _impl.sir_log_likelihood
sir_trajectory = _impl.sir_trajectory
