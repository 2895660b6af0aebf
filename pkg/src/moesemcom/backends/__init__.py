"""Kernel backend selection.

Two interchangeable kernel modules exist: a compiled Cython one and a plain
numpy one. The active module is chosen once at import time:

    MOESEMCOM_BACKEND=auto     compiled if importable, else numpy (default)
    MOESEMCOM_BACKEND=cython   compiled, ImportError if unavailable
    MOESEMCOM_BACKEND=python   numpy

Results are bitwise reproducible within a backend. Across backends the
kernels agree to float64 rounding (loss reductions differ in summation
order), which tests/test_backends.py pins down.
"""

import os

from . import _ops_py

_choice = os.environ.get("MOESEMCOM_BACKEND", "auto").lower()

if _choice not in ("auto", "cython", "python"):
    raise ValueError(
        f"MOESEMCOM_BACKEND must be auto, cython or python, got {_choice!r}"
    )

if _choice == "python":
    ops = _ops_py
else:
    try:
        from . import _ops_cy as ops  # type: ignore[no-redef]
    except ImportError:
        if _choice == "cython":
            raise
        ops = _ops_py

BACKEND_NAME: str = ops.NAME


def available_backends():
    """Names of the kernel modules importable right now."""
    names = ["python"]
    try:
        from . import _ops_cy  # noqa: F401
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names
