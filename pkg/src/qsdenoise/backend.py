"""Selects the kernel backend for the hot inner loops.

Two interchangeable implementations of the pair-scoring and filtering
kernels exist: a numba @njit version (fast, default) and a pure-numpy
fallback. The environment variable QSDENOISE_BACKEND picks one:

    QSDENOISE_BACKEND=numba    require numba (ImportError if missing)
    QSDENOISE_BACKEND=numpy    force the pure-numpy fallback
    unset / auto               numba when importable, else numpy

Both backends are numerically self-consistent: the scalar similarity
functions and the dense score maps share the same per-pair arithmetic,
so search results never depend on which code path scored a candidate.
Run benchmarks/bench_backends.py to compare them.
"""

from __future__ import annotations

import os

ENV_VAR = "QSDENOISE_BACKEND"

_VALID = ("auto", "numba", "numpy")


def requested_backend() -> str:
    """The backend named by the environment (defaults to 'auto')."""
    value = os.environ.get(ENV_VAR, "auto").strip().lower()
    if value not in _VALID:
        raise ValueError(
            f"{ENV_VAR} must be one of {_VALID}, got {value!r}"
        )
    return value


def _resolve() -> str:
    choice = requested_backend()
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


ACTIVE_BACKEND = _resolve()

if ACTIVE_BACKEND == "numba":
    from qsdenoise import _kernels_numba as kernels
else:
    from qsdenoise import _kernels_numpy as kernels


def active_backend() -> str:
    """Name of the backend the package imported at startup."""
    return ACTIVE_BACKEND
