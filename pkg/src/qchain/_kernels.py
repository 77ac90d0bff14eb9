"""Sequential stepping kernels, compiled with numba when available.

The two loops here (fixed-step RK4 and repeated application of a one-step
matrix) are the only hot non-vectorizable code paths in the package; all other
numerics are BLAS-backed.  Each kernel has a pure-numpy implementation that
numba compiles unchanged, so both backends run the same algorithm.

Backend selection happens at import time: numba is used when it imports
successfully unless the environment variable ``QCHAIN_NUMBA`` is set to one of
``0 / false / off / no`` (case-insensitive).  ``benchmarks/bench_kernels.py``
times the two backends against each other.
"""

from __future__ import annotations

import os

import numpy as np


def _rk4_loop(A, x0, dt, n_steps):
    n = x0.shape[0]
    out = np.empty((n_steps + 1, n))
    out[0, :] = x0
    x = x0.copy()
    for k in range(n_steps):
        k1 = A @ x
        k2 = A @ (x + 0.5 * dt * k1)
        k3 = A @ (x + 0.5 * dt * k2)
        k4 = A @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1, :] = x
    return out


def _stepmat_loop(M, x0, n_steps):
    n = x0.shape[0]
    out = np.empty((n_steps + 1, n))
    out[0, :] = x0
    x = x0.copy()
    for k in range(n_steps):
        x = M @ x
        out[k + 1, :] = x
    return out


rk4_steps_numpy = _rk4_loop
step_matrix_steps_numpy = _stepmat_loop

try:
    import numba

    rk4_steps_numba = numba.njit(cache=True)(_rk4_loop)
    step_matrix_steps_numba = numba.njit(cache=True)(_stepmat_loop)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    rk4_steps_numba = None
    step_matrix_steps_numba = None
    HAVE_NUMBA = False


def _numba_disabled_by_env() -> bool:
    return os.environ.get("QCHAIN_NUMBA", "").strip().lower() in (
        "0",
        "false",
        "off",
        "no",
    )


USE_NUMBA = HAVE_NUMBA and not _numba_disabled_by_env()
BACKEND = "numba" if USE_NUMBA else "numpy"

_rk4_impl = rk4_steps_numba if USE_NUMBA else rk4_steps_numpy
_stepmat_impl = step_matrix_steps_numba if USE_NUMBA else step_matrix_steps_numpy


def rk4_steps(A, x0, dt, n_steps: int) -> np.ndarray:
    """Fixed-step classical RK4 for ``dx/dt = A x``; returns all samples."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return _rk4_impl(A, x0, float(dt), int(n_steps))


def step_matrix_steps(M, x0, n_steps: int) -> np.ndarray:
    """Repeated application of a precomputed one-step matrix."""
    M = np.ascontiguousarray(M, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return _stepmat_impl(M, x0, int(n_steps))
