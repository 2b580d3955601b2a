"""Hot inner loops, compiled with numba when available.

Only loops that cannot be handed to BLAS are compiled: the TOPUP Gram
accumulation is matrix products either way and runs as numpy on both
backends. Every compiled kernel has a pure-numpy twin. The numba path is used unless numba
is missing or the environment variable ``TENSORFACTOR_DISABLE_NUMBA`` is
set to a non-empty value other than ``0``; :func:`set_backend` switches at
runtime (tests and the benchmark use it to run both paths).
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None

NUMBA_AVAILABLE = numba is not None

# Materializing the lagged cross-product costs d_k * d_-k * d floats;
# beyond this the Gram matrix is accumulated slab by slab.
MATERIALIZE_LIMIT = 2**22


def _env_disabled() -> bool:
    flag = os.environ.get("TENSORFACTOR_DISABLE_NUMBA", "")
    return flag not in ("", "0")


_backend = "numba" if NUMBA_AVAILABLE and not _env_disabled() else "numpy"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


# -- numpy implementations --------------------------------------------------


def _topup_gram_numpy(lag, lead):
    n, dk, m = lag.shape
    if dk * m * lead.shape[1] <= MATERIALIZE_LIMIT:
        v = np.tensordot(lag, lead, axes=(0, 0)).reshape(dk, -1)
        return v @ v.T
    slabs = np.ascontiguousarray(lag.transpose(2, 1, 0))  # (m, d_k, n)
    out = np.zeros((dk, dk))
    for j in range(m):
        s = slabs[j] @ lead
        out += s @ s.T
    return out


def _ar1_filter_numpy(innov, phi, init):
    out = np.empty_like(innov)
    prev = init
    for t in range(innov.shape[0]):
        prev = phi * prev + innov[t]
        out[t] = prev
    return out


# -- numba implementations --------------------------------------------------

if NUMBA_AVAILABLE:

    @numba.njit(cache=True)
    def _ar1_filter_numba(innov, phi, init):
        n, p = innov.shape
        out = np.empty_like(innov)
        for i in range(p):
            prev = init[i]
            for t in range(n):
                prev = phi[i] * prev + innov[t, i]
                out[t, i] = prev
        return out


# -- dispatch ---------------------------------------------------------------


def topup_gram(lag, lead) -> np.ndarray:
    """Gram matrix of one lag's TOPUP slab, unnormalized.

    ``lag`` has shape ``(n, d_k, d_-k)`` (mode-k unfoldings of the lagged
    slices) and ``lead`` shape ``(n, d)`` (the leading slices flattened, in
    any fixed order). Returns ``sum_j S_j S_j^T`` with
    ``S_j = lag[:, :, j]^T lead``.
    """
    lag = np.asarray(lag, dtype=np.float64)
    lead = np.ascontiguousarray(lead, dtype=np.float64)
    return _topup_gram_numpy(lag, lead)


def ar1_filter(innov, phi, init) -> np.ndarray:
    """Run ``x_t = phi * x_{t-1} + innov_t`` column-wise from ``x_0 = init``."""
    innov = np.ascontiguousarray(innov, dtype=np.float64)
    phi = np.ascontiguousarray(np.broadcast_to(phi, innov.shape[1:]), dtype=np.float64)
    init = np.ascontiguousarray(np.broadcast_to(init, innov.shape[1:]), dtype=np.float64)
    if _backend == "numba":
        return _ar1_filter_numba(innov, phi, init)
    return _ar1_filter_numpy(innov, phi, init)
