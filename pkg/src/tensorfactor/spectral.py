"""Truncated left singular subspaces, projections and spectral norms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BasisError, NumericError, RankError

# Use the n x n Gram matrix once the matrix is this much wider than tall.
GRAM_ASPECT = 4


@dataclass(frozen=True)
class SvdResult:
    left_vectors: np.ndarray
    singular_values: np.ndarray


def _check_finite(m):
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")


def canonical_signs(u: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Flip columns so the first non-negligible coordinate is positive."""
    u = np.array(u, dtype=np.float64, copy=True)
    for j in range(u.shape[1]):
        col = u[:, j]
        big = np.flatnonzero(np.abs(col) > atol * max(np.abs(col).max(), 1e-300))
        if big.size and col[big[0]] < 0:
            u[:, j] = -col
    return u


def gram_eigh(gram: np.ndarray, count: int):
    """Top-``count`` eigenvectors of a PSD Gram matrix plus the full singular ladder.

    The ladder is ``sqrt`` of the eigenvalues, sorted non-increasing, with
    round-off negatives clipped to zero.
    """
    gram = np.asarray(gram, dtype=np.float64)
    _check_finite(gram)
    n = gram.shape[0]
    if not 1 <= count <= n:
        raise RankError(f"count {count} outside 1..{n}")
    w, v = np.linalg.eigh(0.5 * (gram + gram.T))
    w, v = w[::-1], v[:, ::-1]
    ladder = np.sqrt(np.clip(w, 0.0, None))
    return canonical_signs(v[:, :count]), ladder


def top_left_singular(m, count: int, method: str = "auto") -> SvdResult:
    """Leading ``count`` left singular vectors and values of ``m``.

    ``method`` is ``"gram"`` (eigendecomposition of ``m m^T``), ``"svd"``
    (dense SVD) or ``"auto"``, which takes the Gram route for wide matrices.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    _check_finite(m)
    n, p = m.shape
    if not 1 <= count <= min(n, p):
        raise RankError(f"count {count} outside 1..{min(n, p)}")
    if method == "auto":
        method = "gram" if p >= GRAM_ASPECT * n else "svd"
    if method == "gram":
        u, ladder = gram_eigh(m @ m.T, count)
        return SvdResult(u, ladder[:count])
    if method != "svd":
        raise ValueError(f"unknown method {method!r}")
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return SvdResult(canonical_signs(u[:, :count]), s[:count])


def projection_from_basis(u, atol: float = 1e-8) -> np.ndarray:
    """Orthogonal projection ``U U^T`` onto the span of orthonormal columns."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    gram = u.T @ u
    if not np.allclose(gram, np.eye(u.shape[1]), rtol=0.0, atol=atol):
        raise BasisError("columns are not orthonormal")
    return u @ u.T


def orthonormal_basis(a) -> np.ndarray:
    """Orthonormal basis for the column space of a full-column-rank matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    q, _ = np.linalg.qr(a)
    return q


def projection_onto(a) -> np.ndarray:
    """``A (A^T A)^{-1} A^T`` for a full-column-rank ``A``."""
    q = orthonormal_basis(a)
    return q @ q.T


def spectral_norm(m, tol: float = 1e-10, max_iter: int = 20000, seed: int = 0) -> float:
    """Largest singular value by power iteration on the smaller Gram matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    _check_finite(m)
    if m.size == 0 or not np.any(m):
        return 0.0
    gram = m @ m.T if m.shape[0] <= m.shape[1] else m.T @ m
    v = np.random.default_rng(seed).standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(max_iter):
        w = gram @ v
        mu = float(v @ w)
        resid = np.linalg.norm(w - mu * v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # v started orthogonal to the range; restart from a new direction
            v = np.roll(v, 1) + 1e-3
            v /= np.linalg.norm(v)
            continue
        v = w / norm_w
        if resid <= tol * mu:
            return float(np.sqrt(max(mu, 0.0)))
    # slow convergence means a near-tie at the top; a dense solve settles it
    return float(np.linalg.norm(m, 2))


def projection_distance(p_hat, p) -> float:
    """``||P_hat - P||_S`` for symmetric projections."""
    diff = np.asarray(p_hat, dtype=np.float64) - np.asarray(p, dtype=np.float64)
    w = np.linalg.eigvalsh(0.5 * (diff + diff.T))
    return float(np.max(np.abs(w)))
