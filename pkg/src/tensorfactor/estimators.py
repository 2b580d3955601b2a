"""Loading-space estimators for tensor factor models.

TOPUP aggregates outer products of lagged mode-k unfoldings, TIPUP their
inner products; both take the leading left singular vectors of the
resulting matrix. Neither uses lag 0, so a white noise term with any
contemporaneous covariance drops out in expectation. UP is the static
baseline: an SVD of the unfolded stack with time as an extra mode.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateDataError, LagError, RankError
from .spectral import gram_eigh, projection_distance
from .tensor import TensorSeries, as_series, mode_product, unfold, unfold_series

METHODS = ("TOPUP", "TIPUP", "iTOPUP", "iTIPUP", "UP")
ITERATIVE = {"iTOPUP": "TOPUP", "iTIPUP": "TIPUP"}


@dataclass(frozen=True)
class ModelSpec:
    """Ranks, lag window and method for one estimation run.

    ``h0 > T/4`` is outside the range the error bounds cover and raises
    unless ``allow_long_lag`` is set, in which case it only warns.
    """

    ranks: Sequence[int]
    h0: int = 1
    method: str = "TIPUP"
    max_iter: int = 20
    iter_tol: float = 1e-8
    allow_long_lag: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.h0 < 1:
            raise LagError("h0 must be at least 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")

    def validate(self, series: TensorSeries) -> None:
        if len(self.ranks) != series.order:
            raise RankError(f"{len(self.ranks)} ranks given for an order-{series.order} series")
        for k, (r, d) in enumerate(zip(self.ranks, series.shape)):
            if not 1 <= r <= d:
                raise RankError(f"rank {r} for mode {k} outside 1..{d}")
        if self.method == "UP":
            return
        check_lag(series.T, self.h0, self.allow_long_lag)


def check_lag(T: int, h0: int, allow_long_lag: bool = False) -> None:
    if h0 >= T:
        raise LagError(f"h0={h0} needs at least h0+1 time points, got T={T}")
    if h0 > T / 4:
        msg = f"h0={h0} exceeds T/4={T / 4:g}"
        if not allow_long_lag:
            raise LagError(msg + " (pass allow_long_lag to override)")
        warnings.warn(msg, stacklevel=3)


@dataclass
class FactorEstimate:
    bases: List[np.ndarray]
    singular_ladders: List[np.ndarray]
    factors: TensorSeries
    method: str
    h0: int
    iterations_used: int = 0
    converged: bool = True
    projections: List[np.ndarray] = field(init=False)

    def __post_init__(self):
        self.projections = [u @ u.T for u in self.bases]

    @property
    def ranks(self) -> tuple:
        return tuple(u.shape[1] for u in self.bases)


# -- estimator matrices -----------------------------------------------------


def _lag_pairs(data, mode, h0):
    T = data.shape[0]
    if not 1 <= h0 < T:
        raise LagError(f"need 1 <= h0 < T, got h0={h0}, T={T}")
    u = unfold_series(data, mode)
    for h in range(1, h0 + 1):
        yield h, u[: T - h], u[h:], T - h


def topup_matrix(x, mode: int, h0: int) -> np.ndarray:
    """Mode-1 unfolding of the order-5 TOPUP tensor, ``d_k x (d_-k * d * h0)``.

    Entry ``[i1, (j1, i2, j2, h)]`` (``j1`` fastest) is
    ``sum_t mat_k(X_{t-h})[i1, j1] * mat_k(X_t)[i2, j2] / (T - h)``.
    """
    data = as_series(x).filled()
    slabs = [
        np.tensordot(lag, lead, axes=(0, 0)) / n for _, lag, lead, n in _lag_pairs(data, mode, h0)
    ]
    return unfold(np.stack(slabs, axis=-1), 0)


def tipup_matrix(x, mode: int, h0: int) -> np.ndarray:
    """Lag blocks ``sum_t mat_k(X_{t-h}) mat_k(X_t)^T / (T - h)``, side by side."""
    data = as_series(x).filled()
    blocks = [
        np.tensordot(lag, lead, axes=([0, 2], [0, 2])) / n
        for _, lag, lead, n in _lag_pairs(data, mode, h0)
    ]
    return np.hstack(blocks)


def topup_gram(x, mode: int, h0: int) -> np.ndarray:
    """``W_k = mat_1(TOPUP_k) mat_1(TOPUP_k)^T`` accumulated lag by lag."""
    data = as_series(x).filled()
    dk = data.shape[mode + 1]
    out = np.zeros((dk, dk))
    for _, lag, lead, n in _lag_pairs(data, mode, h0):
        out += kernels.topup_gram(lag, lead.reshape(n, -1)) / n**2
    return out


def tipup_gram(x, mode: int, h0: int) -> np.ndarray:
    m = tipup_matrix(x, mode, h0)
    return m @ m.T


def up_gram(x, mode: int) -> np.ndarray:
    """Gram of the mode-k unfolding of the stacked order-(K+1) tensor."""
    u = unfold_series(as_series(x).filled(), mode)
    return np.tensordot(u, u, axes=([0, 2], [0, 2]))


def _gram(data, mode, method, h0):
    if method == "TOPUP":
        return topup_gram(data, mode, h0)
    if method == "TIPUP":
        return tipup_gram(data, mode, h0)
    return up_gram(data, mode)


def _ladder_length(shape, mode, method, h0, T):
    dk = shape[mode]
    d = int(np.prod(shape))
    cols = {"TOPUP": d * (d // dk) * h0, "TIPUP": dk * h0, "UP": (d // dk) * T}[method]
    return min(dk, cols)


def _mode_basis(data, mode, rank, method, h0):
    gram = _gram(data, mode, method, h0)
    u, ladder = gram_eigh(gram, rank)
    n = _ladder_length(data.shape[1:], mode, method, h0, data.shape[0])
    return u, ladder[:n]


def extract_factors(data, bases) -> np.ndarray:
    """``F_t = X_t x_1 U_1^T ... x_K U_K^T`` for every slice."""
    for k, u in enumerate(bases):
        data = mode_product(data, u.T, k + 1)
    return data


# -- estimation -------------------------------------------------------------


def estimate(x, spec: ModelSpec) -> FactorEstimate:
    """Estimate every mode's loading space with the method in ``spec``."""
    series = as_series(x)
    spec.validate(series)
    if spec.method in ITERATIVE:
        return estimate_iterative(series, spec)
    data = series.filled()
    if not np.any(data):
        raise DegenerateDataError("series is identically zero")
    bases, ladders = [], []
    for k, r in enumerate(spec.ranks):
        u, ladder = _mode_basis(data, k, r, spec.method, spec.h0)
        bases.append(u)
        ladders.append(ladder)
    factors = TensorSeries(extract_factors(data, bases))
    return FactorEstimate(bases, ladders, factors, spec.method, spec.h0)


def estimate_iterative(x, spec: ModelSpec) -> FactorEstimate:
    """Refine TOPUP/TIPUP by re-estimating each mode from the compressed series.

    Mode ``k`` is re-estimated from ``X_t x_{j != k} U_j^T`` using the
    latest bases, sweeping ``k = 1..K`` in order, until no projection
    moves by more than ``iter_tol`` in spectral norm or ``max_iter``
    sweeps have run.
    """
    series = as_series(x)
    spec.validate(series)
    if spec.method not in ITERATIVE:
        raise ValueError(f"{spec.method} is not an iterative method")
    base = ITERATIVE[spec.method]
    data = series.filled()
    init = estimate(series, ModelSpec(spec.ranks, spec.h0, base, allow_long_lag=True))
    bases, ladders = list(init.bases), list(init.singular_ladders)
    converged = spec.max_iter == 0
    sweeps = 0
    K = len(bases)
    for sweeps in range(1, spec.max_iter + 1):
        old = [u @ u.T for u in bases]
        for k in range(K):
            compressed = data
            for j in range(K):
                if j != k:
                    compressed = mode_product(compressed, bases[j].T, j + 1)
            bases[k], ladders[k] = _mode_basis(compressed, k, spec.ranks[k], base, spec.h0)
        change = max(projection_distance(u @ u.T, p) for u, p in zip(bases, old))
        if change < spec.iter_tol:
            converged = True
            break
    factors = TensorSeries(extract_factors(data, bases))
    return FactorEstimate(bases, ladders, factors, spec.method, spec.h0, sweeps, converged)


def reconstruct_signal(est: FactorEstimate) -> TensorSeries:
    """Low-rank signal ``F_t x_k U_k``, i.e. ``X_t x_k P_k``."""
    data = est.factors.data
    for k, u in enumerate(est.bases):
        data = mode_product(data, u, k + 1)
    return TensorSeries(data)


def demean(x) -> TensorSeries:
    """Subtract the time average from every slice."""
    series = as_series(x)
    data = series.filled()
    return TensorSeries(data - data.mean(axis=0), series.mask)


# -- rank selection ---------------------------------------------------------


@dataclass(frozen=True)
class RankSelection:
    ranks: tuple
    flags: tuple  # per mode: None, "degenerate" or "no_signal"
    ladders: tuple

    @property
    def flagged(self) -> bool:
        return any(f is not None for f in self.flags)


def eigen_ratio_rank(ladder, min_ratio: float = 2.0, zero_tol: float = 1e-7):
    """Ratio heuristic: ``argmax_{1 <= m <= d/2} ladder[m] / ladder[m+1]``.

    Returns ``(rank, flag)``. A ladder that vanishes after its first entry
    gives ``(1, "degenerate")``; a best ratio below ``min_ratio`` (no clear
    gap) is returned with flag ``"no_signal"``.
    """
    ladder = np.asarray(ladder, dtype=np.float64)
    top = ladder[0] if ladder.size else 0.0
    if top <= 0 or ladder.size < 2 or np.all(ladder[1:] <= zero_tol * top):
        return 1, "degenerate"
    m_max = max(1, min(ladder.size // 2, ladder.size - 1))
    num = ladder[:m_max]
    den = np.maximum(ladder[1 : m_max + 1], zero_tol * top)
    ratios = num / den
    rank = int(np.argmax(ratios)) + 1
    flag = None if ratios[rank - 1] >= min_ratio else "no_signal"
    return rank, flag


def select_ranks(x, h0: int = 1, method: str = "TIPUP", min_ratio: float = 2.0) -> RankSelection:
    """Pick per-mode ranks from the singular ladders of the chosen estimator."""
    series = as_series(x)
    method = ITERATIVE.get(method, method)
    if method not in ("TOPUP", "TIPUP", "UP"):
        raise ValueError(f"unknown method {method!r}")
    data = series.filled()
    if method != "UP":
        check_lag(series.T, h0, allow_long_lag=True)
    ranks, flags, ladders = [], [], []
    for k in range(series.order):
        _, ladder = _mode_basis(data, k, 1, method, h0)
        r, flag = eigen_ratio_rank(ladder, min_ratio)
        ranks.append(r)
        flags.append(flag)
        ladders.append(ladder)
    return RankSelection(tuple(ranks), tuple(flags), tuple(ladders))
