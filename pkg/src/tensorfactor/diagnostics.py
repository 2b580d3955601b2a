"""Signal-strength quantities from the error analysis, and estimation losses.

The report is computed on a given series, normally the noise-free signal
``M_t`` from the simulator (the bounds are conditional on the factor
path). Passing observed data is allowed but must be labelled with
``empirical=True``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import LagError
from .estimators import tipup_matrix, topup_gram
from .spectral import gram_eigh, projection_distance, projection_onto, spectral_norm
from .tensor import as_series, unfold_series


@dataclass
class ModeReport:
    theta_star_spectral: float
    theta_op: float
    theta_trace: float
    tau: np.ndarray
    tau_star: np.ndarray
    rank: int
    lambda_k: float
    lambda_k_star: float


@dataclass
class TheoryReport:
    h0: int
    modes: List[ModeReport]
    rho_hat: Optional[np.ndarray]
    empirical: bool = False

    def to_dict(self) -> dict:
        out = {
            "h0": self.h0,
            "empirical": self.empirical,
            "rho_hat": None if self.rho_hat is None else self.rho_hat.tolist(),
            "modes": [],
        }
        for m in self.modes:
            d = asdict(m)
            d["tau"] = m.tau.tolist()
            d["tau_star"] = m.tau_star.tolist()
            out["modes"].append(d)
        return out


def lagged_moments(factors, h0: int) -> np.ndarray:
    """``rho_h = sum_{t>h} <F_{t-h}, F_t> / (T - h)`` for ``h = 0..h0``.

    For a scalar factor this is the usual sample autocovariance about 0.
    """
    f = as_series(factors).data
    T = f.shape[0]
    flat = f.reshape(T, -1)
    return np.array([np.sum(flat[: T - h] * flat[h:]) / (T - h) for h in range(h0 + 1)])


def _numerical_rank(ladder, rtol=1e-6):
    if ladder.size == 0 or ladder[0] == 0:
        return 1
    return max(1, int(np.sum(ladder > rtol * ladder[0])))


def theory_report(
    signal,
    h0: int,
    ranks: Optional[Sequence[int]] = None,
    factors=None,
    empirical: bool = False,
) -> TheoryReport:
    """Per-mode norms of the lag-0 cross moments, singular ladders and signal strengths.

    ``theta_op`` is the operator norm of the lag-0 outer-product tensor
    viewed as a ``d x d`` matrix; ``theta_star_spectral`` the spectral norm
    of its ``d_k x d_k`` inner-product counterpart. ``tau``/``tau_star``
    are the singular ladders of the TOPUP/TIPUP matrices built on
    ``signal``, and ``lambda_k = sqrt(tau[r_k - 1] / sqrt(h0))`` (same for
    the starred version). When ``ranks`` is omitted, the numerical rank
    of each ``tau`` ladder is used.
    """
    series = as_series(signal)
    T = series.T
    if h0 >= T:
        raise LagError(f"h0={h0} needs T > h0, got T={T}")
    data = series.filled()
    modes = []
    for k in range(series.order):
        u = unfold_series(data, k)
        z = u.reshape(T, -1) / np.sqrt(T)
        theta_op = spectral_norm(z) ** 2
        theta_star = np.tensordot(u, u, axes=([0, 2], [0, 2])) / T
        theta_star_s = spectral_norm(theta_star)
        if not np.any(data):
            tau = np.zeros(series.shape[k])
            tau_star = np.zeros(series.shape[k])
        else:
            _, tau = gram_eigh(topup_gram(data, k, h0), 1)
            ts = tipup_matrix(data, k, h0)
            _, tau_star = gram_eigh(ts @ ts.T, 1)
        r = int(ranks[k]) if ranks is not None else _numerical_rank(tau)
        lam_k = float(np.sqrt(tau[r - 1] / np.sqrt(h0)))
        lam_k_star = float(np.sqrt(tau_star[r - 1] / np.sqrt(h0)))
        modes.append(
            ModeReport(
                theta_star_spectral=float(theta_star_s),
                theta_op=float(theta_op),
                theta_trace=float(np.trace(theta_star)),
                tau=tau,
                tau_star=tau_star,
                rank=r,
                lambda_k=lam_k,
                lambda_k_star=lam_k_star,
            )
        )
    rho = lagged_moments(factors, h0) if factors is not None else None
    return TheoryReport(h0, modes, rho, empirical)


def loss_sine(u_hat, u) -> float:
    """``sqrt(1 - (u_hat . u)^2)`` for unit vectors: |sine| of the angle."""
    u_hat = np.ravel(np.asarray(u_hat, dtype=np.float64))
    u = np.ravel(np.asarray(u, dtype=np.float64))
    c = float(u_hat @ u)
    return float(np.sqrt(max(0.0, 1.0 - c * c)))


def loss_projection(p_hat, p) -> float:
    """Spectral norm of the difference of two projection matrices."""
    return projection_distance(p_hat, p)


def loading_loss(u_hat, a) -> float:
    """Projection loss between an estimated basis and a true loading matrix."""
    u_hat = np.asarray(u_hat, dtype=np.float64)
    if u_hat.ndim == 1:
        u_hat = u_hat[:, None]
    return projection_distance(u_hat @ u_hat.T, projection_onto(a))


def predicted_rate(method: str, d1: float, d2: float, lam: float, T: float):
    """The two rate components of the rank-one matrix model.

    TIPUP: ``(sqrt(d1) / (sqrt(T) lam), sqrt(d1 d2) / (sqrt(T) lam^2))``;
    TOPUP: ``(sqrt(d1 d2) / (sqrt(T) lam), sqrt(d1 d2^2) / (sqrt(T) lam^2))``.
    """
    m = method.upper()
    if m.startswith("IT"):
        m = m[1:]
    root_t = np.sqrt(T)
    if m == "TIPUP":
        return np.sqrt(d1) / (root_t * lam), np.sqrt(d1 * d2) / (root_t * lam**2)
    if m == "TOPUP":
        return np.sqrt(d1 * d2) / (root_t * lam), np.sqrt(d1 * d2**2) / (root_t * lam**2)
    raise ValueError(f"no rate formula for method {method!r}")


def norm_relations_hold(report: TheoryReport, rtol: float = 1e-9) -> bool:
    """Check ``r_k ||Theta*||_S >= trace >= 0`` and ``trace <= r ||Theta||_op``."""
    r = int(np.prod([m.rank for m in report.modes]))
    for m in report.modes:
        slack = rtol * max(1.0, m.theta_trace)
        if m.rank * m.theta_star_spectral < m.theta_trace - slack:
            return False
        if m.theta_trace > r * m.theta_op + slack:
            return False
    return True
