"""Two-term power-law fit of average estimation loss.

The model is::

    log2 L ~ log2(c1 * 2**nu1 + c6 * 2**nu2)
    nu1 = c2 log2 d1 + c3 log2 d2 + c4 log2 lam + c5 log2 T
    nu2 = c7 log2 d1 + c8 log2 d2 + c9 log2 lam + c10 log2 T

It is fitted by Levenberg-damped Gauss-Newton from several starts, with
``c1`` and ``c6`` kept positive by optimizing ``log2 c1`` and ``log2 c6``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .diagnostics import predicted_rate
from .errors import DataError

COEF_NAMES = tuple(f"c{i}" for i in range(1, 11))

# (c2, c3, c4, c5, c7, c8, c9, c10) implied by the one-factor error bounds
THEORY_EXPONENTS = {
    "TIPUP": (0.5, 0.0, -1.0, -0.5, 0.5, 0.5, -2.0, -0.5),
    "TOPUP": (0.5, 0.5, -1.0, -0.5, 0.5, 1.0, -2.0, -0.5),
}

GRAD_TOL = 1e-9
MAX_ITER = 500
N_RANDOM_STARTS = 7


@dataclass
class RateFitResult:
    coefficients: Dict[str, float]
    residual_sse: float
    iterations: int
    converged: bool
    gradient_norm: float
    start_index: int
    history: List[float] = field(default_factory=list, repr=False)

    def exponents(self) -> tuple:
        c = self.coefficients
        return tuple(c[n] for n in ("c2", "c3", "c4", "c5", "c7", "c8", "c9", "c10"))


# -- data -------------------------------------------------------------------


def theory_exponents(method: str) -> tuple:
    m = method.upper()
    if m.startswith("IT"):
        m = m[1:]
    if m not in THEORY_EXPONENTS:
        raise ValueError(f"no theoretical exponents for {method!r}")
    return THEORY_EXPONENTS[m]


def _as_records(records) -> np.ndarray:
    if len(records) and isinstance(records[0], dict):
        keys = ("d1", "d2", "lam", "T", "loss")
        arr = np.array([[r[k] for k in keys] for r in records], dtype=np.float64)
    else:
        arr = np.asarray(records, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise DataError("records must be rows of (d1, d2, lam, T, mean_loss)")
    return arr


def _design(arr):
    if np.any(arr[:, :4] <= 0):
        raise DataError("d1, d2, lam and T must be positive")
    if np.any(arr[:, 4] <= 0) or not np.all(np.isfinite(arr[:, 4])):
        raise DataError("losses must be positive and finite")
    return np.log2(arr[:, :4]), np.log2(arr[:, 4])


# -- model ------------------------------------------------------------------


def _split(theta):
    return theta[0], theta[1:5], theta[5], theta[6:10]


def _model(theta, x):
    a1, b1, a6, b2 = _split(theta)
    nu1 = a1 + x @ b1
    nu2 = a6 + x @ b2
    g = np.logaddexp2(nu1, nu2)
    w1 = np.exp2(nu1 - g)
    w2 = np.exp2(nu2 - g)
    jac = np.empty((x.shape[0], 10))
    jac[:, 0] = w1
    jac[:, 1:5] = w1[:, None] * x
    jac[:, 5] = w2
    jac[:, 6:10] = w2[:, None] * x
    return g, jac


def objective(theta, x, y) -> float:
    g, _ = _model(np.asarray(theta, dtype=np.float64), x)
    return float(np.sum((y - g) ** 2))


def _to_theta(c1, exps, c6):
    e = list(exps)
    return np.array([np.log2(c1)] + e[:4] + [np.log2(c6)] + e[4:], dtype=np.float64)


def _to_coefficients(theta) -> Dict[str, float]:
    vals = [2.0 ** theta[0], *theta[1:5], 2.0 ** theta[5], *theta[6:10]]
    return {n: float(v) for n, v in zip(COEF_NAMES, vals)}


def _gauss_newton(theta, x, y, tol, max_iter):
    theta = theta.copy()
    g, jac = _model(theta, x)
    r = y - g
    sse = float(r @ r)
    history = [sse]
    mu = 1e-3 * max(1.0, float(np.max(np.sum(jac * jac, axis=0))))
    grad = jac.T @ r
    it = 0
    eye = np.eye(theta.size)
    while it < max_iter:
        if np.linalg.norm(grad) < tol:
            break
        it += 1
        jtj = jac.T @ jac
        accepted = False
        while mu < 1e16:
            step = np.linalg.solve(jtj + mu * eye, grad)
            trial = theta + step
            g_t, jac_t = _model(trial, x)
            r_t = y - g_t
            sse_t = float(r_t @ r_t)
            if np.isfinite(sse_t) and sse_t <= sse:
                accepted = True
                break
            mu *= 4.0
        if not accepted:
            break
        small = sse - sse_t <= 1e-15 * max(sse, 1e-300) and np.linalg.norm(step) < 1e-14
        theta, jac, r, sse = trial, jac_t, r_t, sse_t
        grad = jac.T @ r
        history.append(sse)
        mu = max(mu / 3.0, 1e-12)
        if small:
            break
    gnorm = float(np.linalg.norm(grad))
    return theta, sse, it, gnorm < tol, gnorm, history


def _canonicalize(theta, collinear_d, reference):
    theta = theta.copy()
    if theta[3] < theta[8]:
        theta = np.concatenate([theta[5:], theta[:5]])
    if collinear_d:
        # only c2 + c3 (and c7 + c8) are identified when d1 == d2 throughout;
        # split each sum with the smallest change from the reference exponents
        for i, j, ri, rj in ((1, 2, reference[0], reference[1]), (6, 7, reference[4], reference[5])):
            s = theta[i] + theta[j]
            extra = (s - ri - rj) / 2.0
            theta[i], theta[j] = ri + extra, rj + extra
    return theta


def default_starts(reference, seed: int = 0) -> List[np.ndarray]:
    """Reference exponents, both theoretical rows, and jittered copies."""
    starts = [_to_theta(1.0, reference, 1.0)]
    for exps in THEORY_EXPONENTS.values():
        th = _to_theta(1.0, exps, 1.0)
        if not any(np.allclose(th, s) for s in starts):
            starts.append(th)
    rng = np.random.default_rng(seed)
    base = starts[0]
    for _ in range(N_RANDOM_STARTS):
        jitter = rng.normal(0.0, 0.5, size=10)
        starts.append(base + jitter)
    return starts


def fit_rate_model(
    records,
    method: Optional[str] = None,
    starts: Optional[Sequence] = None,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    workers: int = 1,
) -> RateFitResult:
    """Least-squares fit of the two-term rate model to ``(d1, d2, lam, T, mean_loss)`` rows.

    ``method`` ("TIPUP" or "TOPUP") selects the theoretical exponents used
    as the first start and as the reference for splitting the ``d1``/``d2``
    exponents when the records never vary them separately. The best
    start by residual sum of squares wins (ties go to the lower start
    index); ``converged`` reports whether that start reached the gradient
    tolerance.
    """
    arr = _as_records(records)
    if arr.shape[0] < 20:
        raise DataError(f"need at least 20 records, got {arr.shape[0]}")
    for col, name in ((3, "T"), (2, "lambda")):
        if np.unique(arr[:, col]).size < 3:
            raise DataError(f"need at least 3 distinct values of {name}")
    x, y = _design(arr)
    reference = theory_exponents(method or "TIPUP")
    collinear_d = bool(np.allclose(x[:, 0], x[:, 1]))
    starts = [np.asarray(s, dtype=np.float64) for s in (starts or default_starts(reference))]

    def run(start):
        return _gauss_newton(start, x, y, tol, max_iter)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]

    best = None
    for idx, (theta, sse, it, conv, gnorm, hist) in enumerate(results):
        key = sse if np.isfinite(sse) else np.inf
        if best is None or key < best[0]:
            best = (key, idx, theta, sse, it, conv, gnorm, hist)
    _, idx, theta, sse, it, conv, gnorm, hist = best
    theta = _canonicalize(theta, collinear_d, reference)
    return RateFitResult(_to_coefficients(theta), sse, it, conv, gnorm, idx, hist)


# -- surface tables ----------------------------------------------------------


def emit_rate_surface(records, method: str, aggregate: bool = True, decimals: int = 9) -> np.ndarray:
    """Rows ``(x, y, z)``: log2 of both predicted rate terms and log2 mean loss.

    With ``aggregate``, records sharing ``(x, y)`` collapse into one row whose
    ``z`` is the average of their ``z`` values.
    """
    arr = _as_records(records)
    _design(arr)
    t1, t2 = predicted_rate(method, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
    rows = np.column_stack([np.log2(t1), np.log2(t2), np.log2(arr[:, 4])])
    if not aggregate:
        return rows
    groups: Dict[tuple, list] = {}
    for row in rows:
        key = (round(row[0], decimals), round(row[1], decimals))
        groups.setdefault(key, [row[0], row[1], []])[2].append(row[2])
    return np.array([[gx, gy, float(np.mean(zs))] for gx, gy, zs in groups.values()])
