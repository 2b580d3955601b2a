"""Interpretation helpers for estimated loadings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import TensorSeries, as_series


@dataclass(frozen=True)
class RotatedLoading:
    matrix: np.ndarray
    rotation: np.ndarray
    criterion_value: float
    sweeps: int = 0
    criterion_path: tuple = ()


def varimax_criterion(a) -> float:
    """``sum_j [mean_i a_ij^4 - (mean_i a_ij^2)^2]``."""
    a2 = np.asarray(a, dtype=np.float64) ** 2
    return float(np.sum(np.mean(a2**2, axis=0) - np.mean(a2, axis=0) ** 2))


def _pair_angle(x, y):
    # Kaiser's closed-form optimum for rotating one column pair
    p = x.size
    u = x * x - y * y
    v = 2.0 * x * y
    A, B = u.sum(), v.sum()
    C = np.sum(u * u - v * v)
    D = 2.0 * np.sum(u * v)
    return 0.25 * np.arctan2(D - 2.0 * A * B / p, C - (A * A - B * B) / p)


def varimax(a, tol: float = 1e-10, max_sweeps: int = 1000, normalize: bool = False) -> RotatedLoading:
    """Orthogonal varimax rotation by pairwise (Kaiser) sweeps.

    ``normalize`` turns on Kaiser row normalization. After convergence each
    column's largest-magnitude entry is made positive; the sign flips are
    folded into ``rotation`` so ``matrix == a @ rotation`` always holds.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    p, r = a.shape
    rot = np.eye(r)
    if r == 1:
        return RotatedLoading(a.copy(), rot, varimax_criterion(a))
    scale = np.ones(p)
    if normalize:
        scale = np.sqrt(np.sum(a * a, axis=1))
        scale[scale == 0] = 1.0
    b = a / scale[:, None]
    crit = varimax_criterion(b)
    path = [crit]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for i in range(r - 1):
            for j in range(i + 1, r):
                phi = _pair_angle(b[:, i], b[:, j])
                if phi == 0.0:
                    continue
                c, s = np.cos(phi), np.sin(phi)
                g = np.array([[c, -s], [s, c]])
                b[:, [i, j]] = b[:, [i, j]] @ g
                rot[:, [i, j]] = rot[:, [i, j]] @ g
        new = varimax_criterion(b)
        path.append(new)
        if new - crit < tol:
            crit = new
            break
        crit = new
    rotated = a @ rot
    flips = np.sign(rotated[np.argmax(np.abs(rotated), axis=0), np.arange(r)])
    flips[flips == 0] = 1.0
    rot = rot * flips
    rotated = a @ rot
    return RotatedLoading(rotated, rot, varimax_criterion(rotated), sweeps, tuple(path))


def normalize_columns(a, atol: float = 1e-12):
    """Divide each column by its sum; returns ``(matrix, flags)``.

    Columns whose sum is within ``atol`` of zero are left as they are and
    flagged ``True``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    sums = a.sum(axis=0)
    flags = np.abs(sums) < atol
    out = a.copy()
    ok = ~flags
    out[:, ok] = a[:, ok] / sums[ok]
    return out, flags


def scaled_integers(a, scale: float = 30.0, truncate: bool = True) -> np.ndarray:
    """Display form: multiply by ``scale`` and truncate toward zero.

    ``scale=100`` gives the percentage form. With ``truncate=False`` the
    values are rounded instead.
    """
    v = np.asarray(a, dtype=np.float64) * scale
    return (np.trunc(v) if truncate else np.round(v)).astype(np.int64)


def moving_average(x, window: int) -> TensorSeries:
    """Slice ``t`` of the output is the mean of input slices ``t .. t+window-1``."""
    series = as_series(x)
    if not 1 <= window <= series.T:
        raise ValueError(f"window must be in 1..{series.T}")
    data = series.filled()
    windows = np.lib.stride_tricks.sliding_window_view(data, window, axis=0)
    return TensorSeries(windows.mean(axis=-1))
