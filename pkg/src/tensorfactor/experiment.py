"""Monte-Carlo runner: simulate a grid of cells, estimate, record losses.

Every (cell, replicate) pair draws from its own seed, derived from the
base seed and the cell parameters, so results do not depend on the
worker count or on which other cells are in the grid.
"""
from __future__ import annotations

import struct
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dgp import DgpSpec, gen_series
from .diagnostics import loading_loss
from .estimators import METHODS, ModelSpec, estimate

MAX_DIM = 2**14
MAX_T = 2**15

RECORD_COLUMNS = (
    "T", "d1", "d2", "lam", "method", "h0", "replicate", "mode", "loss", "status", "seconds",
)
SUMMARY_COLUMNS = ("T", "d1", "d2", "lam", "method", "h0", "mode", "n", "mean_loss", "median_loss")

Dim = Union[int, Sequence[int]]


@dataclass
class ExperimentGrid:
    """Cells are the product ``T_values x d_values x lambda_values``.

    A ``d_values`` entry is either one int (every mode gets that size) or a
    full dimension tuple. Every method in ``methods`` is run with every
    ``h0`` in ``h0_values`` on the same simulated replicate; UP ignores
    ``h0`` and runs once (recorded with ``h0 = 0``).
    """

    T_values: Sequence[int]
    d_values: Sequence[Dim]
    lambda_values: Sequence[float]
    methods: Sequence[str] = ("TIPUP", "TOPUP")
    replicates: int = 100
    base_seed: int = 0
    h0_values: Sequence[int] = (1,)
    ranks: Sequence[int] = (1, 1)
    ar_coeffs: Union[float, Sequence[float]] = 0.6
    noise_offdiag: float = 0.2
    max_iter: int = 20
    iter_tol: float = 1e-8
    workers: int = 1
    output: Optional[str] = None
    force: bool = False

    def __post_init__(self):
        for name in ("T_values", "lambda_values", "methods", "h0_values", "ranks"):
            setattr(self, name, tuple(getattr(self, name)))
        self.d_values = tuple(tuple(d) if np.ndim(d) else d for d in self.d_values)
        if np.ndim(self.ar_coeffs):
            self.ar_coeffs = tuple(self.ar_coeffs)
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        for name in ("T_values", "lambda_values", "h0_values"):
            vals = list(getattr(self, name))
            if not vals or any(v <= 0 for v in vals):
                raise ValueError(f"{name} must be a non-empty list of positive values")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        K = len(self.ranks)
        for dims in self.cell_dims():
            if len(dims) != K or any(d < 1 for d in dims):
                raise ValueError(f"dims {dims} do not match ranks {tuple(self.ranks)}")
            if not self.force and int(np.prod(dims)) > MAX_DIM:
                raise ValueError(f"d={int(np.prod(dims))} exceeds {MAX_DIM}; pass force to run it")
        if not self.force and max(self.T_values) > MAX_T:
            raise ValueError(f"T={max(self.T_values)} exceeds {MAX_T}; pass force to run it")

    def cell_dims(self) -> List[Tuple[int, ...]]:
        K = len(self.ranks)
        out = []
        for d in self.d_values:
            out.append(tuple(int(v) for v in d) if np.ndim(d) else (int(d),) * K)
        return out

    def cells(self):
        for T in self.T_values:
            for dims in self.cell_dims():
                for lam in self.lambda_values:
                    yield int(T), dims, float(lam)

    def to_dict(self) -> dict:
        def plain(v):
            return [plain(x) for x in v] if isinstance(v, (tuple, list)) else v

        return {k: plain(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentGrid":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        return cls(**d)


def _float_key(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def replicate_seed(base_seed: int, T: int, dims, lam: float, replicate: int) -> tuple:
    return (int(base_seed), int(T), *map(int, dims), _float_key(lam), int(replicate))


def _run_task(task):
    grid_params, T, dims, lam, rep = task
    g = grid_params
    spec = DgpSpec(
        dims=dims,
        ranks=tuple(g["ranks"]),
        T=T,
        lam=lam,
        ar_coeffs=g["ar_coeffs"],
        noise_offdiag=g["noise_offdiag"],
        seed=replicate_seed(g["base_seed"], T, dims, lam, rep),
    )
    x, truth = gen_series(spec)
    d1 = dims[0]
    d2 = dims[1] if len(dims) > 1 else 1
    rows = []
    for method in g["methods"]:
        for h0 in ([0] if method == "UP" else g["h0_values"]):
            start = time.perf_counter()
            base = dict(T=T, d1=d1, d2=d2, lam=lam, method=method, h0=h0, replicate=rep)
            try:
                ms = ModelSpec(
                    spec.ranks,
                    h0=max(h0, 1),
                    method=method,
                    max_iter=g["max_iter"],
                    iter_tol=g["iter_tol"],
                    allow_long_lag=True,
                )
                est = estimate(x, ms)
                losses = [loading_loss(u, a) for u, a in zip(est.bases, truth.loadings)]
                status = "ok"
            except Exception as exc:  # a failed replicate is recorded, not fatal
                losses = [float("nan")] * len(dims)
                status = f"error: {type(exc).__name__}: {exc}"
            seconds = time.perf_counter() - start
            for k, loss in enumerate(losses):
                rows.append(dict(base, mode=k + 1, loss=loss, status=status, seconds=seconds))
    return rows


def _sort_key(row):
    return (row["T"], row["d1"], row["d2"], row["lam"], row["replicate"], row["method"], row["h0"], row["mode"])


def run_experiment(grid: ExperimentGrid, workers: Optional[int] = None) -> List[dict]:
    """One row per (cell, replicate, method, h0, mode), canonically sorted."""
    params = dict(
        ranks=list(grid.ranks),
        ar_coeffs=grid.ar_coeffs,
        noise_offdiag=grid.noise_offdiag,
        base_seed=grid.base_seed,
        methods=list(grid.methods),
        h0_values=list(grid.h0_values),
        max_iter=grid.max_iter,
        iter_tol=grid.iter_tol,
    )
    tasks = [
        (params, T, dims, lam, rep)
        for T, dims, lam in grid.cells()
        for rep in range(grid.replicates)
    ]
    workers = grid.workers if workers is None else workers
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                chunks = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
        else:
            chunks = [_run_task(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=_sort_key)
    return rows


def summarize(rows: List[dict]) -> List[dict]:
    """Mean and median loss per (cell, method, h0, mode), ignoring failed replicates."""
    groups: Dict[tuple, list] = {}
    for r in rows:
        key = (r["T"], r["d1"], r["d2"], r["lam"], r["method"], r["h0"], r["mode"])
        groups.setdefault(key, []).append(r["loss"])
    out = []
    for key in sorted(groups):
        losses = np.asarray(groups[key], dtype=np.float64)
        ok = losses[np.isfinite(losses)]
        out.append(
            dict(
                zip(SUMMARY_COLUMNS[:7], key),
                n=int(ok.size),
                mean_loss=float(ok.mean()) if ok.size else float("nan"),
                median_loss=float(np.median(ok)) if ok.size else float("nan"),
            )
        )
    return out


def losses_for(rows, method: str, h0: int = 1, mode: int = 1, **cell) -> np.ndarray:
    """Replicate losses of one method/h0/mode, optionally filtered by cell keys."""
    sel = [
        r["loss"]
        for r in rows
        if r["method"] == method
        and r["h0"] == (0 if method == "UP" else h0)
        and r["mode"] == mode
        and all(r[k] == v for k, v in cell.items())
    ]
    return np.asarray(sel, dtype=np.float64)


def rate_records(summary: List[dict], method: str, mode: int = 1, h0: int = 1) -> List[tuple]:
    """``(d1, d2, lam, T, mean_loss)`` rows for the rate fit."""
    return [
        (r["d1"], r["d2"], r["lam"], r["T"], r["mean_loss"])
        for r in summary
        if r["method"] == method and r["mode"] == mode and r["h0"] == h0 and r["n"] > 0
    ]
