"""Simulated tensor factor series: Tucker signal with AR(1) factors plus
Kronecker-structured white noise.

Loadings, factors and noise are drawn from separate RNG sub-streams of
the same seed, so changing e.g. the noise correlation leaves the factor
path untouched.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from . import kernels
from .tensor import TensorSeries, mode_product

Seed = Union[int, Sequence[int]]

LOADING_STREAM, FACTOR_STREAM, NOISE_STREAM = 0, 1, 2
LOADING_MODES = ("gaussian_normalized", "orthonormal")


@dataclass(frozen=True)
class DgpSpec:
    """Configuration for :func:`gen_series`.

    ``ar_coeffs`` is either one coefficient shared by every factor or one
    per factor entry, in canonical (first index fastest) order over the
    ``ranks`` shape. ``noise_offdiag`` is the common off-diagonal of each
    equicorrelated ``Psi_k`` (scalar or per mode); ``noise_scale`` scales
    the whole noise term and may be 0 for noise-free data.
    """

    dims: Tuple[int, ...]
    ranks: Tuple[int, ...]
    T: int
    lam: float = 1.0
    ar_coeffs: Union[float, Tuple[float, ...]] = 0.6
    noise_offdiag: Union[float, Tuple[float, ...]] = 0.0
    seed: Seed = 0
    loading_mode: str = "gaussian_normalized"
    noise_scale: float = 1.0
    burn_in: int = 200

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        ranks = tuple(int(r) for r in self.ranks)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "ranks", ranks)
        if len(dims) != len(ranks):
            raise ValueError("dims and ranks differ in length")
        if any(not 1 <= r <= d for r, d in zip(ranks, dims)):
            raise ValueError(f"ranks {ranks} incompatible with dims {dims}")
        if self.T < 1:
            raise ValueError("T must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        phi = np.atleast_1d(np.asarray(self.ar_coeffs, dtype=np.float64))
        if phi.size not in (1, int(np.prod(ranks))):
            raise ValueError("need one AR coefficient or one per factor")
        if np.any(np.abs(phi) >= 1):
            raise ValueError("AR coefficients must satisfy |phi| < 1")
        if isinstance(self.ar_coeffs, (list, np.ndarray)):
            object.__setattr__(self, "ar_coeffs", tuple(float(p) for p in phi))
        rho = np.atleast_1d(np.asarray(self.noise_offdiag, dtype=np.float64))
        if rho.size not in (1, len(dims)):
            raise ValueError("need one noise correlation or one per mode")
        if np.any(rho < 0) or np.any(rho >= 1):
            raise ValueError("noise_offdiag must lie in [0, 1)")
        if isinstance(self.noise_offdiag, (list, np.ndarray)):
            object.__setattr__(self, "noise_offdiag", tuple(float(r) for r in rho))
        if isinstance(self.seed, (list, np.ndarray)):
            object.__setattr__(self, "seed", tuple(int(s) for s in self.seed))
        if self.loading_mode not in LOADING_MODES:
            raise ValueError(f"loading_mode must be one of {LOADING_MODES}")

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("dims", "ranks"):
            out[key] = list(out[key])
        for key in ("ar_coeffs", "noise_offdiag", "seed"):
            if isinstance(out[key], tuple):
                out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DgpSpec":
        d = dict(d)
        for key in ("ar_coeffs", "noise_offdiag", "seed"):
            if isinstance(d.get(key), list):
                d[key] = tuple(d[key])
        return cls(**d)

    @property
    def phi(self) -> np.ndarray:
        n = int(np.prod(self.ranks))
        return np.broadcast_to(np.asarray(self.ar_coeffs, dtype=np.float64), (n,)).copy()

    def psi(self, mode: int) -> np.ndarray:
        rho = np.broadcast_to(np.asarray(self.noise_offdiag, dtype=np.float64), (len(self.dims),))
        d = self.dims[mode]
        return (1 - rho[mode]) * np.eye(d) + rho[mode] * np.ones((d, d))


@dataclass(frozen=True)
class Truth:
    loadings: List[np.ndarray]
    factors: TensorSeries
    signal: TensorSeries


def stream(seed: Seed, stream_id: int) -> np.random.Generator:
    """Independent generator for one named sub-stream of ``seed``."""
    entropy = [int(s) for s in np.atleast_1d(seed)]
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(stream_id,)))


def gen_loadings(spec: DgpSpec) -> List[np.ndarray]:
    """Gaussian loadings: unit-norm columns for rank one, QR-orthonormalized otherwise."""
    rng = stream(spec.seed, LOADING_STREAM)
    out = []
    for d, r in zip(spec.dims, spec.ranks):
        a = rng.standard_normal((d, r))
        if r == 1 and spec.loading_mode == "gaussian_normalized":
            a /= np.linalg.norm(a)
        else:
            q, rr = np.linalg.qr(a)
            a = q * np.sign(np.diag(rr))
        out.append(a)
    return out


def gen_factor_series(spec: DgpSpec) -> TensorSeries:
    """Independent stationary AR(1) paths with N(0, 1) innovations."""
    rng = stream(spec.seed, FACTOR_STREAM)
    phi = spec.phi
    n = phi.size
    init = rng.standard_normal(n) / np.sqrt(1 - phi**2)
    innov = rng.standard_normal((spec.burn_in + spec.T, n))
    path = kernels.ar1_filter(innov, phi, init)[spec.burn_in:]
    # factor entries fill the ranks shape in canonical order
    data = path.reshape((spec.T,) + spec.ranks[::-1]).transpose(
        [0] + list(range(len(spec.ranks), 0, -1))
    )
    return TensorSeries(np.ascontiguousarray(data))


def sym_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.T


def gen_noise_series(spec: DgpSpec) -> TensorSeries:
    """``E_t = Z_t x_1 Psi_1^{1/2} ... x_K Psi_K^{1/2}``, Z i.i.d. N(0, 1)."""
    rng = stream(spec.seed, NOISE_STREAM)
    z = rng.standard_normal((spec.T,) + spec.dims)
    for k in range(len(spec.dims)):
        z = mode_product(z, sym_sqrt(spec.psi(k)), k + 1)
    return TensorSeries(z)


def gen_series(spec: DgpSpec) -> Tuple[TensorSeries, Truth]:
    """``X_t = lam * F_t x_k A_k + noise_scale * E_t`` with its ground truth."""
    loadings = gen_loadings(spec)
    factors = gen_factor_series(spec)
    signal = factors.data
    for k, a in enumerate(loadings):
        signal = mode_product(signal, a, k + 1)
    signal = spec.lam * signal
    x = signal
    if spec.noise_scale != 0:
        x = signal + spec.noise_scale * gen_noise_series(spec).data
    return TensorSeries(x), Truth(loadings, factors, TensorSeries(signal))
