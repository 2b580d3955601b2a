"""Dense multilinear algebra on order-K arrays.

A tensor is a plain :class:`numpy.ndarray` whose shape is the dimension
vector ``(d_1, ..., d_K)``. Its canonical flat order has the first index
varying fastest (Fortran order), so ``vec(x) == x.ravel(order="F")``.

Modes are numbered from 0 in the Python API, so the math's mode ``k``
is ``mode=k-1`` here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ModeIndexError

MAX_ORDER = 6


def _check_mode(ndim: int, mode: int) -> int:
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < ndim:
        raise ModeIndexError(f"mode {mode} out of range for an order-{ndim} tensor")
    return int(mode)


def as_tensor(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 1:
        raise DimensionError("a tensor needs at least one mode")
    if x.ndim > MAX_ORDER:
        raise DimensionError(f"tensors of order > {MAX_ORDER} are not supported")
    return x


def from_vec(data, dims: Sequence[int]) -> np.ndarray:
    """Build a tensor from flat data stored in canonical order."""
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise DimensionError(f"dimensions must be positive, got {dims}")
    data = np.asarray(data, dtype=np.float64).ravel()
    if data.size != int(np.prod(dims)):
        raise DimensionError(f"{data.size} values cannot fill dims {dims}")
    return data.reshape(dims, order="F")


def vec(x) -> np.ndarray:
    """Stack mode-1 fibers: the canonical flat storage."""
    return np.asarray(x, dtype=np.float64).ravel(order="F")


def unfold(x, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding, shape ``(d_k, d / d_k)``.

    Column ``j`` holds the fiber at the ``j``-th multi-index of the other
    modes, enumerated with the lowest-numbered mode varying fastest.
    """
    x = np.asarray(x, dtype=np.float64)
    mode = _check_mode(x.ndim, mode)
    return np.moveaxis(x, mode, 0).reshape(x.shape[mode], -1, order="F")


def refold(m, mode: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    dims = tuple(int(d) for d in dims)
    m = np.asarray(m, dtype=np.float64)
    mode = _check_mode(len(dims), mode)
    rest = dims[:mode] + dims[mode + 1:]
    expected = (dims[mode], int(np.prod(rest)))
    if m.ndim != 2 or m.shape != expected:
        raise DimensionError(f"matrix of shape {m.shape} does not unfold dims {dims} at mode {mode}")
    return np.moveaxis(m.reshape((dims[mode],) + rest, order="F"), 0, mode)


def mode_product(x, a, mode: int) -> np.ndarray:
    """``x ×_k a``: multiply every mode-``mode`` fiber by ``a`` (shape ``m × d_k``)."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    mode = _check_mode(x.ndim, mode)
    if a.ndim != 2 or a.shape[1] != x.shape[mode]:
        raise DimensionError(
            f"matrix of shape {a.shape} cannot act on mode {mode} of size {x.shape[mode]}"
        )
    out = np.tensordot(a, x, axes=(1, mode))
    return np.moveaxis(out, 0, mode)


def multi_mode_product(x, mats, skip: Optional[int] = None, transpose: bool = False) -> np.ndarray:
    """Apply ``mats[k]`` on every mode ``k`` (``None`` entries and ``skip`` are left alone)."""
    for k, a in enumerate(mats):
        if a is None or k == skip:
            continue
        x = mode_product(x, a.T if transpose else a, k)
    return x


def kron_all(mats) -> np.ndarray:
    """``Kronecker(A_K, ..., A_1)`` for ``mats = [A_1, ..., A_K]``."""
    return reduce(lambda acc, a: np.kron(a, acc), mats[1:], np.asarray(mats[0], dtype=np.float64))


def outer_product(x, y) -> np.ndarray:
    """Tensor product, order ``K_x + K_y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.multiply.outer(x, y)


# -- time series of tensors ------------------------------------------------


@dataclass(frozen=True)
class TensorSeries:
    """``T`` equal-shape tensors stacked on a leading time axis.

    ``data`` has shape ``(T, d_1, ..., d_K)``; ``mask`` (same shape, bool)
    marks observed cells when the series came with missing values, which
    are stored as zeros.
    """

    data: np.ndarray
    mask: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim < 2:
            raise DimensionError("a series needs a time axis and at least one mode")
        if data.shape[0] < 1:
            raise DimensionError("a series needs at least one time point")
        if data.ndim - 1 > MAX_ORDER:
            raise DimensionError(f"tensors of order > {MAX_ORDER} are not supported")
        object.__setattr__(self, "data", data)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != data.shape:
                raise DimensionError("mask shape differs from data shape")
            object.__setattr__(self, "mask", mask)

    @property
    def shape(self) -> tuple:
        return self.data.shape[1:]

    @property
    def order(self) -> int:
        return self.data.ndim - 1

    @property
    def T(self) -> int:
        return self.data.shape[0]

    def __len__(self):
        return self.T

    def __getitem__(self, t):
        return self.data[t]

    def filled(self) -> np.ndarray:
        """Data with unobserved cells set to zero."""
        if self.mask is None:
            return self.data
        return np.where(self.mask, self.data, 0.0)

    def stacked(self) -> np.ndarray:
        """The order-(K+1) tensor with time as the last mode."""
        return np.moveaxis(self.data, 0, -1)


def as_series(x) -> TensorSeries:
    if isinstance(x, TensorSeries):
        return x
    return TensorSeries(np.asarray(x, dtype=np.float64))


def unfold_series(data: np.ndarray, mode: int) -> np.ndarray:
    """Unfold every slice of a ``(T, d_1, ..., d_K)`` array; result ``(T, d_k, d_-k)``.

    Columns follow the same ordering as :func:`unfold`.
    """
    data = np.asarray(data, dtype=np.float64)
    K = data.ndim - 1
    mode = _check_mode(K, mode)
    others = [j + 1 for j in range(K) if j != mode]
    # C-order reshape runs the last axis fastest, so list the other modes in reverse
    perm = [0, mode + 1] + others[::-1]
    T, dk = data.shape[0], data.shape[mode + 1]
    return np.ascontiguousarray(data.transpose(perm)).reshape(T, dk, -1)
