"""Series and table persistence.

Long CSV
    A header line ``# tfts K=<K> dims=<d1>,...,<dK> [T=<T>]`` followed by a
    column line and rows ``t, i_1, ..., i_K, value`` with 1-based indices.
    Cells without a row are zero and recorded as missing in the mask.

Dense binary
    A 72-byte little-endian header ``b"TFTS"``, version (u32), K (u32),
    flags (u32), six u64 dims (unused trailing entries 0), T (u64); then
    ``T * d`` float64 values, slice by slice in canonical order. With flag
    bit 0 set, a ``T * d`` uint8 mask (1 = observed) follows in the same
    order.
"""
from __future__ import annotations

import csv
import json
import re
import struct
import warnings
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import IngestionError
from .tensor import MAX_ORDER, TensorSeries

MAGIC = b"TFTS"
VERSION = 1
HEADER = struct.Struct("<4sIII6QQ")
FLAG_MASK = 1

_HEADER_RE = re.compile(r"#\s*tfts\b(?P<body>.*)")


def _canonical(data: np.ndarray) -> np.ndarray:
    """Per-slice canonical order, shape ``(T, d)``."""
    T = data.shape[0]
    return np.stack([s.ravel(order="F") for s in data]) if T else data.reshape(0, -1)


def _from_canonical(flat: np.ndarray, T: int, dims) -> np.ndarray:
    return np.stack([row.reshape(dims, order="F") for row in flat.reshape(T, -1)])


# -- dense binary -------------------------------------------------------------


def save_binary(path, series: TensorSeries) -> None:
    dims = list(series.shape)
    K = len(dims)
    flags = FLAG_MASK if series.mask is not None else 0
    header = HEADER.pack(MAGIC, VERSION, K, flags, *(dims + [0] * (MAX_ORDER - K)), series.T)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_canonical(series.data).astype("<f8").tobytes())
        if flags & FLAG_MASK:
            fh.write(_canonical(series.mask).astype(np.uint8).tobytes())


def load_binary(path) -> TensorSeries:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise IngestionError("file too short for a TFTS header")
    magic, version, K, flags, *rest = HEADER.unpack_from(raw)
    dims, T = rest[:MAX_ORDER], rest[MAX_ORDER]
    if magic != MAGIC:
        raise IngestionError(f"bad magic bytes {magic!r}")
    if version != VERSION:
        raise IngestionError(f"unsupported version {version}")
    if not 1 <= K <= MAX_ORDER:
        raise IngestionError(f"bad order K={K}")
    dims = tuple(int(d) for d in dims[:K])
    d = int(np.prod(dims))
    n = T * d
    body = raw[HEADER.size:]
    expected = 8 * n + (n if flags & FLAG_MASK else 0)
    if len(body) != expected:
        raise IngestionError(f"expected {expected} payload bytes, found {len(body)}")
    data = np.frombuffer(body[: 8 * n], dtype="<f8").astype(np.float64)
    mask = None
    if flags & FLAG_MASK:
        mask = _from_canonical(np.frombuffer(body[8 * n:], dtype=np.uint8).astype(bool), T, dims)
    return TensorSeries(_from_canonical(data, T, dims), mask)


# -- long csv -----------------------------------------------------------------


def _parse_header(line: str):
    m = _HEADER_RE.match(line.strip())
    if not m:
        raise IngestionError("missing '# tfts K=.. dims=..' header", row=1)
    fields = dict(kv.split("=", 1) for kv in m.group("body").split() if "=" in kv)
    try:
        K = int(fields["K"])
        dims = tuple(int(v) for v in fields["dims"].replace("x", ",").split(","))
        T = int(fields["T"]) if "T" in fields else None
    except (KeyError, ValueError) as exc:
        raise IngestionError(f"malformed header: {exc}", row=1) from None
    if len(dims) != K or any(dv < 1 for dv in dims):
        raise IngestionError(f"header declares K={K} but dims {dims}", row=1)
    return K, dims, T


def load_long_csv(path) -> TensorSeries:
    """Read the long format; absent cells are zero-filled and masked out."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise IngestionError("empty file")
    K, dims, T_decl = _parse_header(lines[0])
    cells = {}
    t_max = 0
    for rowno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or not "".join(row).strip():
            continue
        if rowno == 2 and not _is_number(row[0]):
            continue  # column names
        if len(row) != K + 2:
            raise IngestionError(f"expected {K + 2} fields, got {len(row)}", row=rowno)
        try:
            t = int(row[0])
            idx = tuple(int(v) for v in row[1 : K + 1])
            value = float(row[K + 1])
        except ValueError:
            raise IngestionError("non-numeric field", row=rowno) from None
        if t < 1 or (T_decl is not None and t > T_decl):
            raise IngestionError(f"time index {t} out of range", row=rowno)
        for k, (i, dk) in enumerate(zip(idx, dims)):
            if not 1 <= i <= dk:
                raise IngestionError(f"index i_{k + 1}={i} outside 1..{dk}", row=rowno)
        key = (t - 1,) + tuple(i - 1 for i in idx)
        if key in cells:
            warnings.warn(f"row {rowno}: duplicate cell {row[: K + 1]}, keeping the last value")
        cells[key] = value
        t_max = max(t_max, t)
    T = T_decl if T_decl is not None else t_max
    if T < 1:
        raise IngestionError("no data rows")
    data = np.zeros((T,) + dims)
    mask = np.zeros((T,) + dims, dtype=bool)
    for key, value in cells.items():
        data[key] = value
        mask[key] = True
    return TensorSeries(data, None if mask.all() else mask)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def save_long_csv(path, series: TensorSeries) -> None:
    K = series.order
    with open(path, "w", newline="") as fh:
        fh.write(f"# tfts K={K} dims={','.join(map(str, series.shape))} T={series.T}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"i{k + 1}" for k in range(K)] + ["value"])
        for t in range(series.T):
            for idx in np.ndindex(*series.shape[::-1]):
                idx = idx[::-1]
                if series.mask is not None and not series.mask[(t,) + idx]:
                    continue
                w.writerow([t + 1] + [i + 1 for i in idx] + [repr(float(series.data[(t,) + idx]))])


FORMATS = {"long-csv": (load_long_csv, save_long_csv), "dense-binary": (load_binary, save_binary)}


def guess_format(path) -> str:
    return "long-csv" if str(path).endswith(".csv") else "dense-binary"


def load_series(path, fmt: Optional[str] = None) -> TensorSeries:
    fmt = fmt or guess_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {sorted(FORMATS)}")
    return FORMATS[fmt][0](path)


def save_series(path, series: TensorSeries, fmt: Optional[str] = None) -> None:
    fmt = fmt or guess_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {sorted(FORMATS)}")
    FORMATS[fmt][1](path, series)


# -- tables and matrices ------------------------------------------------------


def write_table(path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def read_table(path) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: _convert(v) for k, v in row.items()} for row in rows]


def _convert(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except (TypeError, ValueError):
            pass
    return v


def save_matrix(path, m) -> None:
    np.savetxt(path, np.atleast_2d(np.asarray(m, dtype=np.float64)), delimiter=",", fmt="%.17g")


def load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
