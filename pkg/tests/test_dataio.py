import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorfactor.dataio import (
    HEADER,
    load_binary,
    load_long_csv,
    load_series,
    read_table,
    save_binary,
    save_long_csv,
    save_series,
    write_table,
)
from tensorfactor.errors import IngestionError
from tensorfactor.tensor import TensorSeries


def write(path, text):
    path.write_text(text)
    return path


def test_long_csv_example(tmp_path):
    p = write(tmp_path / "a.csv", "# tfts K=1 dims=2\nt,i1,value\n1,1,5.0\n1,2,7.0\n")
    s = load_long_csv(p)
    np.testing.assert_array_equal(s.data, [[5.0, 7.0]])
    assert s.mask is None


def test_long_csv_missing_cells_masked(tmp_path):
    p = write(tmp_path / "a.csv", "# tfts K=2 dims=2,2 T=2\n1,1,1,1.5\n2,2,2,-3\n")
    s = load_long_csv(p)
    assert s.T == 2 and s.data[0, 0, 0] == 1.5 and s.data[1, 1, 1] == -3
    assert s.mask.sum() == 2 and s.data[0, 1, 1] == 0


def test_long_csv_index_out_of_range(tmp_path):
    p = write(tmp_path / "a.csv", "# tfts K=2 dims=2,3\nt,i1,i2,value\n1,1,1,0.5\n1,3,1,0.5\n")
    with pytest.raises(IngestionError, match="row 4"):
        load_long_csv(p)


def test_long_csv_other_errors(tmp_path):
    with pytest.raises(IngestionError, match="row 1"):
        load_long_csv(write(tmp_path / "a.csv", "t,i1,value\n1,1,2\n"))
    with pytest.raises(IngestionError, match="row 3"):
        load_long_csv(write(tmp_path / "b.csv", "# tfts K=1 dims=2\nt,i1,value\n1,1\n"))
    with pytest.raises(IngestionError, match="row 2"):
        load_long_csv(write(tmp_path / "c.csv", "# tfts K=1 dims=2\n1,1,abc\n"))
    with pytest.raises(IngestionError, match="row 2"):
        load_long_csv(write(tmp_path / "d.csv", "# tfts K=1 dims=2 T=1\n2,1,1\n"))


def test_duplicate_cell_last_wins(tmp_path):
    p = write(tmp_path / "a.csv", "# tfts K=1 dims=1\n1,1,1.0\n1,1,2.0\n")
    with pytest.warns(UserWarning, match="duplicate"):
        s = load_long_csv(p)
    assert s.data[0, 0] == 2.0


def test_binary_header_layout(tmp_path, rng):
    s = TensorSeries(rng.standard_normal((3, 2, 4)))
    save_binary(tmp_path / "x.tfts", s)
    raw = (tmp_path / "x.tfts").read_bytes()
    assert raw[:4] == b"TFTS" and HEADER.size == 72
    assert len(raw) == 72 + 8 * 24
    # slice 0 stored first-index-fastest
    np.testing.assert_array_equal(np.frombuffer(raw[72 : 72 + 64], "<f8"), s.data[0].ravel(order="F"))


def test_binary_errors(tmp_path, rng):
    with pytest.raises(IngestionError):
        load_binary(write(tmp_path / "short", "TF"))
    save_binary(tmp_path / "x.tfts", TensorSeries(rng.standard_normal((2, 2))))
    raw = bytearray((tmp_path / "x.tfts").read_bytes())
    (tmp_path / "y.tfts").write_bytes(bytes(raw[:-8]))
    with pytest.raises(IngestionError, match="payload"):
        load_binary(tmp_path / "y.tfts")
    raw[:4] = b"XXXX"
    (tmp_path / "z.tfts").write_bytes(bytes(raw))
    with pytest.raises(IngestionError, match="magic"):
        load_binary(tmp_path / "z.tfts")


def test_format_dispatch(tmp_path, rng):
    s = TensorSeries(rng.standard_normal((2, 3)))
    save_series(tmp_path / "a.csv", s)
    save_series(tmp_path / "a.bin", s)
    np.testing.assert_array_equal(load_series(tmp_path / "a.csv").data, s.data)
    np.testing.assert_array_equal(load_series(tmp_path / "a.bin").data, s.data)
    with pytest.raises(ValueError):
        load_series(tmp_path / "a.csv", "parquet")


def test_table_round_trip(tmp_path):
    rows = [dict(a=1, b=0.5, c="ok"), dict(a=2, b=1e-300, c="error: x")]
    write_table(tmp_path / "t.csv", rows, ("a", "b", "c"))
    assert read_table(tmp_path / "t.csv") == rows


shapes = st.lists(st.integers(1, 3), min_size=1, max_size=3).map(tuple)


@given(st.integers(1, 4), shapes, st.integers(0, 2**31), st.booleans())
def test_binary_round_trip_bit_identical(T, dims, seed, masked):
    import tempfile, os

    rng = np.random.default_rng(seed)
    data = rng.standard_normal((T,) + dims)
    mask = rng.random((T,) + dims) > 0.3 if masked else None
    s = TensorSeries(data, mask)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.tfts")
        save_binary(path, s)
        back = load_binary(path)
    assert back.data.tobytes() == s.data.tobytes()
    if masked:
        np.testing.assert_array_equal(back.mask, mask)
    else:
        assert back.mask is None


@given(st.integers(1, 3), shapes, st.integers(0, 2**31))
def test_long_csv_round_trip(T, dims, seed):
    import tempfile, os

    data = np.random.default_rng(seed).standard_normal((T,) + dims)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.csv")
        save_long_csv(path, TensorSeries(data))
        back = load_long_csv(path)
    assert back.data.tobytes() == data.tobytes()
