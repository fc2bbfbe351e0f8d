import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlasov_spray.diagnostics import FunctionalRecord, record_columns
from vlasov_spray.errors import SeriesFormatError
from vlasov_spray.series import TimeSeries, read_series, write_series


def make_series(n, dim, rng):
    s = TimeSeries(meta={"note": "x"}, dim=dim)
    for k in range(n):
        v = rng.normal(size=12 + 2 * dim)
        s.append(FunctionalRecord(k * 0.1 + v[0] * 1e-3, *v[1:3], v[3:3 + dim], v[3 + dim:3 + 2 * dim],
                                  *v[3 + 2 * dim:]))
    return s


@pytest.mark.parametrize("dim", [1, 3])
def test_round_trip_is_bit_identical(tmp_path, dim):
    s = make_series(100, dim, np.random.default_rng(dim))
    path = tmp_path / "s.csv"
    write_series(s, path)
    back = read_series(path)
    assert back.dim == dim and len(back) == 100
    assert all(a.as_row() == b.as_row() for a, b in zip(s.records, back.records))
    assert back.meta["note"] == "x"


def test_empty_series_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    write_series(TimeSeries(dim=1), path, write_meta=False)
    assert path.read_text().splitlines() == [",".join(record_columns(1))]
    assert len(read_series(path)) == 0


@pytest.mark.parametrize("body, row", [
    ("1,2,3\n", 2),
    ("0,1,0,0,0,0,0,0,0,0,0,0,0,x\n", 2),
    ("0,1,0,0,0,0,0,0,0,0,0,0,0,0\n0,1,0,0,0,0,0,0,0,0,0,0,0,0\n", 3),
])
def test_malformed_rows_name_the_row(tmp_path, body, row):
    path = tmp_path / "bad.csv"
    path.write_text(",".join(record_columns(1)) + "\n" + body)
    with pytest.raises(SeriesFormatError, match=f"row {row}"):
        read_series(path)


def test_bad_header_and_empty_file(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(SeriesFormatError, match="row 1"):
        read_series(path)
    path.write_text("")
    with pytest.raises(SeriesFormatError, match="empty"):
        read_series(path)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=13, max_size=13))
def test_any_finite_values_round_trip(tmp_path_factory, values):
    rec = FunctionalRecord(0.0, *values[:2], np.array([values[2]]), np.array([values[3]]), *values[4:])
    s = TimeSeries(records=[rec], dim=1)
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    write_series(s, path, write_meta=False)
    assert read_series(path).records[0].as_row() == rec.as_row()
