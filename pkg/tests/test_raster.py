"""ASCII grid I/O: header handling, orientation, nodata, round trips."""

import math

import numpy as np
import pytest

from terrablock.raster import (
    Grid,
    GridFormatError,
    parse_ascii_grid,
    resample_block_mean,
    write_ascii_grid,
)

SMALL = """\
ncols 3
nrows 2
xllcorner 100.0
yllcorner 200.0
cellsize 5.0
NODATA_value -9999
1 2 3
4 -9999 6
"""


def test_parse_small_grid():
    g = parse_ascii_grid(SMALL)
    assert g.ncols == 3 and g.nrows == 2
    assert g.xllcorner == 100.0 and g.yllcorner == 200.0
    assert g.cell_size == 5.0
    # file rows are north-first; internal row 0 is the southern row
    assert g.values[0].tolist() == [4.0, pytest.approx(float("nan"), nan_ok=True), 6.0]
    assert np.isnan(g.values[0, 1])
    assert g.values[1].tolist() == [1.0, 2.0, 3.0]


def test_header_keys_case_insensitive():
    text = SMALL.replace("ncols", "NCOLS").replace("cellsize", "CELLSIZE")
    g = parse_ascii_grid(text)
    assert g.ncols == 3


def test_nodata_header_optional_defaults_to_minus_9999():
    lines = SMALL.splitlines()
    del lines[5]  # NODATA_value
    g = parse_ascii_grid("\n".join(lines) + "\n")
    assert np.isnan(g.values[0, 1])


def test_header_whitespace_tolerant():
    text = "ncols\t3\nnrows   2\n xllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5 6\n"
    g = parse_ascii_grid(text)
    assert g.values[1].tolist() == [1.0, 2.0, 3.0]


class TestHeaderErrors:
    def test_missing_required_key(self):
        text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\n1 2\n3 4\n"
        with pytest.raises(GridFormatError, match="cellsize"):
            parse_ascii_grid(text)

    def test_duplicate_key_reports_line(self):
        text = "ncols 2\nncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n"
        with pytest.raises(GridFormatError, match="line 2"):
            parse_ascii_grid(text)

    def test_non_numeric_value_reports_line(self):
        text = "ncols 2\nnrows two\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n"
        with pytest.raises(GridFormatError) as err:
            parse_ascii_grid(text)
        assert err.value.line == 2

    def test_nonpositive_cellsize(self):
        text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0\n1 2\n3 4\n"
        with pytest.raises(GridFormatError, match="cellsize"):
            parse_ascii_grid(text)

    def test_unknown_header_key(self):
        text = "ncols 2\nnrows 2\nfoo 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n"
        with pytest.raises(GridFormatError, match="line 3"):
            parse_ascii_grid(text)


class TestDataErrors:
    def test_short_row_reports_line(self):
        text = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5\n"
        with pytest.raises(GridFormatError) as err:
            parse_ascii_grid(text)
        assert err.value.line == 7

    def test_long_row_rejected(self):
        text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n"
        with pytest.raises(GridFormatError, match="line 6"):
            parse_ascii_grid(text)

    def test_missing_rows(self):
        text = "ncols 2\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n"
        with pytest.raises(GridFormatError):
            parse_ascii_grid(text)

    def test_bad_token_reports_line(self):
        text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 x\n"
        with pytest.raises(GridFormatError) as err:
            parse_ascii_grid(text)
        assert err.value.line == 7


def test_write_parse_round_trip_exact():
    rng = np.random.default_rng(42)
    values = rng.normal(1000.0, 50.0, size=(7, 5))
    values[2, 3] = np.nan
    g = Grid(values=values, xllcorner=-17.25, yllcorner=3.5, cell_size=0.5, nodata=-9999.0)
    g2 = parse_ascii_grid(write_ascii_grid(g))
    assert g2 == g  # NaN-aware equality, bit-exact values via repr round trip
    assert np.array_equal(g.values, g2.values, equal_nan=True)


def test_write_is_fixed_point():
    rng = np.random.default_rng(43)
    g = Grid(values=rng.random((4, 6)), xllcorner=0.0, yllcorner=0.0, cell_size=2.0, nodata=-1.0)
    once = write_ascii_grid(g)
    assert write_ascii_grid(parse_ascii_grid(once)) == once


def test_writer_emits_north_first():
    g = Grid(values=np.array([[1.0, 2.0], [3.0, 4.0]]), xllcorner=0, yllcorner=0, cell_size=1.0)
    body = write_ascii_grid(g).splitlines()
    assert body[-2].split() == ["3.0", "4.0"]  # north row (internal row 1) first
    assert body[-1].split() == ["1.0", "2.0"]


def test_cell_center():
    g = Grid(values=np.zeros((4, 4)), xllcorner=100.0, yllcorner=200.0, cell_size=5.0)
    assert g.cell_center((2, 3)) == (117.5, 212.5)
    assert g.cell_center((0, 0)) == (102.5, 202.5)
    with pytest.raises(IndexError):
        g.cell_center((4, 0))
    with pytest.raises(IndexError):
        g.cell_center((0, -1))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(values=np.zeros((0, 3)), xllcorner=0, yllcorner=0, cell_size=1.0)
    with pytest.raises(ValueError):
        Grid(values=np.zeros(4), xllcorner=0, yllcorner=0, cell_size=1.0)
    with pytest.raises(ValueError):
        Grid(values=np.zeros((2, 2)), xllcorner=0, yllcorner=0, cell_size=0.0)


class TestResample:
    def test_exact_blocks(self):
        vals = np.arange(16, dtype=float).reshape(4, 4)
        g = Grid(values=vals, xllcorner=10.0, yllcorner=20.0, cell_size=2.0)
        r = resample_block_mean(g, 2)
        assert r.values.shape == (2, 2)
        assert r.cell_size == 4.0
        assert r.xllcorner == 10.0 and r.yllcorner == 20.0
        # mean of each 2x2 block
        assert r.values[0, 0] == np.mean(vals[0:2, 0:2])
        assert r.values[1, 1] == np.mean(vals[2:4, 2:4])

    def test_ragged_edge_uses_partial_block(self):
        vals = np.arange(15, dtype=float).reshape(3, 5)
        g = Grid(values=vals, xllcorner=0, yllcorner=0, cell_size=1.0)
        r = resample_block_mean(g, 2)
        assert r.values.shape == (2, 3)
        assert r.values[0, 2] == np.mean(vals[0:2, 4:5])
        assert r.values[1, 0] == np.mean(vals[2:3, 0:2])

    def test_nodata_ignored_within_block(self):
        vals = np.array([[1.0, np.nan], [3.0, 5.0]])
        g = Grid(values=vals, xllcorner=0, yllcorner=0, cell_size=1.0)
        r = resample_block_mean(g, 2)
        assert r.values[0, 0] == 3.0

    def test_all_nodata_block_stays_nodata(self):
        vals = np.full((2, 4), np.nan)
        vals[:, 2:] = 7.0
        g = Grid(values=vals, xllcorner=0, yllcorner=0, cell_size=1.0)
        r = resample_block_mean(g, 2)
        assert np.isnan(r.values[0, 0])
        assert r.values[0, 1] == 7.0

    def test_factor_one_is_identity(self):
        g = Grid(values=np.arange(6, dtype=float).reshape(2, 3), xllcorner=0, yllcorner=0, cell_size=1.0)
        assert resample_block_mean(g, 1) == g

    def test_bad_factor(self):
        g = Grid(values=np.zeros((2, 2)), xllcorner=0, yllcorner=0, cell_size=1.0)
        with pytest.raises(ValueError):
            resample_block_mean(g, 0)

    def test_oracle_random_grids(self):
        # independent loop oracle over random shapes and factors
        rng = np.random.default_rng(7)
        for _ in range(25):
            nr, nc = rng.integers(1, 12, size=2)
            f = int(rng.integers(1, 5))
            vals = rng.normal(size=(nr, nc))
            vals[rng.random((nr, nc)) < 0.2] = np.nan
            g = Grid(values=vals, xllcorner=0, yllcorner=0, cell_size=1.5)
            r = resample_block_mean(g, f)
            assert r.values.shape == (math.ceil(nr / f), math.ceil(nc / f))
            for br in range(r.values.shape[0]):
                for bc in range(r.values.shape[1]):
                    block = vals[br * f : (br + 1) * f, bc * f : (bc + 1) * f]
                    finite = block[~np.isnan(block)]
                    if finite.size == 0:
                        assert np.isnan(r.values[br, bc])
                    else:
                        assert r.values[br, bc] == pytest.approx(finite.mean(), rel=1e-12)
