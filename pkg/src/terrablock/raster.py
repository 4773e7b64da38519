"""Single-band regular grids and ESRI ASCII grid I/O.

Conventions used throughout the package:

- ``values`` is a 2-D float64 array indexed ``[row, col]``.
- Row 0 is the *southernmost* row; y grows with the row index.  ESRI ASCII
  stores the northernmost row first, so parsing flips the row order and
  writing flips it back.
- Nodata cells are ``NaN`` in memory.  The ``nodata`` attribute only records
  the sentinel used when the grid is serialized.
- ``(xllcorner, yllcorner)`` is the outer corner of cell ``(0, 0)``, not its
  center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DEFAULT_NODATA = -9999.0

_HEADER_INT_KEYS = ("ncols", "nrows")
_HEADER_FLOAT_KEYS = ("xllcorner", "yllcorner", "cellsize")
_HEADER_KEYS = _HEADER_INT_KEYS + _HEADER_FLOAT_KEYS + ("nodata_value",)


class GridFormatError(ValueError):
    """Raised for malformed ESRI ASCII content.  ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CellIndex(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True, eq=False)
class Grid:
    """A regular single-band grid with square cells.

    ``nodata`` is the serialization sentinel; in-memory missing cells are NaN.
    """

    values: np.ndarray
    xllcorner: float
    yllcorner: float
    cell_size: float
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"grid values must be 2-D and non-empty, got shape {arr.shape}")
        if not (self.cell_size > 0):
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if math.isnan(self.nodata) or math.isinf(self.nodata):
            raise ValueError("nodata sentinel must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and self.xllcorner == other.xllcorner
            and self.yllcorner == other.yllcorner
            and self.cell_size == other.cell_size
            and self.nodata == other.nodata
            and bool(np.array_equal(self.values, other.values, equal_nan=True))
        )

    def congruent(self, other: "Grid") -> bool:
        """True when both grids share shape, origin, and cell size."""
        return (
            self.values.shape == other.values.shape
            and self.xllcorner == other.xllcorner
            and self.yllcorner == other.yllcorner
            and self.cell_size == other.cell_size
        )

    def with_values(self, values: np.ndarray, nodata: float | None = None) -> "Grid":
        """A grid with the same geometry but different values."""
        return Grid(
            values=values,
            xllcorner=self.xllcorner,
            yllcorner=self.yllcorner,
            cell_size=self.cell_size,
            nodata=self.nodata if nodata is None else nodata,
        )

    def cell_center(self, index: CellIndex | tuple[int, int]) -> tuple[float, float]:
        """Map coordinates of the center of cell ``(row, col)``."""
        row, col = index
        if not (0 <= row < self.nrows and 0 <= col < self.ncols):
            raise IndexError(f"cell ({row}, {col}) outside grid of shape {self.values.shape}")
        x = self.xllcorner + (col + 0.5) * self.cell_size
        y = self.yllcorner + (row + 0.5) * self.cell_size
        return (x, y)

    def x_centers(self) -> np.ndarray:
        return self.xllcorner + (np.arange(self.ncols) + 0.5) * self.cell_size

    def y_centers(self) -> np.ndarray:
        return self.yllcorner + (np.arange(self.nrows) + 0.5) * self.cell_size


def _format_value(v: float) -> str:
    # repr() of a float is the shortest string that round-trips exactly.
    return repr(float(v))


def parse_ascii_grid(text: str) -> Grid:
    """Parse ESRI ASCII grid text.

    Header keys are matched case-insensitively and the NODATA_value line is
    optional (default -9999).  Every malformed line is reported with its
    1-based line number.
    """
    lines = text.splitlines()
    header: dict[str, float] = {}
    data_start = None

    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            if header:
                continue
            raise GridFormatError(lineno, "blank line before header")
        first = stripped.split()[0]
        if not first[0].isalpha():
            data_start = lineno
            break
        parts = stripped.split()
        if len(parts) != 2:
            raise GridFormatError(lineno, f"malformed header line {stripped!r}")
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            raise GridFormatError(lineno, f"unknown header key {parts[0]!r}")
        if key in header:
            raise GridFormatError(lineno, f"duplicate header key {parts[0]!r}")
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise GridFormatError(lineno, f"non-numeric value for {parts[0]!r}: {parts[1]!r}") from None
    else:
        data_start = len(lines) + 1

    for key in _HEADER_INT_KEYS + _HEADER_FLOAT_KEYS:
        if key not in header:
            raise GridFormatError(data_start or 1, f"missing header key {key!r}")

    for key in _HEADER_INT_KEYS:
        if header[key] != int(header[key]) or header[key] < 1:
            raise GridFormatError(1, f"{key} must be a positive integer, got {header[key]}")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if not header["cellsize"] > 0:
        raise GridFormatError(1, f"cellsize must be positive, got {header['cellsize']}")
    nodata = header.get("nodata_value", DEFAULT_NODATA)

    rows: list[np.ndarray] = []
    row_lines = [
        (lineno, raw.strip())
        for lineno, raw in enumerate(lines[data_start - 1 :] if data_start else [], start=data_start or 1)
        if raw.strip()
    ]
    if len(row_lines) != nrows:
        where = row_lines[-1][0] if row_lines else (data_start or len(lines) + 1)
        raise GridFormatError(where, f"expected {nrows} data rows, found {len(row_lines)}")
    for lineno, stripped in row_lines:
        tokens = stripped.split()
        if len(tokens) != ncols:
            raise GridFormatError(lineno, f"expected {ncols} values, found {len(tokens)}")
        try:
            row = np.array([float(t) for t in tokens], dtype=np.float64)
        except ValueError:
            bad = next(t for t in tokens if not _is_number(t))
            raise GridFormatError(lineno, f"non-numeric cell value {bad!r}") from None
        rows.append(row)

    values = np.vstack(rows)[::-1]  # file stores the northernmost row first
    values[values == nodata] = np.nan
    return Grid(
        values=values,
        xllcorner=header["xllcorner"],
        yllcorner=header["yllcorner"],
        cell_size=header["cellsize"],
        nodata=nodata,
    )


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def write_ascii_grid(grid: Grid) -> str:
    """Serialize a grid to ESRI ASCII text.

    Values are written with repr-of-float precision so that
    ``parse_ascii_grid(write_ascii_grid(g)) == g`` holds bit for bit.
    """
    out = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcorner {_format_value(grid.xllcorner)}",
        f"yllcorner {_format_value(grid.yllcorner)}",
        f"cellsize {_format_value(grid.cell_size)}",
        f"NODATA_value {_format_value(grid.nodata)}",
    ]
    sentinel = _format_value(grid.nodata)
    for row in grid.values[::-1]:
        out.append(" ".join(sentinel if math.isnan(v) else _format_value(v) for v in row))
    return "\n".join(out) + "\n"


def resample_block_mean(grid: Grid, factor: int) -> Grid:
    """Downsample by averaging ``factor`` x ``factor`` blocks of cells.

    Nodata cells are left out of each block's mean; a block with no valid
    cells stays nodata.  Edge blocks may be partial and average whatever
    cells they cover.  ``factor=1`` returns an identical copy.
    """
    if not isinstance(factor, int) or isinstance(factor, bool) or factor < 1:
        raise ValueError(f"resample factor must be an integer >= 1, got {factor!r}")
    if factor == 1:
        return Grid(grid.values.copy(), grid.xllcorner, grid.yllcorner, grid.cell_size, grid.nodata)

    nrows_out = -(-grid.nrows // factor)
    ncols_out = -(-grid.ncols // factor)
    padded = np.full((nrows_out * factor, ncols_out * factor), np.nan)
    padded[: grid.nrows, : grid.ncols] = grid.values

    blocks = padded.reshape(nrows_out, factor, ncols_out, factor)
    valid = ~np.isnan(blocks)
    counts = valid.sum(axis=(1, 3))
    sums = np.where(valid, blocks, 0.0).sum(axis=(1, 3))
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    return Grid(
        values=means,
        xllcorner=grid.xllcorner,
        yllcorner=grid.yllcorner,
        cell_size=grid.cell_size * factor,
        nodata=grid.nodata,
    )
