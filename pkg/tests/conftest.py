"""Shared synthetic-field builders.

Everything here is deterministic: fixed seeds, fixed geometry.  Tests that
need their own randomness create their own Generator so reordering test
files never shifts anyone's random stream.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from terrablock.raster import Grid, write_ascii_grid


def make_dem(n=20, cell_size=10.0, x0=500000.0, y0=4400000.0, ax=0.5, ay=0.2, base=200.0):
    values = base + np.add.outer(np.arange(n) * ay * cell_size, np.arange(n) * ax * cell_size)
    return Grid(values=values, xllcorner=x0, yllcorner=y0, cell_size=cell_size, nodata=-9999.0)


def square_ring(x0, y0, w, h):
    return [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h], [x0, y0]]


def two_polygon_soil(x0, y0, width, height):
    """West/east split: two map units with distinct soil attributes."""
    half = width / 2
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {
                    "compname": "Chalmers",
                    "drainagecl": "Poorly drained",
                    "texdesc": "Silty clay loam",
                    "pmgroupname": "Till",
                },
                "geometry": {"type": "Polygon", "coordinates": [square_ring(x0, y0, half, height)]},
            },
            {
                "type": "Feature",
                "properties": {
                    "compname": "Brenton",
                    "drainagecl": "Somewhat poorly drained",
                    "texdesc": "Silt loam",
                    "pmgroupname": "Loess",
                },
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [square_ring(x0 + half, y0, half, height)],
                },
            },
        ],
    }


def boundary_geojson(x0, y0, w, h):
    return {"type": "Polygon", "coordinates": [square_ring(x0, y0, w, h)]}


def yield_csv_lines(x0, y0, w, h, nx, ny, value_fn, season=None):
    header = "x,y,yield" + (",season" if season is not None else "")
    lines = [header]
    for i in range(nx):
        for j in range(ny):
            px = x0 + (i + 0.5) * w / nx
            py = y0 + (j + 0.5) * h / ny
            v = value_fn(px, py)
            lines.append(f"{px},{py},{v}" + (f",{season}" if season is not None else ""))
    return "\n".join(lines) + "\n"


@pytest.fixture
def field_files(tmp_path):
    """A small complete field on disk: DEM, soil, boundary, one yield season.

    Yields split west 42 / east 58 bu/ac with sigma 2 noise, matching the
    west/east soil polygons, so the soil features separate cleanly.
    """
    rng = np.random.default_rng(20240117)
    n = 12
    dem = make_dem(n=n, x0=1000.0, y0=2000.0)
    w = n * dem.cell_size
    (tmp_path / "dem.asc").write_text(write_ascii_grid(dem))
    (tmp_path / "soil.geojson").write_text(json.dumps(two_polygon_soil(1000.0, 2000.0, w, w)))
    (tmp_path / "boundary.geojson").write_text(json.dumps(boundary_geojson(1000.0, 2000.0, w, w)))

    def value(px, py):
        base = 42.0 if px < 1000.0 + w / 2 else 58.0
        return base + rng.normal(0.0, 2.0)

    (tmp_path / "y2015.csv").write_text(
        yield_csv_lines(1000.0, 2000.0, w, w, 30, 30, value, season="2015")
    )
    (tmp_path / "config.json").write_text(
        json.dumps({"grouping_features": ["texture", "elevation"], "fwer": 0.01})
    )
    return tmp_path
