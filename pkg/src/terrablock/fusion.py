"""Soil map-unit ingestion and the fused per-cell analysis table.

Soil layers arrive as GeoJSON FeatureCollections of attributed polygons.
Cells pick up attributes by point-in-polygon on their centers (first matching
map unit wins), terrain and interpolated yield grids join by cell index, and
the result is a flat table with one row per cell inside the field boundary.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

from .raster import Grid
from .terrain import TerrainDerivatives

Ring = list[tuple[float, float]]

_FIXED_COLUMNS = ("row", "col", "x", "y", "elevation", "slope", "aspect")


class SoilLayerError(ValueError):
    """Raised for soil/boundary GeoJSON that violates the format contract."""


@dataclass(frozen=True)
class AttributeSchema:
    """Declares the soil attribute keys, their types, and which are mandatory."""

    mandatory: tuple[str, ...]
    types: Mapping[str, str]  # key -> "string" | "number"

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(self.types)


def default_schema() -> AttributeSchema:
    raw = json.loads(resources.files("terrablock.schemas").joinpath("soil_attributes.json").read_text())
    return AttributeSchema(mandatory=tuple(raw["mandatory"]), types=dict(raw["keys"]))


@dataclass(frozen=True)
class MapUnit:
    rings: tuple[tuple[tuple[float, float], ...], ...]
    attributes: Mapping[str, object]
    bbox: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax


@dataclass
class SoilAttributeLayer:
    map_units: list[MapUnit]
    schema: AttributeSchema
    warnings: list[str] = field(default_factory=list)


def _ring_area(ring: Sequence[tuple[float, float]]) -> float:
    total = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return 0.5 * total


def _normalize_ring(coords, where: str) -> tuple[tuple[float, float], ...]:
    try:
        ring = [(float(x), float(y)) for x, y, *_ in coords]
    except (TypeError, ValueError):
        raise SoilLayerError(f"{where}: ring coordinates must be [x, y] numbers") from None
    if len(ring) >= 2 and ring[0] == ring[-1]:
        ring = ring[:-1]  # drop the GeoJSON closing vertex
    if len(ring) < 3:
        raise SoilLayerError(f"{where}: degenerate ring with fewer than 3 distinct vertices")
    if _ring_area(ring) == 0.0:
        raise SoilLayerError(f"{where}: degenerate ring with zero area")
    return tuple(ring)


def _geometry_rings(geometry, where: str) -> list[tuple[tuple[float, float], ...]]:
    """Rings of a Polygon/MultiPolygon geometry; holes kept for even-odd tests."""
    if not isinstance(geometry, dict):
        raise SoilLayerError(f"{where}: missing geometry")
    gtype = geometry.get("type")
    coords = geometry.get("coordinates")
    if gtype == "Polygon":
        polys = [coords]
    elif gtype == "MultiPolygon":
        polys = coords
    else:
        raise SoilLayerError(f"{where}: non-polygon feature of type {gtype!r}")
    if not isinstance(polys, list) or not polys:
        raise SoilLayerError(f"{where}: empty coordinates")
    rings = []
    for poly in polys:
        if not isinstance(poly, list) or not poly:
            raise SoilLayerError(f"{where}: empty polygon")
        for ring in poly:
            rings.append(_normalize_ring(ring, where))
    return rings


def _validate_attributes(
    props, schema: AttributeSchema, where: str, warnings: list[str]
) -> dict[str, object]:
    if props is None:
        props = {}
    if not isinstance(props, dict):
        raise SoilLayerError(f"{where}: properties must be an object")
    out: dict[str, object] = {}
    for key, value in props.items():
        declared = schema.types.get(key)
        if declared is None:
            warnings.append(f"{where}: unknown attribute key {key!r} preserved unvalidated")
            out[key] = value
            continue
        if value is None:
            out[key] = None
        elif declared == "string":
            if not isinstance(value, str):
                raise SoilLayerError(f"{where}: attribute {key!r} must be a string, got {value!r}")
            out[key] = value
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SoilLayerError(f"{where}: attribute {key!r} must be a number, got {value!r}")
            out[key] = float(value)
    for key in schema.mandatory:
        if out.get(key) is None:
            raise SoilLayerError(f"{where}: missing mandatory attribute {key!r}")
    return out


def parse_soil_layer(text: str, schema: AttributeSchema | None = None) -> SoilAttributeLayer:
    """Parse a GeoJSON FeatureCollection of attributed soil polygons."""
    schema = schema or default_schema()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SoilLayerError(f"invalid GeoJSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise SoilLayerError("soil layer must be a GeoJSON FeatureCollection")
    features = doc.get("features")
    if not isinstance(features, list):
        raise SoilLayerError("FeatureCollection has no features array")

    warnings: list[str] = []
    units: list[MapUnit] = []
    for i, feat in enumerate(features):
        where = f"feature {i}"
        if not isinstance(feat, dict) or feat.get("type") != "Feature":
            raise SoilLayerError(f"{where}: not a GeoJSON Feature")
        rings = _geometry_rings(feat.get("geometry"), where)
        attrs = _validate_attributes(feat.get("properties"), schema, where, warnings)
        xs = [x for ring in rings for x, _ in ring]
        ys = [y for ring in rings for _, y in ring]
        units.append(
            MapUnit(
                rings=tuple(rings),
                attributes=attrs,
                bbox=(min(xs), min(ys), max(xs), max(ys)),
            )
        )
    return SoilAttributeLayer(map_units=units, schema=schema, warnings=warnings)


def parse_boundary(text: str) -> list[tuple[tuple[float, float], ...]]:
    """Boundary rings from a Polygon/MultiPolygon geometry, Feature, or
    single-feature FeatureCollection."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SoilLayerError(f"invalid GeoJSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SoilLayerError("boundary must be a GeoJSON object")
    if doc.get("type") == "FeatureCollection":
        features = doc.get("features")
        if not isinstance(features, list) or len(features) != 1:
            raise SoilLayerError("boundary FeatureCollection must contain exactly one feature")
        doc = features[0]
    if doc.get("type") == "Feature":
        doc = doc.get("geometry")
    return _geometry_rings(doc, "boundary")


# ---------------------------------------------------------------------------
# Point-in-polygon


def _on_segment(px, py, x1, y1, x2, y2) -> bool:
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    if cross != 0.0:
        return False
    return min(x1, x2) <= px <= max(x1, x2) and min(y1, y2) <= py <= max(y1, y2)


def point_in_polygon(point: tuple[float, float], rings: Sequence[Sequence[tuple[float, float]]]) -> bool:
    """Even-odd containment over all rings; boundary points count as inside."""
    px, py = point
    inside = False
    for ring in rings:
        n = len(ring)
        if n < 3:
            raise ValueError("degenerate ring with fewer than 3 vertices")
        for i in range(n):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % n]
            if _on_segment(px, py, x1, y1, x2, y2):
                return True
            # half-open vertical rule: count edges crossing the +x ray
            if (y1 > py) != (y2 > py):
                xi = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                if px < xi:
                    inside = not inside
    return inside


def assign_soil_attributes(grid: Grid, layer: SoilAttributeLayer) -> list[list[Mapping[str, object] | None]]:
    """First containing map unit's attributes per cell center; None when uncovered."""
    xs = grid.x_centers()
    ys = grid.y_centers()
    out: list[list[Mapping[str, object] | None]] = []
    for r in range(grid.nrows):
        y = ys[r]
        row: list[Mapping[str, object] | None] = []
        for c in range(grid.ncols):
            x = xs[c]
            found = None
            for unit in layer.map_units:
                bx0, by0, bx1, by1 = unit.bbox
                if not (bx0 <= x <= bx1 and by0 <= y <= by1):
                    continue
                if point_in_polygon((x, y), unit.rings):
                    found = unit.attributes
                    break
            row.append(found)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# Fused table


@dataclass(frozen=True)
class FusedRow:
    row: int
    col: int
    x: float
    y: float
    elevation: float | None
    slope: float | None
    aspect: float | None
    soil: Mapping[str, object]
    yields: Mapping[str, float | None]


@dataclass
class FusedCellTable:
    rows: list[FusedRow]
    soil_keys: tuple[str, ...]
    seasons: tuple[str, ...]
    # grid geometry when built from grids; a table re-read from CSV has None
    # here and consumers fall back to inferring the cell size from spacing
    cell_size: float | None = None
    x_origin: float | None = None
    y_origin: float | None = None

    def column_names(self) -> list[str]:
        return list(_FIXED_COLUMNS) + list(self.soil_keys) + [f"yield_{s}" for s in self.seasons]

    def feature_values(self, name: str) -> list[object]:
        """Per-row values for a fixed column or a soil attribute key."""
        if name in ("elevation", "slope", "aspect"):
            return [getattr(r, name) for r in self.rows]
        if name in self.soil_keys:
            return [r.soil.get(name) for r in self.rows]
        raise KeyError(f"no such feature column {name!r}")


def _optional(v: float) -> float | None:
    return None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)


def build_fused_table(
    dem: Grid,
    deriv: TerrainDerivatives,
    soil_cells: Sequence[Sequence[Mapping[str, object] | None]],
    yields: Sequence[tuple[str, Grid]],
    boundary: Sequence[Sequence[tuple[float, float]]],
    soil_keys: Sequence[str] | None = None,
) -> FusedCellTable:
    """Join all layers into one row per cell whose center is inside the boundary."""
    for name, g in (("slope", deriv.slope), ("aspect", deriv.aspect)):
        if not dem.congruent(g):
            raise ValueError(f"{name} grid is not congruent with the elevation grid")
    for season, g in yields:
        if not dem.congruent(g):
            raise ValueError(f"yield grid for season {season!r} is not congruent with the elevation grid")
    if len(soil_cells) != dem.nrows or any(len(r) != dem.ncols for r in soil_cells):
        raise ValueError("soil attribute map does not match grid dimensions")
    seasons = [s for s, _ in yields]
    if len(set(seasons)) != len(seasons):
        raise ValueError(f"duplicate season labels: {seasons}")

    if soil_keys is None:
        declared = default_schema().keys
        extras = sorted(
            {k for row in soil_cells for cell in row if cell for k in cell} - set(declared)
        )
        soil_keys = tuple(declared) + tuple(extras)

    rows: list[FusedRow] = []
    xs = dem.x_centers()
    ys = dem.y_centers()
    for r in range(dem.nrows):
        for c in range(dem.ncols):
            x, y = float(xs[c]), float(ys[r])
            if not point_in_polygon((x, y), boundary):
                continue
            attrs = soil_cells[r][c]
            soil = {k: (attrs.get(k) if attrs else None) for k in soil_keys}
            rows.append(
                FusedRow(
                    row=r,
                    col=c,
                    x=x,
                    y=y,
                    elevation=_optional(dem.values[r, c]),
                    slope=_optional(deriv.slope.values[r, c]),
                    aspect=_optional(deriv.aspect.values[r, c]),
                    soil=soil,
                    yields={s: _optional(g.values[r, c]) for s, g in yields},
                )
            )
    return FusedCellTable(
        rows=rows,
        soil_keys=tuple(soil_keys),
        seasons=tuple(seasons),
        cell_size=dem.cell_size,
        x_origin=dem.xllcorner,
        y_origin=dem.yllcorner,
    )


def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_to_csv(table: FusedCellTable) -> str:
    """Serialize with a fixed, documented column order; floats round-trip exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.column_names())
    for row in table.rows:
        record = [row.row, row.col, repr(row.x), repr(row.y)]
        record += [_cell_text(getattr(row, f)) for f in ("elevation", "slope", "aspect")]
        record += [_cell_text(row.soil.get(k)) for k in table.soil_keys]
        record += [_cell_text(row.yields.get(s)) for s in table.seasons]
        writer.writerow(record)
    return buf.getvalue()


def table_from_csv(text: str, schema: AttributeSchema | None = None) -> FusedCellTable:
    """Inverse of table_to_csv.

    Soil columns use the schema's declared types; columns the schema does not
    declare fall back to float-then-string sniffing.
    """
    schema = schema or default_schema()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty fused table") from None
    if tuple(header[: len(_FIXED_COLUMNS)]) != _FIXED_COLUMNS:
        raise ValueError(f"fused table must start with columns {','.join(_FIXED_COLUMNS)}")
    tail = header[len(_FIXED_COLUMNS) :]
    soil_keys = [c for c in tail if not c.startswith("yield_")]
    seasons = [c[len("yield_") :] for c in tail if c.startswith("yield_")]
    if tail != soil_keys + [f"yield_{s}" for s in seasons]:
        raise ValueError("yield columns must come after all soil attribute columns")

    def parse_soil(key: str, raw: str):
        if raw == "":
            return None
        declared = schema.types.get(key)
        if declared == "number":
            return float(raw)
        if declared == "string":
            return raw
        try:
            return float(raw)
        except ValueError:
            return raw

    rows = []
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, found {len(record)}")
        r, c = int(record[0]), int(record[1])
        x, y = float(record[2]), float(record[3])
        elev, slope, aspect = (float(t) if t else None for t in record[4:7])
        soil_vals = record[7 : 7 + len(soil_keys)]
        yield_vals = record[7 + len(soil_keys) :]
        rows.append(
            FusedRow(
                row=r,
                col=c,
                x=x,
                y=y,
                elevation=elev,
                slope=slope,
                aspect=aspect,
                soil={k: parse_soil(k, v) for k, v in zip(soil_keys, soil_vals)},
                yields={s: (float(v) if v else None) for s, v in zip(seasons, yield_vals)},
            )
        )
    return FusedCellTable(rows=rows, soil_keys=tuple(soil_keys), seasons=tuple(seasons))
