"""One code path from raw layer files to a fused cell table.

Both the command line and the HTTP service call into this module, which is
what makes their outputs byte-identical: there is no second implementation
of the fuse step anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fusion import (
    FusedCellTable,
    SoilAttributeLayer,
    assign_soil_attributes,
    build_fused_table,
)
from .interpolation import YieldPointSet, interpolate_grid
from .raster import Grid, resample_block_mean
from .terrain import TerrainDerivatives, derive_all


@dataclass(frozen=True)
class FieldArtifacts:
    """Everything the fuse step produces, at the analysis resolution."""

    dem: Grid
    derivatives: TerrainDerivatives
    yields: tuple[tuple[str, Grid], ...]
    table: FusedCellTable


def build_field_artifacts(
    dem: Grid,
    soil: SoilAttributeLayer,
    boundary: tuple,
    yield_sets: list[YieldPointSet],
    resolution_factor: int = 1,
) -> FieldArtifacts:
    """Resample, derive terrain, join soil, interpolate yields, fuse."""
    if resolution_factor < 1:
        raise ValueError(f"resolution factor must be >= 1, got {resolution_factor}")
    if resolution_factor > 1:
        dem = resample_block_mean(dem, resolution_factor)
    deriv = derive_all(dem)
    soil_cells = assign_soil_attributes(dem, soil)
    seen: set[str] = set()
    for ps in yield_sets:
        if ps.season in seen:
            raise ValueError(f"duplicate season label {ps.season!r} across yield inputs")
        seen.add(ps.season)
    yields = tuple((ps.season, interpolate_grid(ps, dem)) for ps in yield_sets)
    table = build_fused_table(dem, deriv, soil_cells, list(yields), boundary)
    return FieldArtifacts(dem=dem, derivatives=deriv, yields=yields, table=table)


def build_field_table(
    dem: Grid,
    soil: SoilAttributeLayer,
    boundary: tuple,
    yield_sets: list[YieldPointSet],
    resolution_factor: int = 1,
) -> FusedCellTable:
    return build_field_artifacts(dem, soil, boundary, yield_sets, resolution_factor).table
