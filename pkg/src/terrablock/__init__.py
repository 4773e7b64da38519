"""Terrain, soil, and yield fusion with statistical blocking for field trials."""

__version__ = "0.1.0"

from .raster import (
    Grid,
    GridFormatError,
    parse_ascii_grid,
    resample_block_mean,
    write_ascii_grid,
)
from .terrain import derive_all
from .fusion import (
    FusedCellTable,
    SoilLayerError,
    parse_boundary,
    parse_soil_layer,
    table_from_csv,
    table_to_csv,
)
from .interpolation import YieldFormatError, delaunay, interpolate_grid, parse_yield_csv
from .analysis import (
    AnalysisConfig,
    ConfigError,
    config_from_dict,
    emit_block_geojson,
    emit_report_json,
    run_analysis,
)
from .pipeline import build_field_artifacts, build_field_table

__all__ = [
    "__version__",
    "Grid",
    "GridFormatError",
    "parse_ascii_grid",
    "write_ascii_grid",
    "resample_block_mean",
    "derive_all",
    "FusedCellTable",
    "SoilLayerError",
    "parse_boundary",
    "parse_soil_layer",
    "table_from_csv",
    "table_to_csv",
    "YieldFormatError",
    "delaunay",
    "interpolate_grid",
    "parse_yield_csv",
    "AnalysisConfig",
    "ConfigError",
    "config_from_dict",
    "emit_block_geojson",
    "emit_report_json",
    "run_analysis",
    "build_field_artifacts",
    "build_field_table",
]
