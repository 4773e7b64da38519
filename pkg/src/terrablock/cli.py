"""Command line front end.

Subcommands mirror the pipeline stages so intermediate artifacts (slope
grids, fused tables) can be inspected or rerun individually.  Exit status is
nonzero only for I/O and format/schema failures; statistically boring
results are still results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import ConfigError, config_from_dict, emit_block_geojson, emit_report_json, run_analysis
from .fusion import SoilLayerError, parse_boundary, parse_soil_layer, table_from_csv, table_to_csv
from .interpolation import YieldFormatError, interpolate_grid, parse_yield_csv
from .pipeline import build_field_table
from .raster import GridFormatError, parse_ascii_grid, resample_block_mean, write_ascii_grid
from .terrain import aspect, gradient, slope_magnitude


class CliError(Exception):
    """User-facing failure; message printed to stderr, exit 1."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write(path: str, data: str) -> None:
    try:
        Path(path).write_text(data, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_grid(path: str):
    try:
        return parse_ascii_grid(_read(path))
    except GridFormatError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _load_yield_file(path: str) -> list:
    # files without a season column are labeled by their filename stem
    try:
        return parse_yield_csv(_read(path), default_season=Path(path).stem)
    except YieldFormatError as exc:
        raise CliError(f"{path}: {exc}") from exc


def cmd_terrain(args) -> int:
    dem = _load_grid(args.dem)
    if args.resample > 1:
        dem = resample_block_mean(dem, args.resample)
    gx, gy = gradient(dem)
    wrote = False
    if args.out_dem:
        _write(args.out_dem, write_ascii_grid(dem))
        wrote = True
    if args.out_slope:
        _write(args.out_slope, write_ascii_grid(slope_magnitude(gx, gy)))
        wrote = True
    if args.out_aspect:
        _write(args.out_aspect, write_ascii_grid(aspect(gx, gy)))
        wrote = True
    if not wrote:
        raise CliError("nothing to do: pass --out-slope, --out-aspect, or --out-dem")
    return 0


def cmd_fuse(args) -> int:
    dem = _load_grid(args.dem)
    try:
        soil = parse_soil_layer(_read(args.soil))
        boundary = parse_boundary(_read(args.boundary))
    except SoilLayerError as exc:
        raise CliError(str(exc)) from exc
    for warning in soil.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    yield_sets = []
    for path in args.yield_files:
        yield_sets.extend(_load_yield_file(path))
    try:
        table = build_field_table(dem, soil, boundary, yield_sets, args.resample)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _write(args.out, table_to_csv(table))
    print(f"fused {len(table.rows)} cells, seasons: {', '.join(table.seasons) or '(none)'}")
    return 0


def cmd_interpolate(args) -> int:
    like = _load_grid(args.like)
    sets = _load_yield_file(args.points)
    by_season = {ps.season: ps for ps in sets}
    if args.season is not None:
        if args.season not in by_season:
            raise CliError(
                f"season {args.season!r} not in {args.points}; has: {', '.join(by_season)}"
            )
        chosen = by_season[args.season]
    elif len(sets) == 1:
        chosen = sets[0]
    else:
        raise CliError(f"{args.points} has several seasons; pick one with --season")
    _write(args.out, write_ascii_grid(interpolate_grid(chosen, like)))
    return 0


def cmd_analyze(args) -> int:
    try:
        raw = json.loads(_read(args.config))
    except json.JSONDecodeError as exc:
        raise CliError(f"{args.config}: invalid JSON: {exc}") from exc
    try:
        config = config_from_dict(raw)
    except ConfigError as exc:
        raise CliError(f"{args.config}: {exc}") from exc
    try:
        fused = table_from_csv(_read(args.fused))
    except ValueError as exc:
        raise CliError(f"{args.fused}: {exc}") from exc
    try:
        report, blocks = run_analysis(fused, config)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _write(args.report, emit_report_json(report))
    if args.blocks:
        _write(args.blocks, emit_block_geojson(blocks))
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"analyzed {len(report.analyses)} feature/season combinations")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    port = args.port if args.port is not None else int(os.environ.get("TERRABLOCK_PORT", "8008"))
    data_dir = args.data_dir or os.environ.get("TERRABLOCK_DATA_DIR", "./terrablock-data")
    app = create_app(data_dir=data_dir, workers=args.workers, cors_origins=args.cors_origin)
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="terrablock",
        description="Terrain-derived blocking for on-farm trials: raster "
        "derivatives, soil/yield fusion, ANOVA + Tukey HSD grouping, and "
        "block geometry export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("terrain", help="compute slope/aspect grids from a DEM")
    p.add_argument("dem", help="ESRI ASCII grid")
    p.add_argument("--out-slope", help="output path for the slope grid")
    p.add_argument("--out-aspect", help="output path for the aspect grid")
    p.add_argument("--out-dem", help="output path for the (resampled) DEM itself")
    p.add_argument("--resample", type=int, default=1, metavar="N",
                   help="block-mean the DEM by an integer factor first")
    p.set_defaults(func=cmd_terrain)

    p = sub.add_parser("fuse", help="join DEM, soil, and yield layers into a cell table")
    p.add_argument("--dem", required=True, help="ESRI ASCII grid")
    p.add_argument("--soil", required=True, help="soil map units GeoJSON")
    p.add_argument("--boundary", required=True, help="field boundary GeoJSON")
    p.add_argument("--yield", dest="yield_files", action="append", default=[],
                   metavar="CSV", help="yield points (repeatable, one per season file)")
    p.add_argument("--out", required=True, help="output fused table CSV")
    p.add_argument("--resample", type=int, default=1, metavar="N",
                   help="analysis resolution factor; must match the config used later")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("interpolate", help="interpolate yield points onto a grid")
    p.add_argument("--points", required=True, help="yield CSV")
    p.add_argument("--like", required=True, help="grid whose geometry to copy")
    p.add_argument("--out", required=True, help="output ASCII grid")
    p.add_argument("--season", help="season to pick when the CSV has several")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("analyze", help="run the blocking analysis on a fused table")
    p.add_argument("--fused", required=True, help="fused table CSV")
    p.add_argument("--config", required=True, help="analysis config JSON")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--blocks", help="output block GeoJSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=None,
                   help="listen port (default $TERRABLOCK_PORT or 8008)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default=None,
                   help="artifact directory (default $TERRABLOCK_DATA_DIR or ./terrablock-data)")
    p.add_argument("--workers", type=int, default=None,
                   help="analysis worker threads (default: CPU count)")
    p.add_argument("--cors-origin", action="append", default=None,
                   help="allowed CORS origin (repeatable)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
