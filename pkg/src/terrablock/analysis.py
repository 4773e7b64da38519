"""Per-feature ANOVA/Tukey pipeline, block geometry, and report emission.

For every requested grouping feature and season this bins the fused table,
runs the one-way ANOVA and Tukey HSD over per-bin yields, computes box
statistics, dissolves same-label cells into rectilinear block polygons, and
serializes everything as canonical JSON (byte-identical for identical
inputs).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import __version__
from .fusion import FusedCellTable, table_to_csv
from .stats import (
    AnovaResult,
    BinSpec,
    BoxStats,
    DegenerateDataError,
    TukeyResult,
    anova_oneway,
    assign_bins,
    bins_from_edges,
    box_stats,
    categorical_bins,
    central_tendency_bins,
    tukey_hsd,
)

# grouping feature -> fused-table column
CONTINUOUS_FEATURES = {"elevation": "elevation", "slope": "slope"}
CATEGORICAL_FEATURES = {
    "texture": "texdesc",
    "parent_material": "pmgroupname",
    "drainage_class": "drainagecl",
    "component_name": "compname",
}
ALL_FEATURES = {**CONTINUOUS_FEATURES, **CATEGORICAL_FEATURES}


class ConfigError(ValueError):
    """Raised when an analysis config violates its schema."""


@dataclass(frozen=True)
class BinRule:
    kind: str = "central_tendency"  # or "explicit_edges"
    edges: tuple[float, ...] | None = None


@dataclass(frozen=True)
class AnalysisConfig:
    grouping_features: tuple[str, ...]
    bins: Mapping[str, BinRule] = field(default_factory=dict)
    fwer: float = 0.01
    seasons: tuple[str, ...] | None = None  # None analyzes every season present
    resolution_factor: int = 1
    tukey_se_convention: str = "paper"


def config_from_dict(raw: Mapping) -> AnalysisConfig:
    """Validate a JSON-shaped config; raises ConfigError with a field path."""
    if not isinstance(raw, Mapping):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - {
        "grouping_features",
        "bins",
        "fwer",
        "seasons",
        "resolution_factor",
        "tukey_se_convention",
    }
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    features = raw.get("grouping_features")
    if not isinstance(features, list):
        raise ConfigError("grouping_features must be a list")
    for f in features:
        if f not in ALL_FEATURES:
            raise ConfigError(f"unknown grouping feature {f!r}; valid: {sorted(ALL_FEATURES)}")
    if len(set(features)) != len(features):
        raise ConfigError("grouping_features contains duplicates")

    bins: dict[str, BinRule] = {}
    for feature, rule in (raw.get("bins") or {}).items():
        if feature not in CONTINUOUS_FEATURES:
            raise ConfigError(f"bins.{feature}: only continuous features take bin rules")
        if not isinstance(rule, Mapping):
            raise ConfigError(f"bins.{feature}: must be an object")
        kind = rule.get("kind", "central_tendency")
        if kind == "central_tendency":
            if rule.get("edges") is not None:
                raise ConfigError(f"bins.{feature}: central_tendency takes no edges")
            bins[feature] = BinRule(kind=kind)
        elif kind == "explicit_edges":
            edges = rule.get("edges")
            if (
                not isinstance(edges, list)
                or len(edges) < 2
                or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in edges)
            ):
                raise ConfigError(f"bins.{feature}: explicit_edges needs a list of >= 2 numbers")
            if any(a >= b for a, b in zip(edges, edges[1:])):
                raise ConfigError(f"bins.{feature}: edges must be strictly increasing")
            bins[feature] = BinRule(kind=kind, edges=tuple(float(e) for e in edges))
        else:
            raise ConfigError(f"bins.{feature}: unknown kind {kind!r}")

    fwer = raw.get("fwer", 0.01)
    if isinstance(fwer, bool) or not isinstance(fwer, (int, float)) or not (0.0 < fwer < 1.0):
        raise ConfigError(f"fwer must be a number in (0, 1), got {fwer!r}")

    seasons = raw.get("seasons")
    if seasons is not None:
        if not isinstance(seasons, list) or not all(isinstance(s, str) for s in seasons) or not seasons:
            raise ConfigError("seasons must be a non-empty list of strings (or omitted)")
        if len(set(seasons)) != len(seasons):
            raise ConfigError("seasons contains duplicates")

    factor = raw.get("resolution_factor", 1)
    if isinstance(factor, bool) or not isinstance(factor, int) or factor < 1:
        raise ConfigError(f"resolution_factor must be an integer >= 1, got {factor!r}")

    convention = raw.get("tukey_se_convention", "paper")
    if convention not in ("paper", "kramer"):
        raise ConfigError(f"tukey_se_convention must be 'paper' or 'kramer', got {convention!r}")

    return AnalysisConfig(
        grouping_features=tuple(features),
        bins=bins,
        fwer=float(fwer),
        seasons=tuple(seasons) if seasons is not None else None,
        resolution_factor=factor,
        tukey_se_convention=convention,
    )


def config_to_dict(config: AnalysisConfig) -> dict:
    """Fully resolved echo of the config, as stored in report provenance."""
    return {
        "grouping_features": list(config.grouping_features),
        "bins": {
            f: {"kind": r.kind, "edges": list(r.edges) if r.edges else None}
            for f, r in sorted(config.bins.items())
        },
        "fwer": config.fwer,
        "seasons": list(config.seasons) if config.seasons is not None else None,
        "resolution_factor": config.resolution_factor,
        "tukey_se_convention": config.tukey_se_convention,
    }


# ---------------------------------------------------------------------------
# Analysis results


@dataclass(frozen=True)
class GroupReport:
    label: str
    n: int
    mean: float
    variance: float | None
    box: BoxStats


@dataclass(frozen=True)
class FeatureAnalysis:
    feature: str
    season: str
    bins: BinSpec
    groups: tuple[GroupReport, ...]
    anova: AnovaResult
    tukey: TukeyResult | None  # None when MSE = 0 makes pairwise SE undefined
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class AnalysisReport:
    analyses: tuple[FeatureAnalysis, ...]
    fused_table_sha256: str
    config: AnalysisConfig
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class BlockGeometry:
    feature: str
    group_label: str
    cell_count: int
    # one entry per connected component: (exterior ring, hole rings...) in
    # world coordinates, rings open (no repeated closing vertex)
    polygons: tuple[tuple[tuple[tuple[float, float], ...], ...], ...]


@dataclass(frozen=True)
class FeatureBlocks:
    feature: str
    bins: BinSpec
    cell_labels: Mapping[tuple[int, int], str]
    blocks: tuple[BlockGeometry, ...]


@dataclass(frozen=True)
class BlockMap:
    features: Mapping[str, FeatureBlocks]


# ---------------------------------------------------------------------------
# Pipeline


def _resolve_bins(
    feature: str, values: list, config: AnalysisConfig
) -> BinSpec:
    if feature in CATEGORICAL_FEATURES:
        spec = categorical_bins(values)
        if len(spec.labels) == 0:
            raise DegenerateDataError(f"{feature}: no non-missing values to group")
        return spec
    rule = config.bins.get(feature, BinRule())
    if rule.kind == "explicit_edges":
        return bins_from_edges(rule.edges)
    numeric = [float(v) for v in values if v is not None]
    if len(numeric) < 2:
        raise DegenerateDataError(f"{feature}: not enough values to derive bins")
    return central_tendency_bins(numeric)


def run_analysis(fused: FusedCellTable, config: AnalysisConfig) -> tuple[AnalysisReport, BlockMap]:
    """Bin, test, and dissolve every requested feature for every season.

    Skipped feature/season combinations (too few groups, degenerate spread)
    are recorded as warnings, never raised; unknown features and unknown
    seasons are contract violations and do raise.
    """
    seasons = config.seasons if config.seasons is not None else fused.seasons
    missing_seasons = [s for s in seasons if s not in fused.seasons]
    if missing_seasons:
        raise ValueError(f"seasons not present in fused table: {missing_seasons}")
    for feature in config.grouping_features:
        column = ALL_FEATURES[feature]
        if column not in ("elevation", "slope") and column not in fused.soil_keys:
            raise ValueError(f"feature {feature!r} needs absent table column {column!r}")

    digest = hashlib.sha256(table_to_csv(fused).encode("utf-8")).hexdigest()
    analyses: list[FeatureAnalysis] = []
    global_warnings: list[str] = []
    block_features: dict[str, FeatureBlocks] = {}

    for feature in config.grouping_features:
        column = ALL_FEATURES[feature]
        feature_values = [_nan_to_none(v) for v in fused.feature_values(column)]
        for season in seasons:
            yields = [row.yields.get(season) for row in fused.rows]
            pairs = [(fv, yv) for fv, yv in zip(feature_values, yields) if yv is not None]
            notes: list[str] = []
            n_missing_yield = len(yields) - len(pairs)
            if n_missing_yield:
                notes.append(f"{n_missing_yield} cells dropped: missing {season} yield")

            try:
                spec = _resolve_bins(feature, [fv for fv, _ in pairs], config)
            except DegenerateDataError as exc:
                global_warnings.append(f"{feature}/{season}: skipped, {exc}")
                continue

            labels = assign_bins([fv for fv, _ in pairs], spec)
            groups: dict[str, list[float]] = {label: [] for label in spec.labels}
            unassigned = 0
            for label, (_, yv) in zip(labels, pairs):
                if label is None:
                    unassigned += 1
                else:
                    groups[label].append(yv)
            if unassigned:
                notes.append(f"{unassigned} cells dropped: feature value missing or out of bins")
            empty = [label for label, vals in groups.items() if not vals]
            for label in empty:
                notes.append(f"empty bin dropped: {label}")
                del groups[label]
            if len(groups) < 2:
                global_warnings.append(
                    f"{feature}/{season}: skipped, fewer than 2 non-empty groups"
                )
                continue

            try:
                anova = anova_oneway(groups)
            except (DegenerateDataError, ValueError) as exc:
                global_warnings.append(f"{feature}/{season}: skipped, {exc}")
                continue
            try:
                tukey = tukey_hsd(
                    groups, fwer=config.fwer, se_convention=config.tukey_se_convention, anova=anova
                )
            except DegenerateDataError as exc:
                tukey = None
                notes.append(f"pairwise comparisons skipped: {exc}")

            group_reports = tuple(
                GroupReport(
                    label=label,
                    n=len(groups[label]),
                    mean=float(sum(groups[label]) / len(groups[label])),
                    variance=_sample_variance(groups[label]),
                    box=box_stats(groups[label]),
                )
                for label in spec.labels
                if label in groups
            )
            analyses.append(
                FeatureAnalysis(
                    feature=feature,
                    season=season,
                    bins=spec,
                    groups=group_reports,
                    anova=anova,
                    tukey=tukey,
                    warnings=tuple(notes),
                )
            )

            if feature not in block_features:
                block_features[feature] = _build_feature_blocks(fused, feature, spec)

    analyses.sort(key=lambda a: (a.feature, a.season))
    report = AnalysisReport(
        analyses=tuple(analyses),
        fused_table_sha256=digest,
        config=config,
        warnings=tuple(global_warnings),
    )
    return report, BlockMap(features=block_features)


def _nan_to_none(v):
    if isinstance(v, float) and v != v:
        return None
    return v


def _sample_variance(values: Sequence[float]) -> float | None:
    n = len(values)
    if n < 2:
        return None
    mean = sum(values) / n
    return sum((v - mean) ** 2 for v in values) / (n - 1)


# ---------------------------------------------------------------------------
# Block geometry

_LEFT = {(1, 0): (0, 1), (0, 1): (-1, 0), (-1, 0): (0, -1), (0, -1): (1, 0)}
_RIGHT = {v: k for k, v in _LEFT.items()}


def _grid_geometry(fused: FusedCellTable) -> tuple[float, float, float]:
    """(cell_size, x_origin, y_origin), inferred from row spacing if unset."""
    if fused.cell_size is not None:
        return fused.cell_size, fused.x_origin, fused.y_origin
    by_col: dict[int, float] = {}
    by_row: dict[int, float] = {}
    for r in fused.rows:
        by_col.setdefault(r.col, r.x)
        by_row.setdefault(r.row, r.y)
    cell = None
    if len(by_col) > 1:
        lo, hi = min(by_col), max(by_col)
        cell = (by_col[hi] - by_col[lo]) / (hi - lo)
    elif len(by_row) > 1:
        lo, hi = min(by_row), max(by_row)
        cell = (by_row[hi] - by_row[lo]) / (hi - lo)
    if cell is None or cell <= 0:
        cell = 1.0  # single-cell table: footprint size is unknowable
    any_row = fused.rows[0]
    x0 = any_row.x - (any_row.col + 0.5) * cell
    y0 = any_row.y - (any_row.row + 0.5) * cell
    return cell, x0, y0


def _build_feature_blocks(fused: FusedCellTable, feature: str, spec: BinSpec) -> FeatureBlocks:
    column = ALL_FEATURES[feature]
    values = [_nan_to_none(v) for v in fused.feature_values(column)]
    labels = assign_bins(values, spec)
    cell_labels = {
        (row.row, row.col): label for row, label in zip(fused.rows, labels) if label is not None
    }
    cell, x0, y0 = _grid_geometry(fused)

    blocks = []
    for label in spec.labels:
        cells = {rc for rc, lab in cell_labels.items() if lab == label}
        if not cells:
            continue
        polygons = []
        for comp in _connected_components(cells):
            rings = _trace_rings(comp)
            exterior = [r for r in rings if _ring_area_cells(r) > 0]
            holes = [r for r in rings if _ring_area_cells(r) < 0]
            assert len(exterior) == 1, "a connected component has exactly one outer ring"
            world = tuple(
                tuple((x0 + cx * cell, y0 + ry * cell) for cx, ry in ring)
                for ring in exterior + holes
            )
            polygons.append(world)
        blocks.append(
            BlockGeometry(
                feature=feature,
                group_label=label,
                cell_count=len(cells),
                polygons=tuple(polygons),
            )
        )
    return FeatureBlocks(feature=feature, bins=spec, cell_labels=cell_labels, blocks=tuple(blocks))


def _connected_components(cells: set[tuple[int, int]]) -> list[set[tuple[int, int]]]:
    """4-connected components, deterministic order (by smallest member)."""
    remaining = set(cells)
    comps = []
    while remaining:
        seed = min(remaining)
        comp = {seed}
        stack = [seed]
        remaining.discard(seed)
        while stack:
            r, c = stack.pop()
            for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    stack.append(nb)
        comps.append(comp)
    return comps


def _trace_rings(comp: set[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    """Boundary rings of a cell component, vertices in (col, row) lattice units.

    Edges are oriented with the component interior on the left, so exterior
    rings come out counterclockwise and holes clockwise.  At pinch vertices
    the walk takes the leftmost turn, which keeps every ring simple.
    """
    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(a, b):
        edges.setdefault(a, []).append(b)

    for r, c in comp:
        if (r - 1, c) not in comp:
            add((c, r), (c + 1, r))
        if (r, c + 1) not in comp:
            add((c + 1, r), (c + 1, r + 1))
        if (r + 1, c) not in comp:
            add((c + 1, r + 1), (c, r + 1))
        if (r, c - 1) not in comp:
            add((c, r + 1), (c, r))

    for targets in edges.values():
        targets.sort()

    rings = []
    while edges:
        start = min(edges)
        ring = [start]
        prev_dir = None
        v = start
        while True:
            targets = edges[v]
            if prev_dir is None:
                nxt = targets[0]
            else:
                # rightmost turn first: at a pinch vertex the right turn is
                # the one that keeps the current ring bordering a single
                # outside region, so touching rings stay separate and simple
                nxt = None
                for want in (_RIGHT[prev_dir], prev_dir, _LEFT[prev_dir]):
                    cand = (v[0] + want[0], v[1] + want[1])
                    if cand in targets:
                        nxt = cand
                        break
                assert nxt is not None, "boundary walk lost its ring"
            targets.remove(nxt)
            if not targets:
                del edges[v]
            prev_dir = (nxt[0] - v[0], nxt[1] - v[1])
            v = nxt
            if v == start:
                break
            ring.append(v)
        rings.append(_merge_collinear(ring))
    return rings


def _merge_collinear(ring: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out = []
    n = len(ring)
    for i in range(n):
        p_prev, p, p_next = ring[i - 1], ring[i], ring[(i + 1) % n]
        d1 = (p[0] - p_prev[0], p[1] - p_prev[1])
        d2 = (p_next[0] - p[0], p_next[1] - p[1])
        if (d1[0] * d2[1] - d1[1] * d2[0]) != 0 or (d1[0] * d2[0] + d1[1] * d2[1]) <= 0:
            out.append(p)
    return out


def _ring_area_cells(ring: Sequence[tuple[int, int]]) -> float:
    total = 0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2.0


# ---------------------------------------------------------------------------
# Serialization


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def _box_dict(box: BoxStats) -> dict:
    return {
        "q1": box.q1,
        "median": box.median,
        "q3": box.q3,
        "iqr": box.iqr,
        "whisker_low": box.whisker_low,
        "whisker_high": box.whisker_high,
        "mean": box.mean,
        "n": box.n,
        "outliers": list(box.outliers),
    }


def report_to_dict(report: AnalysisReport) -> dict:
    analyses = []
    for a in report.analyses:
        anova = a.anova
        tukey = a.tukey
        analyses.append(
            {
                "feature": a.feature,
                "season": a.season,
                "bins": {
                    "kind": a.bins.kind,
                    "edges": list(a.bins.edges) if a.bins.edges is not None else None,
                    "labels": list(a.bins.labels),
                },
                "groups": [
                    {
                        "label": g.label,
                        "n": g.n,
                        "mean": g.mean,
                        "variance": g.variance,
                        "box": _box_dict(g.box),
                    }
                    for g in a.groups
                ],
                "anova": {
                    "ssb": anova.ssb,
                    "ssw": anova.ssw,
                    "sst": anova.sst,
                    "df_between": anova.df_between,
                    "df_within": anova.df_within,
                    "msb": anova.msb,
                    "msw": anova.msw,
                    "f": anova.f,
                    "p_value": anova.p_value,
                    "r_squared": anova.r_squared,
                },
                "tukey": None
                if tukey is None
                else {
                    "fwer": tukey.fwer,
                    "q_critical": tukey.q_critical,
                    "se_convention": tukey.se_convention,
                    "pairs": [
                        {
                            "group1": p.group1,
                            "group2": p.group2,
                            "mean_diff": p.mean_diff,
                            "se": p.se,
                            "q_stat": p.q_stat,
                            "p_adj": p.p_adj,
                            "ci_low": p.ci_low,
                            "ci_high": p.ci_high,
                            "reject": p.reject,
                        }
                        for p in tukey.pairs
                    ],
                },
                "warnings": list(a.warnings),
            }
        )
    return {
        "analyses": analyses,
        "provenance": {
            "fused_table_sha256": report.fused_table_sha256,
            "config": config_to_dict(report.config),
            "tool_version": __version__,
        },
        "warnings": list(report.warnings),
    }


def _round_floats(obj):
    if isinstance(obj, float):
        return _sig6(obj)
    if isinstance(obj, dict):
        # edges feed back into explicit_edges configs; rounding them would
        # move bin boundaries, so they keep full precision
        return {
            k: (v if k == "edges" else _round_floats(v)) for k, v in obj.items()
        }
    if isinstance(obj, list):
        return [_round_floats(v) for v in obj]
    return obj


def emit_report_json(report: AnalysisReport) -> str:
    """Canonical report: sorted keys, floats at 6 significant digits.

    Probabilities at exactly 1e-12 are floor values; consumers should render
    them as "< 1e-12".
    """
    payload = _round_floats(report_to_dict(report))
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_block_geojson(blocks: BlockMap) -> str:
    """FeatureCollection of dissolved blocks, one feature per (feature, label)."""
    features = []
    for feature_name in sorted(blocks.features):
        fb = blocks.features[feature_name]
        for block in sorted(fb.blocks, key=lambda b: b.group_label):
            coords = [
                [[list(pt) for pt in ring] + [list(ring[0])] for ring in polygon]
                for polygon in block.polygons
            ]
            geometry = (
                {"type": "Polygon", "coordinates": coords[0]}
                if len(coords) == 1
                else {"type": "MultiPolygon", "coordinates": coords}
            )
            features.append(
                {
                    "type": "Feature",
                    "properties": {
                        "feature": block.feature,
                        "group_label": block.group_label,
                        "cell_count": block.cell_count,
                    },
                    "geometry": geometry,
                }
            )
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc, sort_keys=True, allow_nan=False, separators=(",", ":")) + "\n"
