"""Analysis orchestration: config validation, binning/ANOVA flow, block
dissolution geometry, and canonical serialization."""

import importlib.resources
import json

import jsonschema
import numpy as np
import pytest

from terrablock.analysis import (
    ConfigError,
    config_from_dict,
    emit_block_geojson,
    emit_report_json,
    run_analysis,
)
from terrablock.fusion import (
    assign_soil_attributes,
    build_fused_table,
    parse_boundary,
    parse_soil_layer,
    table_from_csv,
    table_to_csv,
)
from terrablock.raster import Grid
from terrablock.terrain import derive_all


def report_schema():
    ref = importlib.resources.files("terrablock.schemas") / "report.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def build_table(elevations, yield_values, soil_names=None, cell_size=10.0):
    """Square field, full-coverage boundary, one season called "y"."""
    vals = np.asarray(elevations, dtype=float)
    n_rows, n_cols = vals.shape
    dem = Grid(values=vals, xllcorner=0.0, yllcorner=0.0, cell_size=cell_size)
    deriv = derive_all(dem)
    w, h = n_cols * cell_size, n_rows * cell_size
    if soil_names is None:
        cells = [[{"compname": "Only"} for _ in range(n_cols)] for _ in range(n_rows)]
        keys = ["compname"]
    else:
        cells = [
            [{"compname": soil_names[r][c]} for c in range(n_cols)] for r in range(n_rows)
        ]
        keys = ["compname"]
    ygrid = dem.with_values(np.asarray(yield_values, dtype=float))
    ring = [[0, 0], [w, 0], [w, h], [0, h], [0, 0]]
    boundary = parse_boundary(json.dumps({"type": "Polygon", "coordinates": [ring]}))
    return build_fused_table(dem, deriv, cells, [("y", ygrid)], boundary, soil_keys=keys)


class TestConfig:
    def test_defaults(self):
        c = config_from_dict({"grouping_features": ["elevation"]})
        assert c.fwer == 0.01
        assert c.resolution_factor == 1
        assert c.seasons is None
        assert c.tukey_se_convention == "paper"

    def test_empty_feature_list_allowed(self):
        assert config_from_dict({"grouping_features": []}).grouping_features == ()

    def test_unknown_feature(self):
        with pytest.raises(ConfigError, match="curvature"):
            config_from_dict({"grouping_features": ["curvature"]})

    def test_duplicate_features(self):
        with pytest.raises(ConfigError, match="duplicates"):
            config_from_dict({"grouping_features": ["slope", "slope"]})

    def test_fwer_bounds(self):
        for bad in (0.0, 1.0, 1.5, -0.1, True, "a"):
            with pytest.raises(ConfigError):
                config_from_dict({"grouping_features": ["slope"], "fwer": bad})

    def test_bins_only_on_continuous(self):
        with pytest.raises(ConfigError, match="continuous"):
            config_from_dict(
                {"grouping_features": ["texture"], "bins": {"texture": {"kind": "explicit_edges", "edges": [0, 1]}}}
            )

    def test_explicit_edges_validation(self):
        ok = config_from_dict(
            {"grouping_features": ["elevation"],
             "bins": {"elevation": {"kind": "explicit_edges", "edges": [1, 2, 3]}}}
        )
        assert ok.bins["elevation"].edges == (1.0, 2.0, 3.0)
        for bad_edges in ([1.0], [2.0, 1.0], [1.0, 1.0], ["a", "b"], None):
            with pytest.raises(ConfigError):
                config_from_dict(
                    {"grouping_features": ["elevation"],
                     "bins": {"elevation": {"kind": "explicit_edges", "edges": bad_edges}}}
                )

    def test_unknown_bin_kind(self):
        with pytest.raises(ConfigError, match="kind"):
            config_from_dict(
                {"grouping_features": ["elevation"], "bins": {"elevation": {"kind": "quantile"}}}
            )

    def test_resolution_factor(self):
        with pytest.raises(ConfigError):
            config_from_dict({"grouping_features": ["slope"], "resolution_factor": 0})
        with pytest.raises(ConfigError):
            config_from_dict({"grouping_features": ["slope"], "resolution_factor": 2.5})

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            config_from_dict({"grouping_features": ["slope"], "alpha": 0.01})

    def test_season_duplicates(self):
        with pytest.raises(ConfigError):
            config_from_dict({"grouping_features": ["slope"], "seasons": ["a", "a"]})

    def test_convention_enum(self):
        with pytest.raises(ConfigError):
            config_from_dict({"grouping_features": ["slope"], "tukey_se_convention": "welch"})


class TestRunAnalysis:
    def test_identical_yields_give_f_zero_everywhere(self):
        rng = np.random.default_rng(41)
        elev = rng.normal(100, 3, size=(8, 8))
        table = build_table(elev, np.full((8, 8), 55.0))
        config = config_from_dict({"grouping_features": ["elevation"]})
        report, _ = run_analysis(table, config)
        (analysis,) = report.analyses
        assert analysis.anova.f == 0.0
        assert analysis.anova.p_value == 1.0
        assert analysis.tukey is None  # zero MSE leaves pairwise SE undefined
        assert any("pairwise" in w for w in analysis.warnings)

    def test_four_bins_six_pairs(self):
        rng = np.random.default_rng(42)
        elev = rng.normal(100, 3, size=(10, 10))
        yields = 40.0 + (elev - 100.0) * 2.0 + rng.normal(0, 0.5, size=(10, 10))
        table = build_table(elev, yields)
        config = config_from_dict({"grouping_features": ["elevation"]})
        report, _ = run_analysis(table, config)
        (analysis,) = report.analyses
        assert len(analysis.bins.labels) == 4  # central tendency default
        assert analysis.anova.df_between == 3
        assert analysis.tukey is not None
        assert len(analysis.tukey.pairs) == 6

    def test_group_counts_match_bin_assignment(self):
        rng = np.random.default_rng(43)
        elev = rng.normal(200, 5, size=(9, 9))
        yields = rng.uniform(30, 70, size=(9, 9))
        table = build_table(elev, yields)
        config = config_from_dict({"grouping_features": ["elevation"]})
        report, blocks = run_analysis(table, config)
        (analysis,) = report.analyses
        assert sum(g.n for g in analysis.groups) == 81
        # block map labels agree with the report's bins
        fb = blocks.features["elevation"]
        from terrablock.stats import assign_bins

        labels = assign_bins([r.elevation for r in table.rows], analysis.bins)
        assert len(fb.cell_labels) == 81
        for row, label in zip(table.rows, labels):
            assert fb.cell_labels[(row.row, row.col)] == label

    def test_single_soil_component_is_skipped_with_warning(self):
        rng = np.random.default_rng(44)
        elev = rng.normal(100, 2, size=(6, 6))
        table = build_table(elev, rng.uniform(40, 60, size=(6, 6)))
        config = config_from_dict({"grouping_features": ["component_name"]})
        report, blocks = run_analysis(table, config)
        assert report.analyses == ()
        assert any("fewer than 2" in w for w in report.warnings)
        assert "component_name" not in blocks.features

    def test_missing_season_raises(self):
        rng = np.random.default_rng(45)
        table = build_table(rng.normal(size=(4, 4)) + 100, np.full((4, 4), 5.0))
        config = config_from_dict({"grouping_features": ["elevation"], "seasons": ["2099"]})
        with pytest.raises(ValueError, match="2099"):
            run_analysis(table, config)

    def test_empty_bins_dropped_with_note(self):
        rng = np.random.default_rng(46)
        elev = np.where(rng.random((8, 8)) < 0.5, 100.0, 110.0) + rng.normal(0, 0.1, (8, 8))
        yields = elev * 0.5 + rng.normal(0, 0.2, (8, 8))
        table = build_table(elev, yields)
        # middle bin (103, 107] is empty by construction
        config = config_from_dict(
            {"grouping_features": ["elevation"],
             "bins": {"elevation": {"kind": "explicit_edges", "edges": [99, 103, 107, 111]}}}
        )
        report, _ = run_analysis(table, config)
        (analysis,) = report.analyses
        assert len(analysis.groups) == 2
        assert any("empty bin" in w for w in analysis.warnings)

    def test_listwise_deletion_counts_reported(self):
        rng = np.random.default_rng(47)
        elev = rng.normal(100, 3, size=(6, 6))
        yields = elev.copy()
        yields[2, 2] = np.nan
        yields[3, 4] = np.nan
        table = build_table(elev, yields)
        config = config_from_dict({"grouping_features": ["elevation"]})
        report, _ = run_analysis(table, config)
        (analysis,) = report.analyses
        assert sum(g.n for g in analysis.groups) == 34
        assert any("2 cells dropped" in w for w in analysis.warnings)

    def test_determinism(self):
        rng = np.random.default_rng(48)
        elev = rng.normal(150, 4, size=(7, 7))
        yields = rng.uniform(20, 80, size=(7, 7))
        table = build_table(elev, yields)
        config = config_from_dict({"grouping_features": ["elevation", "component_name"]})
        r1 = run_analysis(table, config)
        r2 = run_analysis(table, config)
        assert emit_report_json(r1[0]) == emit_report_json(r2[0])
        assert emit_block_geojson(r1[1]) == emit_block_geojson(r2[1])

    def test_analyses_sorted_by_feature_then_season(self):
        rng = np.random.default_rng(49)
        vals = rng.normal(100, 3, size=(6, 6))
        dem = Grid(values=vals, xllcorner=0, yllcorner=0, cell_size=10.0)
        deriv = derive_all(dem)
        cells = [[{"compname": "A" if c < 3 else "B"} for c in range(6)] for _ in range(6)]
        ring = [[0, 0], [60, 0], [60, 60], [0, 60], [0, 0]]
        boundary = parse_boundary(json.dumps({"type": "Polygon", "coordinates": [ring]}))
        ys = [
            ("2014", dem.with_values(rng.uniform(40, 60, (6, 6)))),
            ("2013", dem.with_values(rng.uniform(40, 60, (6, 6)))),
        ]
        table = build_fused_table(dem, deriv, cells, ys, boundary, soil_keys=["compname"])
        config = config_from_dict({"grouping_features": ["elevation", "component_name"]})
        report, _ = run_analysis(table, config)
        keys = [(a.feature, a.season) for a in report.analyses]
        assert keys == sorted(keys)
        assert len(keys) == 4


class TestBlockGeometry:
    def run_blocks(self, elev, yields=None, **cfg):
        if yields is None:
            yields = np.asarray(elev, dtype=float) * 0.3 + 40.0
        table = build_table(elev, yields)
        config = config_from_dict({"grouping_features": ["elevation"], **cfg})
        _, blocks = run_analysis(table, config)
        return blocks.features["elevation"], table

    def test_solid_region_dissolves_to_one_rectangle(self):
        elev = np.full((4, 4), 100.0)
        elev[:, 2:] = 110.0
        rng = np.random.default_rng(50)
        fb, table = self.run_blocks(
            elev,
            yields=rng.uniform(40, 50, (4, 4)),
            bins={"elevation": {"kind": "explicit_edges", "edges": [95.0, 105.0, 115.0]}},
        )
        west = fb.blocks[0]  # first bin (95, 105] holds the 100 m columns
        assert west.cell_count == 8
        (polygon,) = west.polygons
        (exterior,) = polygon  # solid region, no holes
        # collinear edge vertices merged away, corners only
        assert set(exterior) == {(0.0, 0.0), (20.0, 0.0), (20.0, 40.0), (0.0, 40.0)}
        assert len(exterior) == 4

    def test_checkerboard_gives_single_cell_polygons(self):
        n = 4
        elev = np.fromfunction(lambda r, c: 100.0 + ((r + c) % 2) * 10.0, (n, n))
        rng = np.random.default_rng(51)
        fb, _ = self.run_blocks(
            elev,
            yields=rng.uniform(40, 50, (n, n)),
            bins={"elevation": {"kind": "explicit_edges", "edges": [95.0, 105.0, 115.0]}},
        )
        assert len(fb.blocks) == 2
        for block in fb.blocks:
            assert block.cell_count == 8
            assert len(block.polygons) == 8  # diagonal neighbors do not merge
            for polygon in block.polygons:
                assert len(polygon) == 1
                assert len(polygon[0]) == 4  # unit squares

    def test_donut_hole(self):
        elev = np.full((3, 3), 110.0)
        elev[1, 1] = 100.0
        rng = np.random.default_rng(52)
        fb, _ = self.run_blocks(
            elev,
            yields=rng.uniform(40, 50, (3, 3)),
            bins={"elevation": {"kind": "explicit_edges", "edges": [95.0, 105.0, 115.0]}},
        )
        ring_block = [b for b in fb.blocks if b.cell_count == 8][0]
        (polygon,) = ring_block.polygons
        assert len(polygon) == 2  # exterior plus one hole
        exterior, hole = polygon
        assert shoelace(exterior) > 0  # counterclockwise
        assert shoelace(hole) < 0  # clockwise
        assert set(hole) == {(10.0, 10.0), (20.0, 10.0), (20.0, 20.0), (10.0, 20.0)}

    def test_area_conservation(self):
        rng = np.random.default_rng(53)
        elev = rng.normal(100, 5, size=(12, 12))
        fb, table = self.run_blocks(elev, yields=rng.uniform(40, 60, (12, 12)))
        total_cells = 0
        for block in fb.blocks:
            area = sum(sum(shoelace(ring) for ring in poly) for poly in block.polygons)
            assert area == pytest.approx(block.cell_count * 100.0)  # 10 m cells
            total_cells += block.cell_count
        assert total_cells == len(table.rows)

    def test_pinch_does_not_merge_into_self_intersecting_ring(self):
        # two same-label cells touching only at a corner, joined around the
        # left: the hole and the exterior meet at one vertex and must stay
        # separate simple rings
        elev = np.array(
            [
                [110.0, 110.0, 100.0],
                [110.0, 100.0, 110.0],
                [110.0, 110.0, 110.0],
            ]
        )
        rng = np.random.default_rng(54)
        fb, _ = self.run_blocks(
            elev,
            yields=rng.uniform(40, 50, (3, 3)),
            bins={"elevation": {"kind": "explicit_edges", "edges": [95.0, 105.0, 115.0]}},
        )
        big = [b for b in fb.blocks if b.cell_count == 7][0]
        (polygon,) = big.polygons
        rings = list(polygon)
        assert len(rings) == 2
        for ring in rings:
            assert len(set(ring)) == len(ring)  # simple: no repeated vertex

    def test_geometry_identical_after_csv_round_trip(self):
        rng = np.random.default_rng(55)
        elev = rng.normal(100, 5, size=(8, 8))
        yields = rng.uniform(40, 60, size=(8, 8))
        table = build_table(elev, yields)
        config = config_from_dict({"grouping_features": ["elevation"]})
        _, blocks_direct = run_analysis(table, config)
        reread = table_from_csv(table_to_csv(table))
        assert reread.cell_size is None  # geometry must be inferred
        _, blocks_reread = run_analysis(reread, config)
        assert emit_block_geojson(blocks_direct) == emit_block_geojson(blocks_reread)


def shoelace(ring):
    total = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:] + type(ring)([ring[0]])):
        total += x1 * y2 - x2 * y1
    return total / 2.0


class TestSerialization:
    def fixture_report(self):
        rng = np.random.default_rng(56)
        elev = rng.normal(100, 4, size=(10, 10))
        yields = elev * 0.8 + rng.normal(0, 1, size=(10, 10))
        table = build_table(elev, yields)
        config = config_from_dict({"grouping_features": ["elevation", "component_name"]})
        return run_analysis(table, config)

    def test_report_validates_against_bundled_schema(self):
        report, _ = self.fixture_report()
        payload = json.loads(emit_report_json(report))
        jsonschema.validate(payload, report_schema())

    def test_empty_config_gives_schema_valid_empty_report(self):
        rng = np.random.default_rng(57)
        table = build_table(rng.normal(100, 3, (4, 4)), rng.uniform(40, 60, (4, 4)))
        report, blocks = run_analysis(table, config_from_dict({"grouping_features": []}))
        payload = json.loads(emit_report_json(report))
        assert payload["analyses"] == []
        jsonschema.validate(payload, report_schema())
        assert json.loads(emit_block_geojson(blocks))["features"] == []

    def test_keys_sorted_and_floats_six_significant(self):
        report, _ = self.fixture_report()
        text = emit_report_json(report)
        payload = json.loads(text)
        assert list(payload) == sorted(payload)
        assert list(payload["analyses"][0]) == sorted(payload["analyses"][0])
        # six significant digits everywhere except bin edges, which round-trip
        # into explicit_edges configs and must survive exactly
        def walk(node):
            if isinstance(node, float):
                assert float(f"{node:.6g}") == node
            elif isinstance(node, dict):
                for key, v in node.items():
                    if key != "edges":
                        walk(v)
            elif isinstance(node, list):
                for v in node:
                    walk(v)

        walk(payload)

    def test_bin_edges_survive_report_round_trip(self):
        rng = np.random.default_rng(59)
        elev = rng.normal(215, 0.44, size=(10, 10))
        table = build_table(elev, elev * 0.3 + rng.normal(0, 1, (10, 10)))
        first, _ = run_analysis(table, config_from_dict({"grouping_features": ["elevation"]}))
        echoed = json.loads(emit_report_json(first))["analyses"][0]["bins"]["edges"]
        resub = config_from_dict(
            {"grouping_features": ["elevation"],
             "bins": {"elevation": {"kind": "explicit_edges", "edges": echoed}}}
        )
        second, _ = run_analysis(table, resub)
        a1, a2 = first.analyses[0], second.analyses[0]
        assert a2.bins.edges == tuple(echoed)
        assert [g.n for g in a1.groups] == [g.n for g in a2.groups]
        assert a1.anova == a2.anova

    def test_provenance_digest_matches_csv_bytes(self):
        import hashlib

        rng = np.random.default_rng(58)
        elev = rng.normal(100, 4, size=(6, 6))
        table = build_table(elev, elev * 0.5)
        config = config_from_dict({"grouping_features": ["elevation"]})
        report, _ = run_analysis(table, config)
        expected = hashlib.sha256(table_to_csv(table).encode()).hexdigest()
        assert report.fused_table_sha256 == expected
        payload = json.loads(emit_report_json(report))
        assert payload["provenance"]["fused_table_sha256"] == expected
        assert payload["provenance"]["config"]["fwer"] == 0.01

    def test_blocks_geojson_shape(self):
        _, blocks = self.fixture_report()
        doc = json.loads(emit_block_geojson(blocks))
        assert doc["type"] == "FeatureCollection"
        keys = [(f["properties"]["feature"], f["properties"]["group_label"]) for f in doc["features"]]
        assert keys == sorted(keys)
        for f in doc["features"]:
            geom = f["geometry"]
            assert geom["type"] in ("Polygon", "MultiPolygon")
            polys = [geom["coordinates"]] if geom["type"] == "Polygon" else geom["coordinates"]
            for rings in polys:
                for ring in rings:
                    assert ring[0] == ring[-1]  # closed per GeoJSON
                    assert len(ring) >= 4
