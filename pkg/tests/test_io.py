import json

import pytest

from spatialboot import io as sbio
from spatialboot.errors import IngestionError
from spatialboot.fields import RateField
from spatialboot.synth import grid_graph


@pytest.fixture
def graph():
    return grid_graph(4, 5, cell_km=40.0)


class TestRegions:
    def test_round_trip(self, tmp_path, graph):
        path = tmp_path / "regions.csv"
        sbio.write_regions(path, graph.regions)
        back = sbio.read_regions(path)
        assert back.ids == graph.regions.ids
        for rid in back.ids:
            assert back[rid].lat == graph.regions[rid].lat
            assert back[rid].lon == graph.regions[rid].lon

    def test_category_column_optional(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("id,lat,lon,population\nA,40.0,-100.0,5\n")
        regions = sbio.read_regions(path)
        assert regions["A"].category is None

    def test_bad_header(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("region,lat,lon,population\nA,0,0,1\n")
        with pytest.raises(IngestionError, match="header"):
            sbio.read_regions(path)

    def test_bad_latitude_names_row(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("id,lat,lon,population\nA,40.0,-100.0,5\nB,95.0,-100.0,5\n")
        with pytest.raises(IngestionError, match="row 3"):
            sbio.read_regions(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("id,lat,lon,population\nA,0,0,1\nA,1,1,1\n")
        with pytest.raises(IngestionError, match="duplicate"):
            sbio.read_regions(path)


class TestEdges:
    def test_round_trip_with_dedup(self, tmp_path, graph):
        path = tmp_path / "edges.csv"
        rows = ["id_a,id_b"]
        for rid in graph.ids:
            for nb in graph.neighbors(rid):
                rows.append(f"{rid},{nb}")  # both directions: must dedup
        path.write_text("\n".join(rows) + "\n")
        back = sbio.load_adjacency(path, graph.regions)
        assert back == graph

    def test_unknown_id_names_row(self, tmp_path, graph):
        path = tmp_path / "edges.csv"
        path.write_text("id_a,id_b\n00000,00001\n00000,ZZ\n")
        with pytest.raises(IngestionError, match=r"ZZ.*row 3|row 3"):
            sbio.load_adjacency(path, graph.regions)

    def test_self_loop_rejected_with_row(self, tmp_path, graph):
        path = tmp_path / "edges.csv"
        path.write_text("id_a,id_b\n00000,00000\n")
        with pytest.raises(IngestionError, match="row 2"):
            sbio.load_adjacency(path, graph.regions)

    def test_empty_edge_file_keeps_isolates(self, tmp_path, graph):
        path = tmp_path / "edges.csv"
        path.write_text("id_a,id_b\n")
        back = sbio.load_adjacency(path, graph.regions)
        assert back.n == graph.n
        assert all(back.degree(rid) == 0 for rid in back.ids)

    def test_symmetry_and_dedup_forced(self, tmp_path):
        from spatialboot.graph import Region, RegionSet

        regions = RegionSet(Region(id=r, lat=0, lon=i) for i, r in enumerate("ABC"))
        path = tmp_path / "edges.csv"
        path.write_text("id_a,id_b\nA,B\nB,A\nB,C\n")
        graph = sbio.load_adjacency(path, regions)
        assert graph.adjacency == {"A": ("B",), "B": ("A", "C"), "C": ("B",)}

    def test_continental_scale_count(self, tmp_path):
        # ingestion at the full national scale: 3,109 regions round-trip
        big = grid_graph(56, 56, n=3109)
        rpath, epath = tmp_path / "r.csv", tmp_path / "e.csv"
        sbio.write_regions(rpath, big.regions)
        sbio.write_edges(epath, big)
        regions = sbio.read_regions(rpath)
        graph = sbio.load_adjacency(epath, regions)
        assert graph.n == 3109
        assert graph == big


class TestGeoJson:
    def test_load_polygons(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"id": "sq1"},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]],
                    },
                },
                {
                    "type": "Feature",
                    "properties": {"id": "sq2"},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[1, 0], [2, 0], [2, 1], [1, 1], [1, 0]]],
                    },
                },
            ],
        }
        path = tmp_path / "squares.geojson"
        path.write_text(json.dumps(doc))
        polygons = sbio.load_geojson_polygons(path)
        assert set(polygons) == {"sq1", "sq2"}
        from spatialboot.graph import queen_contiguity

        g = queen_contiguity(polygons)
        assert g.neighbors("sq1") == ("sq2",)

    def test_custom_id_property(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"GEOID": "01001"},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]],
                    },
                }
            ],
        }
        path = tmp_path / "c.geojson"
        path.write_text(json.dumps(doc))
        polygons = sbio.load_geojson_polygons(path, id_property="GEOID")
        assert "01001" in polygons

    def test_missing_id(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [{"type": "Feature", "properties": {}, "geometry": {
                "type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]]}}],
        }
        path = tmp_path / "c.geojson"
        path.write_text(json.dumps(doc))
        with pytest.raises(IngestionError, match="property"):
            sbio.load_geojson_polygons(path)


class TestCountsFiles:
    def test_counts_unknown_region(self, tmp_path, graph):
        path = tmp_path / "counts.csv"
        path.write_text("id,code,age_group,gender,cases\nNOPE,101,1,F,3\n")
        with pytest.raises(IngestionError, match="row 2"):
            sbio.read_counts(path, graph.regions)

    def test_counts_bad_age(self, tmp_path, graph):
        path = tmp_path / "counts.csv"
        path.write_text("id,code,age_group,gender,cases\n00000,101,twelve,F,3\n")
        with pytest.raises(IngestionError, match="integer"):
            sbio.read_counts(path, graph.regions)

    def test_cases_exceeding_total_caught(self, tmp_path, graph):
        cpath = tmp_path / "counts.csv"
        tpath = tmp_path / "totals.csv"
        cpath.write_text("id,code,age_group,gender,cases\n00000,101,1,F,10\n")
        tpath.write_text("id,age_group,gender,total\n00000,1,F,5\n")
        with pytest.raises(IngestionError, match="exceed"):
            sbio.build_stratified_counts(cpath, tpath, graph.regions)

    def test_empty_counts_ok(self, tmp_path, graph):
        cpath = tmp_path / "counts.csv"
        tpath = tmp_path / "totals.csv"
        cpath.write_text("id,code,age_group,gender,cases\n")
        tpath.write_text("id,age_group,gender,total\n00000,1,F,5\n")
        counts = sbio.build_stratified_counts(cpath, tpath, graph.regions)
        assert counts.codes() == ()


class TestFieldsFile:
    def test_round_trip(self, tmp_path, graph):
        fields = [
            RateField("a", {rid: float(i) for i, rid in enumerate(graph.ids)}),
            RateField("b", {rid: -float(i) / 7.0 for i, rid in enumerate(graph.ids)}),
        ]
        path = tmp_path / "fields.csv"
        sbio.write_fields(path, fields)
        back = sbio.read_fields(path, graph.regions)
        assert [f.code for f in back] == ["a", "b"]
        assert back[0].values == fields[0].values
        assert back[1].values == fields[1].values

    def test_duplicate_region_value(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("id,code,log_rate\nA,c,1.0\nA,c,2.0\n")
        with pytest.raises(IngestionError, match="duplicate"):
            sbio.read_fields(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("id,code,log_rate\nA,c,nan\n")
        with pytest.raises(IngestionError, match="non-finite"):
            sbio.read_fields(path)


class TestStdPop:
    def test_round_trip_and_validation(self, tmp_path):
        path = tmp_path / "sp.csv"
        rows = ["age_group,gender,population"]
        for age in range(1, 20):
            rows.append(f"{age},F,{1000 + age}")
            rows.append(f"{age},M,{2000 + age}")
        path.write_text("\n".join(rows) + "\n")
        std = sbio.read_standard_population(path)
        assert len(std.strata()) == 38

    def test_bad_gender(self, tmp_path):
        path = tmp_path / "sp.csv"
        path.write_text("age_group,gender,population\n1,Z,100\n")
        with pytest.raises(IngestionError):
            sbio.read_standard_population(path)


class TestCodeMetadata:
    def test_read(self, tmp_path):
        path = tmp_path / "meta.csv"
        path.write_text("code,name,category\n101,Alpha,Group A\n102,Beta,\n")
        names, categories = sbio.read_code_metadata(path)
        assert names == {"101": "Alpha", "102": "Beta"}
        assert categories == {"101": "Group A"}
