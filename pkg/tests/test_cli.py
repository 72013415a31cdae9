from pathlib import Path

import numpy as np
import pytest

from spatialboot import io as sbio
from spatialboot.cli import main
from spatialboot.rates import AGE_GROUPS, GENDERS
from spatialboot.synth import FieldSpec, generate, grid_graph, synthesize_counts

SPEC_TEXT = """
[gp_a]
kind = exponential_gp
seed = 1
length_km = 80
sill = 1.0
nugget = 0.1

[gp_b]
kind = exponential_gp
seed = 2
length_km = 200
sill = 1.0
nugget = 0.05

[null_a]
kind = permuted
seed = 3
base_kind = exponential_gp
base_seed = 13
base_length_km = 100
base_sill = 1.0
"""


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "spec.ini"
    path.write_text(SPEC_TEXT)
    return path


def data_files(out_dir):
    return sorted(
        p.name for p in Path(out_dir).iterdir() if p.name != "manifest.ini"
    )


class TestSynthCommand:
    def test_generates_bundle(self, tmp_path, spec_file):
        out = tmp_path / "synthout"
        assert main([
            "synth", "--spec", str(spec_file), "--grid", "10x12", "--out", str(out),
        ]) == 0
        assert (out / "fields.csv").exists()
        assert (out / "regions.csv").exists()
        assert (out / "edges.csv").exists()
        labels = (out / "labels.csv").read_text().splitlines()
        assert labels[0] == "code,kind,seed"
        assert len(labels) == 4


class TestRunCommand:
    def test_synth_mode_outputs(self, tmp_path, spec_file):
        out = tmp_path / "results"
        code = main([
            "run", "--synth-spec", str(spec_file), "--grid", "12x12",
            "--reps", "15", "--seed", "3", "--out", str(out),
        ])
        assert code == 0
        for name in (
            "nb2.csv", "moran.csv", "variogram.csv", "variogram_empirical.csv",
            "ranking.csv", "curves.csv", "categories.csv", "failures.csv",
            "diagnostics.csv", "manifest.ini", "fields.csv",
        ):
            assert (out / name).exists(), name
        nb2_lines = (out / "nb2.csv").read_text().splitlines()
        assert nb2_lines[0] == "code,variant,statistic,n_effective,M,master_seed,flags"
        assert len(nb2_lines) == 7  # 3 codes x 2 variants

    def test_worker_counts_byte_identical(self, tmp_path, spec_file):
        outs = []
        for workers in ("1", "4", "8"):
            out = tmp_path / f"w{workers}"
            assert main([
                "run", "--synth-spec", str(spec_file), "--grid", "12x12",
                "--reps", "10", "--seed", "3", "--threads", workers, "--out", str(out),
            ]) == 0
            outs.append(out)
        names = data_files(outs[0])
        for other in outs[1:]:
            assert data_files(other) == names
            for name in names:
                assert (other / name).read_bytes() == (outs[0] / name).read_bytes(), name

    def test_manifest_round_trip(self, tmp_path, spec_file):
        out1 = tmp_path / "first"
        assert main([
            "run", "--synth-spec", str(spec_file), "--grid", "10x10",
            "--reps", "8", "--seed", "5", "--out", str(out1),
        ]) == 0
        out2 = tmp_path / "second"
        assert main([
            "run", "--config", str(out1 / "manifest.ini"), "--out", str(out2),
        ]) == 0
        for name in data_files(out1):
            assert (out2 / name).read_bytes() == (out1 / name).read_bytes(), name

    def test_variant_selection(self, tmp_path, spec_file):
        out = tmp_path / "tonly"
        assert main([
            "run", "--synth-spec", str(spec_file), "--grid", "10x10",
            "--reps", "5", "--variant", "ttest", "--out", str(out),
        ]) == 0
        lines = (out / "nb2.csv").read_text().splitlines()
        assert all(",ttest," in line for line in lines[1:])

    def test_dump_reps(self, tmp_path, spec_file):
        out = tmp_path / "dump"
        assert main([
            "run", "--synth-spec", str(spec_file), "--grid", "10x10",
            "--reps", "4", "--dump-reps", "--out", str(out),
        ]) == 0
        for variant in ("ttest", "odds"):
            lines = (out / f"nb2_reps_{variant}.csv").read_text().splitlines()
            assert lines[0] == "code,rep_index,value"
            assert len(lines) == 1 + 3 * 4  # codes x reps

    def test_coverage_failure_recorded_run_continues(self, tmp_path):
        graph = grid_graph(10, 10)
        full = generate(FieldSpec("full", "gradient", seed=0, params={"noise": 0.2}), graph.regions)
        partial_values = {
            rid: v for i, (rid, v) in enumerate(full.values.items()) if i < 50
        }
        from spatialboot.fields import RateField

        sbio.write_regions(tmp_path / "regions.csv", graph.regions)
        sbio.write_edges(tmp_path / "edges.csv", graph)
        sbio.write_fields(
            tmp_path / "fields.csv",
            [full, RateField("partial", partial_values)],
        )
        out = tmp_path / "results"
        assert main([
            "run", "--regions", str(tmp_path / "regions.csv"),
            "--edges", str(tmp_path / "edges.csv"),
            "--fields", str(tmp_path / "fields.csv"),
            "--reps", "5", "--out", str(out),
        ]) == 0
        failures = (out / "failures.csv").read_text()
        assert "partial,coverage" in failures
        nb2_rows = (out / "nb2.csv").read_text().splitlines()[1:]
        assert all(row.startswith("full,") for row in nb2_rows)

    def test_missing_inputs_exit_2(self, tmp_path):
        assert main(["run", "--out", str(tmp_path / "x")]) == 2

    def test_bad_reps_exit_2(self, tmp_path, spec_file):
        assert main([
            "run", "--synth-spec", str(spec_file), "--grid", "10x10",
            "--reps", "0", "--out", str(tmp_path / "x"),
        ]) == 2

    def test_geojson_contiguity_mode(self, tmp_path):
        import json

        from conftest import unit_square

        rows, cols = 4, 5
        features = []
        region_rows = ["id,lat,lon,population"]
        field_rows = ["id,code,log_rate"]
        for r in range(rows):
            for c in range(cols):
                rid = f"r{r}c{c}"
                features.append({
                    "type": "Feature",
                    "properties": {"id": rid},
                    "geometry": {"type": "Polygon", "coordinates": unit_square(c, r)},
                })
                region_rows.append(f"{rid},{r + 0.5},{c + 0.5},100")
                field_rows.append(f"{rid},demo,{(r + c) / 10.0}")
        (tmp_path / "regions.csv").write_text("\n".join(region_rows) + "\n")
        (tmp_path / "fields.csv").write_text("\n".join(field_rows) + "\n")
        (tmp_path / "map.geojson").write_text(
            json.dumps({"type": "FeatureCollection", "features": features})
        )
        out = tmp_path / "results"
        assert main([
            "run", "--regions", str(tmp_path / "regions.csv"),
            "--geojson", str(tmp_path / "map.geojson"),
            "--fields", str(tmp_path / "fields.csv"),
            "--reps", "5", "--out", str(out),
        ]) == 0
        # interior cells have 8 queen neighbors: check via the edges dump
        edges = (out / "edges.csv").read_text().splitlines()[1:]
        degree = {}
        for line in edges:
            a, b = line.split(",")
            degree[a] = degree.get(a, 0) + 1
            degree[b] = degree.get(b, 0) + 1
        assert degree["r1c1"] == 8

    def test_row_standardized_weights_recorded(self, tmp_path, spec_file):
        out = tmp_path / "roww"
        assert main([
            "run", "--synth-spec", str(spec_file), "--grid", "10x10",
            "--reps", "5", "--weights", "row", "--out", str(out),
        ]) == 0
        lines = (out / "moran.csv").read_text().splitlines()
        assert all(line.endswith(",row_standardized") for line in lines[1:])

    def test_direct_comparator_flows_through(self, tmp_path, spec_file):
        out_m = tmp_path / "matched"
        out_d = tmp_path / "direct"
        for out, comparator in ((out_m, "matched"), (out_d, "direct")):
            assert main([
                "run", "--synth-spec", str(spec_file), "--grid", "12x12",
                "--reps", "10", "--seed", "3", "--comparator", comparator,
                "--out", str(out),
            ]) == 0
        assert "comparator = direct" in (out_d / "manifest.ini").read_text()
        assert (out_m / "nb2.csv").read_bytes() != (out_d / "nb2.csv").read_bytes()

    def test_unreadable_fields_exit_2(self, tmp_path):
        (tmp_path / "regions.csv").write_text("id,lat,lon,population\nA,0,0,1\nB,0,1,1\n")
        (tmp_path / "edges.csv").write_text("id_a,id_b\nA,B\n")
        (tmp_path / "fields.csv").write_text("id,code,log_rate\nZZZ,c,1.0\n")
        assert main([
            "run", "--regions", str(tmp_path / "regions.csv"),
            "--edges", str(tmp_path / "edges.csv"),
            "--fields", str(tmp_path / "fields.csv"),
            "--out", str(tmp_path / "r"),
        ]) == 2


def write_counts_inputs(tmp_path, coverage_fractions, n_side=(10, 12), seed=5):
    if n_side is None:
        graph = grid_graph(56, 56, n=3109)  # continental-scale analog
    else:
        graph = grid_graph(*n_side)
    ids = list(graph.ids)
    rng = np.random.default_rng(seed)
    rates_by_code = {}
    for code, frac in coverage_fractions.items():
        covered = ids[: round(frac * len(ids))]
        rates_by_code[code] = {rid: float(rng.uniform(100, 1500)) for rid in covered}
    counts = synthesize_counts(graph.regions, rates_by_code, seed=seed)
    sbio.write_regions(tmp_path / "regions.csv", graph.regions)
    sbio.write_edges(tmp_path / "edges.csv", graph)
    sbio._write(
        tmp_path / "counts.csv",
        sbio.COUNTS_HEADER,
        ((r, c, a, g, n) for (r, c, a, g), n in sorted(counts.cases.items())),
    )
    sbio._write(
        tmp_path / "totals.csv",
        sbio.TOTALS_HEADER,
        ((r, a, g, n) for (r, a, g), n in sorted(counts.totals.items())),
    )
    sbio._write(
        tmp_path / "stdpop.csv",
        sbio.STDPOP_HEADER,
        ((a, g, 1000 + a) for a in AGE_GROUPS for g in GENDERS),
    )
    return graph


class TestIngestCommand:
    def test_bundle_and_report(self, tmp_path):
        graph = write_counts_inputs(tmp_path, {"101": 1.0, "202": 0.5})
        bundle = tmp_path / "bundle"
        assert main([
            "ingest", "--regions", str(tmp_path / "regions.csv"),
            "--edges", str(tmp_path / "edges.csv"),
            "--counts", str(tmp_path / "counts.csv"),
            "--totals", str(tmp_path / "totals.csv"),
            "--stdpop", str(tmp_path / "stdpop.csv"),
            "--out", str(bundle),
        ]) == 0
        report = (bundle / "validation.txt").read_text()
        assert f"regions = {graph.n}" in report
        assert "codes = 2" in report
        coverage = (bundle / "coverage.csv").read_text().splitlines()
        assert coverage[0] == "code,observed,fraction"
        rows = {line.split(",")[0]: line.split(",") for line in coverage[1:]}
        assert rows["101"][1] == str(graph.n)
        assert float(rows["202"][2]) == pytest.approx(0.5)

    def test_unknown_region_in_counts_exit_2(self, tmp_path, capsys):
        write_counts_inputs(tmp_path, {"101": 1.0})
        with open(tmp_path / "counts.csv", "a") as fh:
            fh.write("GHOST,101,1,F,2\n")
        code = main([
            "ingest", "--regions", str(tmp_path / "regions.csv"),
            "--edges", str(tmp_path / "edges.csv"),
            "--counts", str(tmp_path / "counts.csv"),
            "--totals", str(tmp_path / "totals.csv"),
            "--stdpop", str(tmp_path / "stdpop.csv"),
            "--out", str(tmp_path / "bundle"),
        ])
        assert code == 2
        err = capsys.readouterr().err
        assert "GHOST" in err and "row" in err

    def test_empty_counts_warns(self, tmp_path, capsys):
        write_counts_inputs(tmp_path, {"101": 1.0})
        (tmp_path / "counts.csv").write_text("id,code,age_group,gender,cases\n")
        assert main([
            "ingest", "--regions", str(tmp_path / "regions.csv"),
            "--edges", str(tmp_path / "edges.csv"),
            "--counts", str(tmp_path / "counts.csv"),
            "--totals", str(tmp_path / "totals.csv"),
            "--stdpop", str(tmp_path / "stdpop.csv"),
            "--out", str(tmp_path / "bundle"),
        ]) == 0
        assert "zero codes" in capsys.readouterr().err

    def test_national_scale_region_count(self, tmp_path):
        # a valid full-scale bundle: report lists 3,109 regions
        graph = write_counts_inputs(tmp_path, {"101": 1.0}, n_side=None)
        bundle = tmp_path / "bundle"
        assert main([
            "ingest", "--regions", str(tmp_path / "regions.csv"),
            "--edges", str(tmp_path / "edges.csv"),
            "--counts", str(tmp_path / "counts.csv"),
            "--totals", str(tmp_path / "totals.csv"),
            "--stdpop", str(tmp_path / "stdpop.csv"),
            "--out", str(bundle),
        ]) == 0
        assert graph.n == 3109
        assert "regions = 3109" in (bundle / "validation.txt").read_text()

    def test_bundle_runs_end_to_end(self, tmp_path):
        write_counts_inputs(tmp_path, {"101": 1.0, "202": 0.8, "303": 0.5})
        bundle = tmp_path / "bundle"
        main([
            "ingest", "--regions", str(tmp_path / "regions.csv"),
            "--edges", str(tmp_path / "edges.csv"),
            "--counts", str(tmp_path / "counts.csv"),
            "--totals", str(tmp_path / "totals.csv"),
            "--stdpop", str(tmp_path / "stdpop.csv"),
            "--out", str(bundle),
        ])
        out = tmp_path / "results"
        assert main([
            "run", "--bundle", str(bundle), "--reps", "10", "--seed", "2",
            "--out", str(out),
        ]) == 0
        nb2_rows = (out / "nb2.csv").read_text().splitlines()[1:]
        codes = {row.split(",")[0] for row in nb2_rows}
        assert codes == {"101", "202"}  # 303 fails coverage
        assert "303,coverage" in (out / "failures.csv").read_text()


class TestRederiveCommands:
    def test_rank_and_variogram_rederive(self, tmp_path, spec_file):
        out = tmp_path / "results"
        main([
            "run", "--synth-spec", str(spec_file), "--grid", "12x12",
            "--reps", "10", "--seed", "3", "--out", str(out),
        ])
        ranking_before = (out / "ranking.csv").read_bytes()
        variogram_before = (out / "variogram.csv").read_bytes()
        assert main(["rank", "--results", str(out)]) == 0
        assert (out / "ranking.csv").read_bytes() == ranking_before
        assert main(["variogram", "--results", str(out)]) == 0
        assert (out / "variogram.csv").read_bytes() == variogram_before


class TestBenchCommand:
    def test_bench_grid_rows(self, tmp_path):
        out = tmp_path / "bench"
        assert main([
            "bench", "--grid", "8x8", "--codes", "2", "--m-grid", "5,10",
            "--workers-grid", "1", "--out", str(out),
        ]) == 0
        lines = (out / "bench.csv").read_text().splitlines()
        assert lines[0] == "M,workers,codes,seconds_per_code,mean_rel_diff_vs_max_m"
        assert len(lines) == 3  # two M values x one worker count
        # the reference row (largest M) has zero drift by definition
        assert float(lines[2].split(",")[4]) == 0.0
        assert float(lines[1].split(",")[4]) >= 0.0
