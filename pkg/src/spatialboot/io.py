"""Delimited-text readers and writers for every file the pipeline touches.

All files are comma-separated with a fixed header row.  Readers validate
schema and referential integrity and raise :class:`IngestionError` with the
offending file and 1-based row number.  Writers emit floats with ``repr``
(shortest round-trip form), keeping outputs byte-stable across runs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import IngestionError
from .fields import RateField
from .graph import NeighborGraph, Region, RegionSet
from .moran import MoranResult
from .nb2 import BootstrapResult
from .ranking import CategorySummary, RankingTable
from .rates import StandardPopulation, StratifiedCounts
from .variogram import EmpiricalVariogram, VariogramModel

REGIONS_HEADER = ["id", "lat", "lon", "population"]
EDGES_HEADER = ["id_a", "id_b"]
COUNTS_HEADER = ["id", "code", "age_group", "gender", "cases"]
TOTALS_HEADER = ["id", "age_group", "gender", "total"]
STDPOP_HEADER = ["age_group", "gender", "population"]
FIELDS_HEADER = ["id", "code", "log_rate"]
NB2_HEADER = ["code", "variant", "statistic", "n_effective", "M", "master_seed", "flags"]
NB2_REPS_HEADER = ["code", "rep_index", "value"]
MORAN_HEADER = ["code", "I", "n", "scheme"]
VARIOGRAM_HEADER = [
    "code", "nugget", "sill", "length_param_km", "practical_range_km", "converged", "rss",
]
VARIOGRAM_EMP_HEADER = ["code", "lag_km", "semivariance", "pairs"]
RANKING_HEADER = ["code", "name", "rank_nb2_t", "rank_nb2_odds", "rank_moran", "range_km", "sill"]
CURVES_HEADER = ["method", "N", "mean_range_km", "mean_sill"]
CATEGORIES_HEADER = ["category", "count", "mean_range_km", "q1", "median", "q3", "outliers"]
FAILURES_HEADER = ["code", "stage", "reason"]
CODE_META_HEADER = ["code", "name", "category"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item") and isinstance(value.item(), float):  # numpy scalar
        return repr(value.item())
    return str(value)


def _open_rows(path, expected_header: Sequence[str], optional: Sequence[str] = ()):
    """Yield (row_number, row_dict); validates the header first."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open: {exc}", path=str(path)) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty file (missing header)", path=str(path)) from None
        header = [h.strip() for h in header]
        required = list(expected_header)
        if header[: len(required)] != required:
            raise IngestionError(
                f"expected header {','.join(required)} (optionally {','.join(optional)}), "
                f"got {','.join(header)}",
                path=str(path),
                row=1,
            )
        extras = header[len(required) :]
        bad = [c for c in extras if c not in optional]
        if bad:
            raise IngestionError(
                f"unexpected columns {bad}", path=str(path), row=1
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # skip blank lines
            if len(row) != len(header):
                raise IngestionError(
                    f"expected {len(header)} fields, got {len(row)}",
                    path=str(path),
                    row=row_no,
                )
            yield row_no, dict(zip(header, (v.strip() for v in row)))


def _parse_float(value: str, what: str, path: str, row: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise IngestionError(f"{what}: not a number: {value!r}", path=path, row=row) from None


def _parse_int(value: str, what: str, path: str, row: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise IngestionError(f"{what}: not an integer: {value!r}", path=path, row=row) from None


# ---------------------------------------------------------------------------
# Readers


def read_regions(path) -> RegionSet:
    """Region metadata: id,lat,lon,population[,category]."""
    spath = str(path)
    regions = []
    seen: set[str] = set()
    for row_no, row in _open_rows(path, REGIONS_HEADER, optional=("category",)):
        rid = row["id"]
        if not rid:
            raise IngestionError("empty region id", path=spath, row=row_no)
        if rid in seen:
            raise IngestionError(f"duplicate region id {rid!r}", path=spath, row=row_no)
        seen.add(rid)
        try:
            regions.append(
                Region(
                    id=rid,
                    lat=_parse_float(row["lat"], "lat", spath, row_no),
                    lon=_parse_float(row["lon"], "lon", spath, row_no),
                    population=_parse_float(row["population"], "population", spath, row_no),
                    category=row.get("category") or None,
                )
            )
        except ValueError as exc:
            raise IngestionError(str(exc), path=spath, row=row_no) from None
    if not regions:
        raise IngestionError("no regions", path=spath)
    return RegionSet(regions)


def load_adjacency(path, regions: RegionSet) -> NeighborGraph:
    """Edge list (id_a,id_b) over known regions; deduplicated and made
    symmetric; self-loop rows are rejected; regions without edges stay as
    isolates."""
    spath = str(path)
    adjacency: dict[str, set[str]] = {rid: set() for rid in regions.ids}
    for row_no, row in _open_rows(path, EDGES_HEADER):
        a, b = row["id_a"], row["id_b"]
        for rid in (a, b):
            if rid not in regions:
                raise IngestionError(f"unknown region id {rid!r}", path=spath, row=row_no)
        if a == b:
            raise IngestionError(f"self-loop on {a!r}", path=spath, row=row_no)
        adjacency[a].add(b)
        adjacency[b].add(a)
    return NeighborGraph(regions, adjacency)


def load_geojson_polygons(path, id_property: str = "id") -> dict[str, dict]:
    """Polygon geometries keyed by a feature property."""
    spath = str(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot parse GeoJSON: {exc}", path=spath) from exc
    if doc.get("type") != "FeatureCollection":
        raise IngestionError("expected a FeatureCollection", path=spath)
    polygons: dict[str, dict] = {}
    for i, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        rid = props.get(id_property, feature.get("id"))
        if rid is None:
            raise IngestionError(
                f"feature {i} has no {id_property!r} property", path=spath
            )
        rid = str(rid)
        if rid in polygons:
            raise IngestionError(f"duplicate feature id {rid!r}", path=spath)
        geometry = feature.get("geometry")
        if not geometry or geometry.get("type") not in ("Polygon", "MultiPolygon"):
            raise IngestionError(
                f"feature {rid!r}: geometry must be Polygon or MultiPolygon", path=spath
            )
        polygons[rid] = geometry
    if not polygons:
        raise IngestionError("no polygon features", path=spath)
    return polygons


def read_standard_population(path) -> StandardPopulation:
    spath = str(path)
    populations: dict[tuple[int, str], float] = {}
    for row_no, row in _open_rows(path, STDPOP_HEADER):
        age = _parse_int(row["age_group"], "age_group", spath, row_no)
        gender = row["gender"]
        key = (age, gender)
        if key in populations:
            raise IngestionError(f"duplicate stratum {key}", path=spath, row=row_no)
        populations[key] = _parse_float(row["population"], "population", spath, row_no)
    try:
        return StandardPopulation(populations)
    except ValueError as exc:
        raise IngestionError(str(exc), path=spath) from None


def read_counts(path, regions: RegionSet) -> dict[tuple[str, str, int, str], int]:
    """Case counts: id,code,age_group,gender,cases (region ids must exist)."""
    spath = str(path)
    cases: dict[tuple[str, str, int, str], int] = {}
    for row_no, row in _open_rows(path, COUNTS_HEADER):
        rid = row["id"]
        if rid not in regions:
            raise IngestionError(f"unknown region id {rid!r}", path=spath, row=row_no)
        key = (
            rid,
            row["code"],
            _parse_int(row["age_group"], "age_group", spath, row_no),
            row["gender"],
        )
        if key in cases:
            raise IngestionError(f"duplicate counts row {key}", path=spath, row=row_no)
        n = _parse_int(row["cases"], "cases", spath, row_no)
        if n < 0:
            raise IngestionError(f"negative cases {n}", path=spath, row=row_no)
        cases[key] = n
    return cases


def read_totals(path, regions: RegionSet) -> dict[tuple[str, int, str], int]:
    """Record totals: id,age_group,gender,total (region ids must exist)."""
    spath = str(path)
    totals: dict[tuple[str, int, str], int] = {}
    for row_no, row in _open_rows(path, TOTALS_HEADER):
        rid = row["id"]
        if rid not in regions:
            raise IngestionError(f"unknown region id {rid!r}", path=spath, row=row_no)
        key = (rid, _parse_int(row["age_group"], "age_group", spath, row_no), row["gender"])
        if key in totals:
            raise IngestionError(f"duplicate totals row {key}", path=spath, row=row_no)
        n = _parse_int(row["total"], "total", spath, row_no)
        if n < 0:
            raise IngestionError(f"negative total {n}", path=spath, row=row_no)
        totals[key] = n
    return totals


def build_stratified_counts(
    counts_path, totals_path, regions: RegionSet
) -> StratifiedCounts:
    cases = read_counts(counts_path, regions)
    totals = read_totals(totals_path, regions)
    try:
        return StratifiedCounts(cases=cases, totals=totals)
    except ValueError as exc:
        raise IngestionError(str(exc), path=str(counts_path)) from None


def read_fields(path, regions: RegionSet | None = None) -> list[RateField]:
    """Long-format field file: id,code,log_rate; one field per code."""
    spath = str(path)
    values: dict[str, dict[str, float]] = {}
    for row_no, row in _open_rows(path, FIELDS_HEADER):
        rid = row["id"]
        if regions is not None and rid not in regions:
            raise IngestionError(f"unknown region id {rid!r}", path=spath, row=row_no)
        code = row["code"]
        per = values.setdefault(code, {})
        if rid in per:
            raise IngestionError(
                f"duplicate value for region {rid!r} code {code!r}", path=spath, row=row_no
            )
        per[rid] = _parse_float(row["log_rate"], "log_rate", spath, row_no)
    try:
        return [RateField(code, values[code]) for code in sorted(values)]
    except ValueError as exc:
        raise IngestionError(str(exc), path=spath) from None


def read_code_metadata(path) -> tuple[dict[str, str], dict[str, str]]:
    """Optional code metadata: code,name,category -> (names, categories)."""
    spath = str(path)
    names: dict[str, str] = {}
    categories: dict[str, str] = {}
    for row_no, row in _open_rows(path, CODE_META_HEADER):
        code = row["code"]
        if code in names:
            raise IngestionError(f"duplicate code {code!r}", path=spath, row=row_no)
        names[code] = row["name"]
        if row["category"]:
            categories[code] = row["category"]
    return names, categories


# ---------------------------------------------------------------------------
# Writers


def _write(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_regions(path, regions: RegionSet) -> None:
    _write(
        path,
        REGIONS_HEADER + ["category"],
        (
            (r.id, r.lat, r.lon, r.population, r.category or "")
            for r in regions
        ),
    )


def write_edges(path, graph: NeighborGraph) -> None:
    rows = []
    for rid in graph.ids:
        for nb in graph.neighbors(rid):
            if rid < nb:
                rows.append((rid, nb))
    _write(path, EDGES_HEADER, rows)


def write_fields(path, fields: Sequence[RateField]) -> None:
    rows = []
    for field in sorted(fields, key=lambda f: f.code):
        for rid in sorted(field.values):
            rows.append((rid, field.code, field.values[rid]))
    _write(path, FIELDS_HEADER, rows)


def write_nb2_results(path, results: Sequence[BootstrapResult]) -> None:
    _write(
        path,
        NB2_HEADER,
        (
            (
                r.code,
                r.variant,
                r.statistic,
                r.n_effective,
                r.repetitions,
                r.master_seed,
                ";".join(r.flags),
            )
            for r in sorted(results, key=lambda r: (r.code, r.variant))
        ),
    )


def write_nb2_repetitions(path, results: Sequence[BootstrapResult]) -> None:
    """Audit dump for a single variant's results."""
    variants = {r.variant for r in results}
    if len(variants) > 1:
        raise ValueError("write one repetition dump per variant")
    rows = []
    for r in sorted(results, key=lambda r: r.code):
        for i, v in enumerate(r.per_repetition):
            rows.append((r.code, i, v))
    _write(path, NB2_REPS_HEADER, rows)


def write_moran_results(path, results: Sequence[MoranResult]) -> None:
    _write(
        path,
        MORAN_HEADER,
        ((r.code, r.i, r.n, r.weight_scheme) for r in sorted(results, key=lambda r: r.code)),
    )


def write_variogram_models(path, models: Sequence[VariogramModel]) -> None:
    _write(
        path,
        VARIOGRAM_HEADER,
        (
            (
                m.code,
                m.nugget,
                m.sill,
                m.length_km,
                m.practical_range_km,
                str(m.converged).lower(),
                m.rss,
            )
            for m in sorted(models, key=lambda m: m.code)
        ),
    )


def write_empirical_variograms(path, variograms: Sequence[EmpiricalVariogram]) -> None:
    rows = []
    for emp in sorted(variograms, key=lambda e: e.code):
        for lag, gamma, pairs in emp.bins:
            rows.append((emp.code, lag, gamma, pairs))
    _write(path, VARIOGRAM_EMP_HEADER, rows)


def write_ranking_table(path, table: RankingTable) -> None:
    def fmt_rank(row, method):
        return repr(row.ranks[method]) if method in row.ranks else ""

    rows = []
    for row in table.rows:
        rows.append(
            (
                row.code,
                row.name,
                fmt_rank(row, "nb2_t"),
                fmt_rank(row, "nb2_odds"),
                fmt_rank(row, "moran"),
                repr(row.practical_range_km) if row.practical_range_km is not None else "",
                repr(row.sill) if row.sill is not None else "",
            )
        )
    _write(path, RANKING_HEADER, rows)


def write_curves(path, curves: Mapping[str, Sequence[tuple[int, float, float]]]) -> None:
    rows = []
    for method in sorted(curves):
        for n, mean_range, mean_sill in curves[method]:
            rows.append((method, n, mean_range, mean_sill))
    _write(path, CURVES_HEADER, rows)


def write_category_summaries(path, summaries: Sequence[CategorySummary]) -> None:
    _write(
        path,
        CATEGORIES_HEADER,
        (
            (
                s.category,
                s.count,
                s.mean_range_km,
                s.q1,
                s.median,
                s.q3,
                ";".join(repr(v) for v in s.outliers),
            )
            for s in summaries
        ),
    )


def write_failures(path, failures: Sequence[tuple[str, str, str]]) -> None:
    _write(path, FAILURES_HEADER, sorted(failures))
