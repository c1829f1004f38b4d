import csv
import math

import numpy as np
import pytest

from crimesim.env import (CrimeDistribution, assign_point, extract_hotspots,
                          haversine_km, ingest_crimes, load_city, point_in_ring)
from crimesim.errors import InputError, LoadError, MetricError
from crimesim.synth import write_features_csv

HEADER = ("cell_id,lat,lon,population,average_income,poverty_ratio,housing_value,"
          "race_json,gender_ratio,poi_count,poi_categories_json,safety_score,"
          "semantic_description")


def _row(cid, lat, lon, safety="0.5"):
    return (f'{cid},{lat},{lon},1000,50000,0.2,200000,"{{""white"": 1.0}}",0.5,'
            f'5,"{{""food"": 2}}",{safety},quiet block')


def _write(tmp_path, rows, name="features.csv"):
    path = tmp_path / name
    path.write_text("\n".join([HEADER] + rows) + "\n", encoding="utf-8")
    return path


def test_load_city_well_formed(tmp_path):
    path = _write(tmp_path, [_row("a", 41.0, -87.0), _row("b", 41.01, -87.0),
                             _row("c", 41.02, -87.0)])
    env = load_city(path)
    assert env.n_cells == 3
    assert env.load_report.dropped_missing_safety == []
    assert env.features["a"].population == 1000


def test_load_city_drops_missing_safety(tmp_path):
    path = _write(tmp_path, [_row("a", 41.0, -87.0), _row("b", 41.01, -87.0, safety=""),
                             _row("c", 41.02, -87.0)])
    env = load_city(path)
    assert env.n_cells == 2
    assert env.load_report.dropped_missing_safety == ["b"]


def test_load_city_duplicate_id(tmp_path):
    path = _write(tmp_path, [_row("a", 41.0, -87.0), _row("a", 41.01, -87.0)])
    with pytest.raises(LoadError, match="duplicate cell id 'a'"):
        load_city(path)


def test_load_city_malformed_row_names_field(tmp_path):
    bad = _row("b", 41.01, -87.0).replace("0.2", "not-a-number")
    path = _write(tmp_path, [_row("a", 41.0, -87.0), bad])
    with pytest.raises(LoadError, match="row 3.*poverty_ratio"):
        load_city(path)


def test_load_city_unknown_boundary_skipped(tmp_path, fixtures_dir):
    rows = [_row("g00", 41.594, -87.906)]
    path = _write(tmp_path, rows)
    with pytest.warns(UserWarning, match="unknown cell"):
        env = load_city(path, fixtures_dir / "mini_city" / "boundaries.geojson")
    assert "g01" in env.load_report.boundaries_skipped


def test_neighbors_symmetric(mini_env, small_env):
    for env in (mini_env, small_env):
        for cid, cell in env.cells.items():
            for other in cell.neighbors:
                assert cid in env.cells[other].neighbors


def test_assign_point_inside_boundary(mini_env):
    for cid in ("g00", "g07", "g15"):
        lat, lon = mini_env.cells[cid].centroid
        assert assign_point(mini_env, lat, lon) == cid


def test_assign_point_outside_all_polygons(mini_env):
    assert assign_point(mini_env, 10.0, 10.0) is None


def test_assign_point_boundary_inclusive():
    ring = ((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0))
    assert point_in_ring(0.0, 0.5, ring)  # on an edge
    assert point_in_ring(0.5, 0.5, ring)
    assert not point_in_ring(1.5, 0.5, ring)


def test_assign_point_tie_goes_to_smaller_id(tmp_path):
    # centroids symmetric about the query point, no boundaries
    path = _write(tmp_path, [_row("zz", 41.0, -87.01), _row("aa", 41.0, -86.99)])
    env = load_city(path)
    d1 = haversine_km(41.0, -87.0, 41.0, -87.01)
    d2 = haversine_km(41.0, -87.0, 41.0, -86.99)
    assert d1 == d2  # exact float tie by construction
    assert assign_point(env, 41.0, -87.0) == "aa"


def test_assign_point_cutoff(tmp_path):
    path = _write(tmp_path, [_row("a", 41.0, -87.0)])
    env = load_city(path)
    assert assign_point(env, 41.0, -87.01) == "a"
    assert assign_point(env, 41.5, -87.0) is None  # ~55 km away


def test_assign_point_rejects_non_finite(mini_env):
    with pytest.raises(InputError):
        assign_point(mini_env, float("nan"), 0.0)


def _crimes_csv(tmp_path, rows):
    path = tmp_path / "crimes.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_iso8601", "lat", "lon", "cell_id", "category"])
        writer.writerows(rows)
    return path


def test_ingest_counts_by_cell(mini_env, tmp_path):
    lat, lon = mini_env.cells["g05"].centroid
    rows = [(f"2019-01-0{i}T12:00:00", lat, lon, "", "theft") for i in range(1, 6)]
    dist = ingest_crimes(mini_env, _crimes_csv(tmp_path, rows),
                         ("2019-01-01T00:00:00", "2019-12-31T23:59:59"))
    assert dist.counts["g05"] == 5
    assert dist.total == 5


def test_ingest_excludes_out_of_period(mini_env, tmp_path):
    lat, lon = mini_env.cells["g05"].centroid
    rows = [("2019-06-01T12:00:00", lat, lon, "", ""),
            ("2018-06-01T12:00:00", lat, lon, "", "")]
    dist = ingest_crimes(mini_env, _crimes_csv(tmp_path, rows),
                         ("2019-01-01T00:00:00", "2019-12-31T23:59:59"))
    assert dist.total == 1
    assert dist.report["out_of_period"] == 1


def test_ingest_unassignable_counted(mini_env, tmp_path):
    rows = [("2019-06-01T12:00:00", 10.0, 10.0, "", "")]
    dist = ingest_crimes(mini_env, _crimes_csv(tmp_path, rows),
                         ("2019-01-01T00:00:00", "2019-12-31T23:59:59"))
    assert dist.total == 0
    assert dist.report["unassigned"] == 1


def test_ingest_conserves_events(mini_env, fixtures_dir):
    dist = ingest_crimes(mini_env, fixtures_dir / "mini_city" / "crimes.csv",
                         ("2019-01-01T00:00:00", "2019-12-31T23:59:59"))
    rep = dist.report
    with open(fixtures_dir / "mini_city" / "crimes.csv", encoding="utf-8") as fh:
        n_records = sum(1 for _ in fh) - 1
    assert rep["assigned"] + rep["unassigned"] + rep["out_of_period"] == n_records
    assert rep["assigned"] == dist.total


def test_ingest_unreadable_source(mini_env, tmp_path):
    with pytest.raises(LoadError):
        ingest_crimes(mini_env, tmp_path / "missing.csv", ("2019-01-01", "2019-12-31"))


def test_extract_hotspots_worked_example():
    counts = {f"g{i}": c for i, c in enumerate([10, 9, 8, 1, 1, 1, 1, 1, 1, 1], start=1)}
    hs = extract_hotspots(CrimeDistribution(counts=counts), alpha=0.2)
    assert list(hs.cell_ids) == ["g1", "g2"]
    assert hs.achieved_coverage == pytest.approx(19 / 34, abs=1e-12)


def test_extract_hotspots_uniform_tie_rule():
    counts = {f"g{i}": 1 for i in range(10)}
    hs = extract_hotspots(CrimeDistribution(counts=counts), alpha=0.2)
    assert list(hs.cell_ids) == ["g0", "g1"]
    assert hs.achieved_coverage == pytest.approx(0.2)


def test_extract_hotspots_zipf_concentration():
    # counts ~ 1/rank: the top 20% of 1000 cells carries >= half the mass
    counts = {f"g{i:04d}": math.ceil(100000 / (i + 1)) for i in range(1000)}
    hs = extract_hotspots(CrimeDistribution(counts=counts), alpha=0.2)
    assert len(hs.cell_ids) == 200
    assert hs.achieved_coverage >= 0.5


def test_extract_hotspots_permutation_invariant():
    rng = np.random.default_rng(5)
    counts = {f"g{i:02d}": int(rng.integers(0, 50)) for i in range(30)}
    items = list(counts.items())
    for seed in range(5):
        np.random.default_rng(seed).shuffle(items)
        hs = extract_hotspots(CrimeDistribution(counts=dict(items)), alpha=0.3)
        assert hs.cell_ids == extract_hotspots(
            CrimeDistribution(counts=counts), alpha=0.3).cell_ids


def test_extract_hotspots_coverage_monotone_in_alpha():
    rng = np.random.default_rng(6)
    counts = {f"g{i:02d}": int(rng.integers(0, 50)) + 1 for i in range(40)}
    dist = CrimeDistribution(counts=counts)
    coverages = [extract_hotspots(dist, a).achieved_coverage
                 for a in (0.1, 0.2, 0.4, 0.6, 0.8, 1.0)]
    assert coverages == sorted(coverages)
    assert coverages[-1] == pytest.approx(1.0)


def test_extract_hotspots_empty_distribution():
    with pytest.raises(MetricError):
        extract_hotspots(CrimeDistribution(counts={"a": 0}), alpha=0.2)


def test_assign_point_idempotent_for_centroids(small_env):
    for cid in small_env.cell_ids:
        lat, lon = small_env.cells[cid].centroid
        assert assign_point(small_env, lat, lon) == cid


def test_features_roundtrip(tmp_path, small_env):
    path = tmp_path / "roundtrip.csv"
    write_features_csv(small_env, path)
    env2 = load_city(path)
    assert env2.cell_ids == small_env.cell_ids
    assert env2.features["g00"].safety_score == small_env.features["g00"].safety_score
