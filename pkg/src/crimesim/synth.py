"""Deterministic synthetic fixture cities.

Builds grid-lattice environments with heterogeneous demographics so the
full pipeline can run without any proprietary city data. Identical
(n_cells, seed) inputs produce byte-identical cities.
"""
from __future__ import annotations

import csv
import json
import math

from .env import CityEnvironment, GridCell, FeatureBundle, LoadReport, _knn_adjacency
from .seeding import substream

import numpy as np

RACE_LABELS = ("asian", "black", "hispanic", "white")
POI_LABELS = ("food", "retail", "transit")

DESCRIPTOR_POOL = (
    "well-kept storefronts", "dim lighting after dusk", "graffiti on side streets",
    "busy foot traffic", "vacant lots", "tree-lined blocks", "boarded windows",
    "active shopfronts", "quiet residential streets", "poorly maintained facades",
)

DEFAULT_METADATA = {
    "city": "Synthville",
    "mayor": "J. Ortega",
    "party": "Independent",
    "strategy": "community-first policing with targeted patrols",
}

LAT0, LON0, SPACING = 41.60, -87.90, 0.012


def synthetic_city(n_cells, seed=0, name="synthville", boundaries=False, metadata=None,
                   adjacency=True):
    """A lattice city of `n_cells` with seeded heterogeneous features.

    With boundaries=True every cell gets a square ring sharing exact
    corner coordinates with its lattice neighbors, so polygon adjacency
    and point-in-polygon assignment are exercised. adjacency=False skips
    the nearest-neighbor graph (it costs n^2 log n) for workloads that
    never consult cell neighbors.
    """
    side = math.ceil(math.sqrt(n_cells))
    rng = substream(seed, "synth-city", n_cells)
    # corner grids are shared between adjacent cells so polygon edges
    # match exactly in float arithmetic
    lat_corners = [LAT0 - SPACING / 2 + SPACING * r for r in range(side + 1)]
    lon_corners = [LON0 - SPACING / 2 + SPACING * c for c in range(side + 1)]

    width = len(str(n_cells - 1))
    cells, feats = {}, {}
    rings = {}
    for i in range(n_cells):
        r, c = divmod(i, side)
        cid = f"g{i:0{width}d}"
        centroid = (LAT0 + SPACING * r, LON0 + SPACING * c)
        if boundaries:
            ring = (
                (lat_corners[r], lon_corners[c]),
                (lat_corners[r], lon_corners[c + 1]),
                (lat_corners[r + 1], lon_corners[c + 1]),
                (lat_corners[r + 1], lon_corners[c]),
                (lat_corners[r], lon_corners[c]),
            )
            rings[cid] = ring
        population = int(rng.lognormal(mean=6.8, sigma=0.9)) + 50
        income = float(np.round(rng.lognormal(mean=10.9, sigma=0.45), 2))
        poverty = float(np.round(min(0.95, max(0.0, rng.beta(2.0, 5.0))), 4))
        housing = float(np.round(income * rng.uniform(3.0, 5.0), 2))
        race = rng.dirichlet([2.0, 2.0, 1.5, 3.0])
        race_comp = {label: float(np.round(x, 6)) for label, x in zip(RACE_LABELS, race)}
        drift = 1.0 - sum(race_comp.values())
        race_comp["white"] = float(np.round(race_comp["white"] + drift, 6))
        gender = float(np.round(rng.uniform(0.46, 0.54), 4))
        poi_count = int(rng.poisson(12))
        poi_cats = {label: int(rng.poisson(4)) for label in POI_LABELS}
        safety = float(np.round(min(0.98, max(0.02, rng.beta(3.0, 2.0) - 0.35 * poverty)), 4))
        k = int(rng.integers(2, 4))
        picks = rng.choice(len(DESCRIPTOR_POOL), size=k, replace=False)
        desc = ", ".join(DESCRIPTOR_POOL[int(p)] for p in sorted(picks))
        feats[cid] = FeatureBundle(
            population=population, average_income=income, poverty_ratio=poverty,
            housing_value=housing, race_composition=race_comp, gender_ratio=gender,
            poi_count=poi_count, poi_categories=poi_cats, safety_score=safety,
            semantic_description=desc,
        )
        cells[cid] = centroid

    cell_ids = sorted(cells)
    if not adjacency:
        adj = {cid: set() for cid in cell_ids}
    elif boundaries:
        adj = {cid: set() for cid in cell_ids}
        for i in range(n_cells):
            r, c = divmod(i, side)
            cid = f"g{i:0{width}d}"
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                j = rr * side + cc
                if 0 <= rr < side and 0 <= cc < side and 0 <= j < n_cells:
                    adj[cid].add(f"g{j:0{width}d}")
    else:
        cents = np.array([cells[c] for c in cell_ids])
        adj = _knn_adjacency(cell_ids, cents)

    grid = {
        cid: GridCell(id=cid, centroid=cells[cid], boundary=rings.get(cid),
                      neighbors=frozenset(adj[cid]))
        for cid in cell_ids
    }
    report = LoadReport(rows_total=n_cells, cells_loaded=n_cells)
    return CityEnvironment(grid, feats, name=name,
                           metadata=dict(metadata or DEFAULT_METADATA),
                           load_report=report)


def write_features_csv(env, path):
    """Dump an environment to the features-file wire format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "cell_id", "lat", "lon", "population", "average_income", "poverty_ratio",
            "housing_value", "race_json", "gender_ratio", "poi_count",
            "poi_categories_json", "safety_score", "semantic_description",
        ])
        for cid in env.cell_ids:
            f = env.features[cid]
            lat, lon = env.cells[cid].centroid
            writer.writerow([
                cid, repr(lat), repr(lon), f.population, repr(f.average_income),
                repr(f.poverty_ratio), repr(f.housing_value),
                json.dumps(f.race_composition, sort_keys=True), repr(f.gender_ratio),
                f.poi_count, json.dumps(f.poi_categories, sort_keys=True),
                repr(f.safety_score), f.semantic_description,
            ])


def write_boundaries_geojson(env, path):
    """Dump cell rings as a GeoJSON FeatureCollection keyed by cell_id."""
    features = []
    for cid in env.cell_ids:
        ring = env.cells[cid].boundary
        if ring is None:
            continue
        features.append({
            "type": "Feature",
            "properties": {"cell_id": cid},
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[lon, lat] for lat, lon in ring]],
            },
        })
    doc = {"type": "FeatureCollection", "features": features}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
