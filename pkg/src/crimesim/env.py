"""Discretized urban environment: grid cells, static features, spatial
assignment, crime ingestion, and hotspot extraction.

The environment is immutable after load and safe for concurrent reads.
Cells are Census-Block-Group-like regions identified by opaque id
strings; all geometry is WGS84 lat/lon.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import InputError, LoadError, MetricError

EARTH_RADIUS_KM = 6371.0088

# Nearest-centroid assignment gives up beyond this distance so offshore
# points do not pollute edge cells.
DEFAULT_CUTOFF_KM = 2.0

# Fallback adjacency when no polygons are available.
KNN_NEIGHBORS = 8

FEATURE_COLUMNS = [
    "cell_id", "lat", "lon", "population", "average_income", "poverty_ratio",
    "housing_value", "race_json", "gender_ratio", "poi_count",
    "poi_categories_json", "safety_score", "semantic_description",
]


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in kilometers."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class GridCell:
    """One grid region: id, centroid, optional boundary ring, adjacency."""

    id: str
    centroid: tuple  # (lat, lon)
    boundary: tuple | None = None  # closed ring of (lat, lon), >= 4 vertices
    neighbors: frozenset = frozenset()


@dataclass(frozen=True)
class FeatureBundle:
    """Static per-cell features feeding agent initialization and decisions."""

    population: int
    average_income: float
    poverty_ratio: float
    housing_value: float
    race_composition: dict
    gender_ratio: float
    poi_count: int
    poi_categories: dict
    safety_score: float
    semantic_description: str


@dataclass
class LoadReport:
    """What load_city kept, dropped, and skipped."""

    rows_total: int = 0
    cells_loaded: int = 0
    dropped_missing_safety: list = field(default_factory=list)
    boundaries_skipped: list = field(default_factory=list)

    def to_dict(self):
        return {
            "rows_total": self.rows_total,
            "cells_loaded": self.cells_loaded,
            "dropped_missing_safety": list(self.dropped_missing_safety),
            "boundaries_skipped": list(self.boundaries_skipped),
        }


class CityEnvironment:
    """Immutable city grid with features and cached pairwise geometry."""

    def __init__(self, cells, features, name="city", metadata=None, load_report=None):
        self.cells = dict(cells)
        self.features = dict(features)
        if set(self.cells) != set(self.features):
            raise LoadError("features must be keyed exactly by the cell-id set")
        self.name = name
        self.metadata = dict(metadata or {})
        self.load_report = load_report or LoadReport()
        self.cell_ids = tuple(sorted(self.cells))
        self.index = {cid: i for i, cid in enumerate(self.cell_ids)}
        self.centroids = np.array(
            [self.cells[cid].centroid for cid in self.cell_ids], dtype=np.float64
        ).reshape(len(self.cell_ids), 2)
        self._dist_matrix = None
        self._inv_sq = None

    @property
    def n_cells(self):
        return len(self.cell_ids)

    @property
    def has_boundaries(self):
        return any(c.boundary is not None for c in self.cells.values())

    def distance_matrix(self):
        """Pairwise centroid haversine distances (km), cached."""
        if self._dist_matrix is None:
            lat = np.radians(self.centroids[:, 0])[:, None]
            lon = np.radians(self.centroids[:, 1])[:, None]
            dlat = lat - lat.T
            dlon = lon - lon.T
            a = np.sin(dlat / 2.0) ** 2 + np.cos(lat) * np.cos(lat.T) * np.sin(dlon / 2.0) ** 2
            self._dist_matrix = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(a)))
        return self._dist_matrix

    def inv_sq_distance(self):
        """1/d^2 kernel over centroid distances, self-distance weight 0."""
        if self._inv_sq is None:
            d = self.distance_matrix()
            with np.errstate(divide="ignore"):
                inv = 1.0 / (d * d)
            inv[~np.isfinite(inv)] = 0.0
            self._inv_sq = inv
        return self._inv_sq

    def distance_km(self, a, b):
        (la1, lo1), (la2, lo2) = self.cells[a].centroid, self.cells[b].centroid
        return haversine_km(la1, lo1, la2, lo2)


@dataclass
class CrimeDistribution:
    """Per-cell event counts over a period. Counts may include zeros; the
    key set is the distribution's support."""

    counts: dict
    period: tuple = (None, None)
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        for cid, c in self.counts.items():
            if c < 0 or int(c) != c:
                raise InputError(f"count for cell {cid} must be a non-negative integer")
        self.counts = {cid: int(c) for cid, c in self.counts.items()}

    @property
    def total(self):
        return sum(self.counts.values())

    @property
    def support(self):
        return frozenset(self.counts)

    def to_dict(self):
        period = [t.isoformat() if isinstance(t, datetime) else t for t in self.period]
        return {"counts": dict(sorted(self.counts.items())), "period": period,
                "total": self.total, "report": dict(self.report)}

    @classmethod
    def from_dict(cls, d):
        return cls(counts=dict(d["counts"]), period=tuple(d.get("period") or (None, None)),
                   report=dict(d.get("report") or {}))


@dataclass(frozen=True)
class HotspotSet:
    """Top cells by crime count: the ordered ids, the alpha used, and the
    crime share they actually cover."""

    cell_ids: tuple
    alpha: float
    achieved_coverage: float


def _parse_row(row, line_no):
    def fail(fieldname, why):
        raise LoadError(f"row {line_no}: field '{fieldname}' {why}")

    cid = (row.get("cell_id") or "").strip()
    if not cid:
        fail("cell_id", "is empty")
    try:
        lat, lon = float(row["lat"]), float(row["lon"])
    except (TypeError, ValueError, KeyError):
        fail("lat/lon", "is not a number")
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        fail("lat/lon", "is out of range")

    raw_safety = (row.get("safety_score") or "").strip()
    if raw_safety == "":
        return cid, (lat, lon), None  # dropped by caller, counted in report

    def num(fieldname, cast=float, lo=None, hi=None):
        try:
            v = cast(float(row[fieldname]))
        except (TypeError, ValueError, KeyError):
            fail(fieldname, "is not a number")
        if lo is not None and v < lo:
            fail(fieldname, f"must be >= {lo}")
        if hi is not None and v > hi:
            fail(fieldname, f"must be <= {hi}")
        return v

    def parse_json(fieldname):
        try:
            return json.loads(row[fieldname])
        except (TypeError, ValueError, KeyError):
            fail(fieldname, "is not valid JSON")

    race = parse_json("race_json")
    if race and abs(sum(race.values()) - 1.0) > 1e-6:
        fail("race_json", "fractions must sum to 1")
    bundle = FeatureBundle(
        population=num("population", int, lo=0),
        average_income=num("average_income"),
        poverty_ratio=num("poverty_ratio", lo=0.0, hi=1.0),
        housing_value=num("housing_value"),
        race_composition=race,
        gender_ratio=num("gender_ratio", lo=0.0, hi=1.0),
        poi_count=num("poi_count", int, lo=0),
        poi_categories=parse_json("poi_categories_json"),
        safety_score=num("safety_score", lo=0.0, hi=1.0),
        semantic_description=row.get("semantic_description") or "",
    )
    return cid, (lat, lon), bundle


def _validate_ring(ring, cid):
    if len(ring) < 4:
        raise LoadError(f"boundary for cell {cid}: ring must have >= 4 vertices")
    if ring[0] != ring[-1]:
        raise LoadError(f"boundary for cell {cid}: ring must be closed")


def _load_boundaries(path):
    """GeoJSON FeatureCollection keyed by property cell_id -> lat/lon ring."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    rings = {}
    for feat in doc.get("features", []):
        cid = str((feat.get("properties") or {}).get("cell_id", "")).strip()
        geom = feat.get("geometry") or {}
        if not cid or geom.get("type") != "Polygon":
            continue
        ring = tuple((float(lat), float(lon)) for lon, lat in geom["coordinates"][0])
        _validate_ring(ring, cid)
        rings[cid] = ring
    return rings


def _shared_edge_adjacency(boundaries):
    edge_owners = {}
    for cid, ring in boundaries.items():
        for a, b in zip(ring[:-1], ring[1:]):
            key = frozenset((a, b))
            edge_owners.setdefault(key, set()).add(cid)
    adj = {cid: set() for cid in boundaries}
    for owners in edge_owners.values():
        for a in owners:
            for b in owners:
                if a != b:
                    adj[a].add(b)
    return adj


def _knn_adjacency(cell_ids, centroids, k=KNN_NEIGHBORS):
    n = len(cell_ids)
    adj = {cid: set() for cid in cell_ids}
    if n <= 1:
        return adj
    lat = np.radians(centroids[:, 0])[:, None]
    lon = np.radians(centroids[:, 1])[:, None]
    a = np.sin((lat - lat.T) / 2.0) ** 2 + np.cos(lat) * np.cos(lat.T) * np.sin((lon - lon.T) / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(a)))
    np.fill_diagonal(d, np.inf)
    kk = min(k, n - 1)
    for i, cid in enumerate(cell_ids):
        order = np.argsort(d[i], kind="stable")[:kk]
        for j in order:
            adj[cid].add(cell_ids[j])
            adj[cell_ids[j]].add(cid)  # keep the relation symmetric
    return adj


def load_city(features_source, boundaries_source=None, name=None, metadata=None):
    """Build a CityEnvironment from a features CSV and optional GeoJSON
    boundaries.

    Rows missing safety_score are dropped and listed in env.load_report
    (cells without street-level coverage are excluded from simulation).
    Adjacency comes from shared polygon edges when boundaries are given,
    else from the 8 nearest centroids.
    """
    report = LoadReport()
    centroids, bundles = {}, {}
    try:
        fh = open(features_source, encoding="utf-8", newline="")
    except OSError as exc:
        raise LoadError(f"cannot read features file: {features_source}") from exc
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in FEATURE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise LoadError(f"features file missing columns: {', '.join(missing)}")
        for line_no, row in enumerate(reader, start=2):
            report.rows_total += 1
            cid, centroid, bundle = _parse_row(row, line_no)
            if cid in centroids:
                raise LoadError(f"row {line_no}: duplicate cell id '{cid}'")
            if bundle is None:
                report.dropped_missing_safety.append(cid)
                continue
            centroids[cid] = centroid
            bundles[cid] = bundle

    boundaries = {}
    if boundaries_source is not None:
        for cid, ring in _load_boundaries(boundaries_source).items():
            if cid not in centroids:
                warnings.warn(f"boundary for unknown cell '{cid}' skipped")
                report.boundaries_skipped.append(cid)
                continue
            boundaries[cid] = ring

    cell_ids = sorted(centroids)
    if boundaries:
        adj = _shared_edge_adjacency(boundaries)
        for cid in cell_ids:
            adj.setdefault(cid, set())
    else:
        cents = np.array([centroids[c] for c in cell_ids], dtype=np.float64).reshape(-1, 2)
        adj = _knn_adjacency(cell_ids, cents)

    cells = {
        cid: GridCell(
            id=cid,
            centroid=centroids[cid],
            boundary=boundaries.get(cid),
            neighbors=frozenset(adj.get(cid, ())),
        )
        for cid in cell_ids
    }
    report.cells_loaded = len(cells)
    if name is None:
        name = str(features_source).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return CityEnvironment(cells, bundles, name=name, metadata=metadata, load_report=report)


def _point_on_segment(lat, lon, a, b, eps=1e-12):
    (la1, lo1), (la2, lo2) = a, b
    cross = (lo2 - lo1) * (lat - la1) - (la2 - la1) * (lon - lo1)
    if abs(cross) > eps:
        return False
    return (min(la1, la2) - eps <= lat <= max(la1, la2) + eps
            and min(lo1, lo2) - eps <= lon <= max(lo1, lo2) + eps)


def point_in_ring(lat, lon, ring):
    """Ray-casting containment with a boundary-inclusive convention."""
    inside = False
    for a, b in zip(ring[:-1], ring[1:]):
        if _point_on_segment(lat, lon, a, b):
            return True
        (la1, lo1), (la2, lo2) = a, b
        if (la1 > lat) != (la2 > lat):
            x = lo1 + (lat - la1) * (lo2 - lo1) / (la2 - la1)
            if lon < x:
                inside = not inside
    return inside


def assign_point(env, lat, lon, cutoff_km=DEFAULT_CUTOFF_KM):
    """Map a coordinate onto a cell id, or None when it falls outside.

    Uses point-in-polygon when boundaries exist (first containing cell in
    id order), else the nearest centroid within cutoff_km; exact distance
    ties go to the lexicographically smaller cell id.
    """
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise InputError("coordinates must be finite")
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise InputError("coordinates out of WGS84 range")
    if env.has_boundaries:
        for cid in env.cell_ids:
            ring = env.cells[cid].boundary
            if ring is not None and point_in_ring(lat, lon, ring):
                return cid
        return None
    dists = np.array(
        [haversine_km(lat, lon, clat, clon) for clat, clon in env.centroids]
    )
    dmin = dists.min() if dists.size else math.inf
    if dmin > cutoff_km:
        return None
    candidates = [env.cell_ids[i] for i in np.flatnonzero(dists == dmin)]
    return min(candidates)


def _parse_ts(value):
    try:
        ts = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    except ValueError as exc:
        raise LoadError(f"bad timestamp '{value}'") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def ingest_crimes(env, records_source, period):
    """Aggregate a crime-record CSV into a per-cell CrimeDistribution.

    Records carry timestamp_iso8601, lat, lon and optionally cell_id and
    category. Events are kept when start <= t <= end (inclusive). Counts
    cover every env cell (zeros included); unassignable and out-of-period
    events are tallied in the report.
    """
    start, end = (_parse_ts(period[0]), _parse_ts(period[1]))
    counts = {cid: 0 for cid in env.cell_ids}
    unassigned = out_of_period = assigned = 0
    try:
        fh = open(records_source, encoding="utf-8", newline="")
    except OSError as exc:
        raise LoadError(f"cannot read crime records: {records_source}") from exc
    with fh:
        reader = csv.DictReader(fh)
        for row in reader:
            ts = _parse_ts(row.get("timestamp_iso8601"))
            if not (start <= ts <= end):
                out_of_period += 1
                continue
            cid = (row.get("cell_id") or "").strip() or None
            if cid is not None and cid not in counts:
                cid = None
            if cid is None:
                raw_lat, raw_lon = row.get("lat"), row.get("lon")
                try:
                    cid = assign_point(env, float(raw_lat), float(raw_lon))
                except (TypeError, ValueError, InputError):
                    cid = None
            if cid is None:
                unassigned += 1
                continue
            counts[cid] += 1
            assigned += 1
    report = {"assigned": assigned, "unassigned": unassigned, "out_of_period": out_of_period}
    return CrimeDistribution(counts=counts, period=(start, end), report=report)


def extract_hotspots(dist, alpha, n_cells=None):
    """Top ceil(alpha*N) cells by count, ties broken by ascending cell id.

    The returned achieved_coverage is the crime share those cells carry
    (the observed counterpart of a target coverage fraction).
    """
    if not 0.0 < alpha <= 1.0:
        raise MetricError("alpha must be in (0, 1]")
    total = dist.total
    if total <= 0:
        raise MetricError("cannot extract hotspots from an empty distribution")
    n = n_cells if n_cells is not None else len(dist.counts)
    k = math.ceil(alpha * n)
    ranked = sorted(dist.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    chosen = tuple(cid for cid, _ in ranked[:k])
    covered = sum(dist.counts[cid] for cid in chosen)
    return HotspotSet(cell_ids=chosen, alpha=alpha, achieved_coverage=covered / total)
