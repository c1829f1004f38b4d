"""Evaluation metrics comparing simulated and observed crime distributions.

All comparisons run on normalized per-cell shares over a shared support:
divergence (JSD, natural log), absolute error (RMSE), hotspot recovery
(HR@K), counterfactual hotspot emergence (new-hotspot concordance), and
the case-study residence-to-crime distance. Everything here is pure and
thread-safe.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .env import extract_hotspots, haversine_km
from .errors import MetricError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class NormalizedDistribution:
    """Per-cell crime shares over an explicit support; shares sum to 1."""

    shares: dict
    support: frozenset

    def __post_init__(self):
        if set(self.shares) != set(self.support):
            raise MetricError("shares must be keyed exactly by the support")
        if any(s < 0 for s in self.shares.values()):
            raise MetricError("shares must be non-negative")
        if abs(sum(self.shares.values()) - 1.0) > 1e-9:
            raise MetricError("shares must sum to 1")


@dataclass
class EvaluationReport:
    """Bundle of metric values for one sim-vs-real comparison."""

    hr: dict = field(default_factory=dict)  # K -> hit rate
    jsd: float | None = None
    rmse: float | None = None
    hotspot_crime_ratio: float | None = None
    nhc: float | None = None
    mean_distance_km: float | None = None
    alpha: float | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "hr": {str(k): v for k, v in sorted(self.hr.items())},
            "jsd": self.jsd,
            "rmse": self.rmse,
            "hotspot_crime_ratio": self.hotspot_crime_ratio,
            "alpha": self.alpha,
        }
        if self.nhc is not None:
            out["nhc"] = self.nhc
        if self.mean_distance_km is not None:
            out["mean_distance_km"] = self.mean_distance_km
        if self.notes:
            out["notes"] = dict(self.notes)
        return out


def normalize(dist, support):
    """Counts -> shares over `support`; cells absent from the counts get
    share 0. An all-zero distribution normalizes to uniform."""
    support = frozenset(support)
    if not support:
        raise MetricError("support must be non-empty")
    total = sum(dist.counts.get(cid, 0) for cid in support)
    if total <= 0:
        u = 1.0 / len(support)
        return NormalizedDistribution({cid: u for cid in support}, support)
    return NormalizedDistribution(
        {cid: dist.counts.get(cid, 0) / total for cid in support}, support
    )


def _check_support(p, q):
    if p.support != q.support:
        raise MetricError("distributions must share the same support")


def jsd(p, q):
    """Jensen-Shannon divergence, natural log, with 0*log(0) == 0.

    Bounded by ln 2; symmetric in its arguments.
    """
    _check_support(p, q)
    total = 0.0
    for cid in p.support:
        pi, qi = p.shares[cid], q.shares[cid]
        m = 0.5 * (pi + qi)
        if pi > 0.0:
            total += 0.5 * pi * math.log(pi / m)
        if qi > 0.0:
            total += 0.5 * qi * math.log(qi / m)
    return total


def rmse(p, q):
    """Root mean squared error between normalized shares."""
    _check_support(p, q)
    n = len(p.support)
    sq = sum((p.shares[cid] - q.shares[cid]) ** 2 for cid in p.support)
    return math.sqrt(sq / n)


def _top_cells(counts, k):
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [cid for cid, _ in ranked[:k]]


def hit_rate(real, sim, alpha, k):
    """Fraction of real hotspots recovered in the top ceil(k*|H_real|)
    simulated cells. Rank-only in the sim counts; ties go to the
    ascending cell id."""
    if alpha <= 0 or k <= 0:
        raise MetricError("alpha and K must be positive")
    h_real = set(extract_hotspots(real, alpha).cell_ids)
    budget = math.ceil(k * len(h_real))
    h_sim = set(_top_cells(sim.counts, budget))
    return len(h_real & h_sim) / len(h_real)


def new_hotspot_concordance(real_base, real_event, sim_base, sim_event, alpha):
    """Overlap between hotspots newly emerging in the real event period and
    those newly emerging in simulation.

    With no newly-emerged real hotspots the value is 1 when the simulation
    also gained none, else 0.
    """
    if alpha <= 0:
        raise MetricError("alpha must be positive")
    new_real = set(extract_hotspots(real_event, alpha).cell_ids) - set(
        extract_hotspots(real_base, alpha).cell_ids
    )
    new_sim = set(extract_hotspots(sim_event, alpha).cell_ids) - set(
        extract_hotspots(sim_base, alpha).cell_ids
    )
    if not new_real:
        return 1.0 if not new_sim else 0.0
    return len(new_real & new_sim) / len(new_real)


def hotspot_crime_ratio(dist, alpha):
    """Share of total crime inside the top-alpha hotspot cells."""
    return extract_hotspots(dist, alpha).achieved_coverage


def mean_residence_crime_distance(events, population, env):
    """Mean haversine distance (km) between each crime's cell centroid and
    the offending agent's residence centroid."""
    if not events:
        raise MetricError("no events: mean distance undefined")
    total = 0.0
    for ev in events:
        agent = population.agents[ev.criminal_id]
        (la1, lo1) = env.cells[ev.cell_id].centroid
        (la2, lo2) = env.cells[agent.profile.residence].centroid
        total += haversine_km(la1, lo1, la2, lo2)
    return total / len(events)


def evaluate(real, sim, alpha=0.2, ks=(1.0, 1.5, 2.0), support=None,
             events=None, population=None, env=None):
    """Full evaluation of a simulated distribution against ground truth."""
    if support is None:
        support = real.support | sim.support
    p = normalize(real, support)
    q = normalize(sim, support)
    report = EvaluationReport(alpha=alpha)
    report.jsd = jsd(p, q)
    report.rmse = rmse(p, q)
    report.hr = {float(k): hit_rate(real, sim, alpha, float(k)) for k in ks}
    report.hotspot_crime_ratio = hotspot_crime_ratio(sim, alpha)
    report.notes["hotspot_budget_rounding"] = "ceil"
    if events and population is not None and env is not None:
        report.mean_distance_km = mean_residence_crime_distance(events, population, env)
    return report


def write_comparison_csv(path, real, sim, alpha=0.2, support=None):
    """Per-cell comparison table: shares plus hotspot membership flags."""
    if support is None:
        support = real.support | sim.support
    p = normalize(real, support)
    q = normalize(sim, support)
    h_real = set(extract_hotspots(real, alpha).cell_ids)
    h_sim = set(extract_hotspots(sim, alpha).cell_ids)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "real_share", "sim_share", "in_real_hotspot", "in_sim_hotspot"])
        for cid in sorted(support):
            writer.writerow([
                cid, f"{p.shares[cid]:.10g}", f"{q.shares[cid]:.10g}",
                int(cid in h_real), int(cid in h_sim),
            ])
