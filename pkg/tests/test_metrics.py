import math

import numpy as np
import pytest

from crimesim.env import CrimeDistribution, haversine_km
from crimesim.errors import MetricError
from crimesim.metrics import (hit_rate, hotspot_crime_ratio, jsd,
                              new_hotspot_concordance, normalize, rmse)

# ---- independent oracles (straight-line formula evaluations kept separate
# ---- from the implementations they check)


def oracle_jsd(p, q):
    kl_pm = sum(p[k] * math.log(p[k] / ((p[k] + q[k]) / 2)) for k in p if p[k] > 0)
    kl_qm = sum(q[k] * math.log(q[k] / ((p[k] + q[k]) / 2)) for k in q if q[k] > 0)
    return 0.5 * kl_pm + 0.5 * kl_qm


def oracle_rmse(p, q):
    return math.sqrt(sum((p[k] - q[k]) ** 2 for k in p) / len(p))


def oracle_hit_rate(real_counts, sim_counts, alpha, k):
    n = len(real_counts)
    budget = math.ceil(alpha * n)
    h_real = [c for c, _ in sorted(real_counts.items(), key=lambda kv: (-kv[1], kv[0]))][:budget]
    top = math.ceil(k * len(h_real))
    h_sim = [c for c, _ in sorted(sim_counts.items(), key=lambda kv: (-kv[1], kv[0]))][:top]
    return len(set(h_real) & set(h_sim)) / len(h_real)


def _dist(counts):
    return CrimeDistribution(counts=counts)


def _norm(counts, support=None):
    return normalize(_dist(counts), support or set(counts))


def test_normalize_shares():
    n = _norm({"A": 3, "B": 1})
    assert n.shares == {"A": 0.75, "B": 0.25}


def test_normalize_fills_missing_cells():
    n = normalize(_dist({"A": 3}), {"A", "B", "C"})
    assert n.shares == {"A": 1.0, "B": 0.0, "C": 0.0}


def test_normalize_zero_total_uniform():
    n = normalize(_dist({"A": 0}), {"A", "B", "C"})
    assert all(v == pytest.approx(1 / 3) for v in n.shares.values())


def test_jsd_identical_zero():
    p = _norm({"A": 2, "B": 2})
    assert jsd(p, p) == 0.0


def test_jsd_disjoint_is_ln2():
    p = normalize(_dist({"A": 1}), {"A", "B"})
    q = normalize(_dist({"B": 1}), {"A", "B"})
    assert jsd(p, q) == pytest.approx(math.log(2), abs=1e-12)


def test_jsd_against_oracle():
    p = _norm({"A": 1, "B": 1})
    q = _norm({"A": 3, "B": 1})
    assert jsd(p, q) == pytest.approx(oracle_jsd(p.shares, q.shares), abs=1e-12)


def test_jsd_symmetric_and_bounded_fuzz():
    rng = np.random.default_rng(17)
    for _ in range(50):
        n = int(rng.integers(2, 12))
        support = {f"c{i}" for i in range(n)}
        a = {c: int(rng.integers(0, 20)) for c in support}
        b = {c: int(rng.integers(0, 20)) for c in support}
        p = normalize(_dist(a), support)
        q = normalize(_dist(b), support)
        d1, d2 = jsd(p, q), jsd(q, p)
        assert d1 == pytest.approx(d2, abs=1e-12)
        assert -1e-15 <= d1 <= math.log(2) + 1e-12
        assert d1 == pytest.approx(oracle_jsd(p.shares, q.shares), abs=1e-12)


def test_jsd_support_mismatch():
    p = _norm({"A": 1})
    q = _norm({"B": 1})
    with pytest.raises(MetricError):
        jsd(p, q)


def test_rmse_examples():
    p = _norm({"A": 1, "B": 1})
    assert rmse(p, p) == 0.0
    q = normalize(_dist({"A": 2}), {"A", "B"})
    assert rmse(p, q) == pytest.approx(0.5, abs=1e-12)


def test_rmse_against_oracle_fuzz():
    rng = np.random.default_rng(23)
    for _ in range(50):
        support = {f"c{i}" for i in range(int(rng.integers(2, 10)))}
        p = normalize(_dist({c: int(rng.integers(0, 9)) for c in support}), support)
        q = normalize(_dist({c: int(rng.integers(0, 9)) for c in support}), support)
        assert rmse(p, q) == pytest.approx(oracle_rmse(p.shares, q.shares), abs=1e-12)


def test_rmse_magnitude_on_large_near_identical():
    # ~1000 cells with small perturbations lands in the 1e-4 regime
    rng = np.random.default_rng(31)
    base = {f"c{i:04d}": 50 + int(rng.integers(0, 10)) for i in range(1000)}
    bumped = {k: v + int(rng.integers(0, 3)) for k, v in base.items()}
    support = set(base)
    value = rmse(normalize(_dist(base), support), normalize(_dist(bumped), support))
    assert 1e-6 < value < 1e-3


def test_hit_rate_worked_example():
    real = {f"g{i:02d}": c for i, c in enumerate([10, 9, 8, 1, 1, 1, 1, 1, 1, 1], start=1)}
    sim = {f"g{i:02d}": c for i, c in enumerate([2, 9, 8, 7, 1, 0, 0, 0, 0, 0], start=1)}
    assert hit_rate(_dist(real), _dist(sim), alpha=0.2, k=1.0) == pytest.approx(0.5)
    assert hit_rate(_dist(real), _dist(sim), alpha=0.2, k=2.0) == pytest.approx(1.0)
    assert oracle_hit_rate(real, sim, 0.2, 1.0) == pytest.approx(0.5)
    assert oracle_hit_rate(real, sim, 0.2, 2.0) == pytest.approx(1.0)


def test_hit_rate_identity():
    real = {f"g{i}": i + 1 for i in range(10)}
    assert hit_rate(_dist(real), _dist(real), alpha=0.2, k=1.0) == 1.0


def test_hit_rate_uniform_sim_uses_tie_rule():
    real = {f"g{i:02d}": c for i, c in enumerate([10, 9, 8, 1, 1, 1, 1, 1, 1, 1], start=1)}
    sim = {f"g{i:02d}": 1 for i in range(1, 11)}
    # top-2 simulated cells by the tie rule are g01, g02 = the real hotspots
    assert hit_rate(_dist(real), _dist(sim), alpha=0.2, k=1.0) == pytest.approx(1.0)
    assert oracle_hit_rate(real, sim, 0.2, 1.0) == pytest.approx(1.0)


def test_hit_rate_rescaling_invariance_and_k_monotone():
    rng = np.random.default_rng(41)
    for _ in range(20):
        support = [f"c{i:02d}" for i in range(12)]
        real = {c: int(rng.integers(0, 30)) + 1 for c in support}
        sim = {c: int(rng.integers(0, 30)) for c in support}
        scaled = {c: v * 7 for c, v in sim.items()}
        hrs = [hit_rate(_dist(real), _dist(sim), 0.25, k) for k in (1.0, 1.5, 2.0, 3.0)]
        hrs_scaled = [hit_rate(_dist(real), _dist(scaled), 0.25, k) for k in (1.0, 1.5, 2.0, 3.0)]
        assert hrs == hrs_scaled
        assert hrs == sorted(hrs)


def test_hit_rate_rejects_bad_params():
    real = _dist({"a": 1, "b": 2})
    with pytest.raises(MetricError):
        hit_rate(real, real, alpha=0.0, k=1.0)
    with pytest.raises(MetricError):
        hit_rate(real, real, alpha=0.2, k=0.0)


def test_nhc_vacuous_case():
    base = _dist({f"g{i}": c for i, c in enumerate([5, 4, 1, 1, 1])})
    assert new_hotspot_concordance(base, base, base, base, alpha=0.2) == 1.0


def test_nhc_single_emergent_match():
    # event period promotes g4 into the hotspot set in both real and sim
    real_base = _dist({"g0": 9, "g1": 8, "g2": 1, "g3": 1, "g4": 1,
                       "g5": 1, "g6": 1, "g7": 1, "g8": 1, "g9": 1})
    real_event = _dist({"g0": 9, "g1": 1, "g2": 1, "g3": 1, "g4": 8,
                        "g5": 1, "g6": 1, "g7": 1, "g8": 1, "g9": 1})
    assert new_hotspot_concordance(real_base, real_event, real_base, real_event,
                                   alpha=0.2) == 1.0


def test_nhc_half_overlap():
    # real gains {g4, g5}; sim gains {g4, g6} -> 1/2
    def counts(top):
        base = {f"g{i}": 1 for i in range(10)}
        for i, cell in enumerate(top):
            base[cell] = 20 - i
        return base

    real_base = _dist(counts(["g0", "g1", "g2"]))
    real_event = _dist(counts(["g0", "g4", "g5"]))
    sim_base = _dist(counts(["g0", "g1", "g2"]))
    sim_event = _dist(counts(["g0", "g4", "g6"]))
    assert new_hotspot_concordance(real_base, real_event, sim_base, sim_event,
                                   alpha=0.3) == pytest.approx(0.5)


def test_hotspot_crime_ratio_examples():
    counts = {f"g{i:02d}": c for i, c in enumerate([10, 9, 8, 1, 1, 1, 1, 1, 1, 1], start=1)}
    assert hotspot_crime_ratio(_dist(counts), 0.2) == pytest.approx(19 / 34)
    uniform = {f"g{i}": 3 for i in range(10)}
    assert hotspot_crime_ratio(_dist(uniform), 0.2) == pytest.approx(0.2)
    solo = {"a": 7, "b": 0, "c": 0}
    assert hotspot_crime_ratio(_dist(solo), 0.34) == 1.0


def test_hotspot_crime_ratio_at_least_alpha_fuzz():
    rng = np.random.default_rng(47)
    for _ in range(30):
        counts = {f"c{i:02d}": int(rng.integers(0, 40)) for i in range(20)}
        counts["c00"] += 1  # keep the total positive
        for alpha in (0.1, 0.25, 0.5):
            ratio = hotspot_crime_ratio(_dist(counts), alpha)
            assert ratio >= alpha - 1e-12


def test_haversine_known_distance():
    # one hundredth of a degree of latitude at fixed longitude
    assert haversine_km(41.88, -87.63, 41.89, -87.63) == pytest.approx(1.1119, abs=2e-4)


def test_mean_residence_crime_distance():
    from crimesim.metrics import mean_residence_crime_distance
    from crimesim.population import Agent, AgentProfile, AgentState, Population
    from crimesim.simulation import CrimeEvent
    from crimesim.synth import synthetic_city

    env = synthetic_city(16, seed=5)
    pop = Population([
        Agent(AgentProfile("crm_a", "criminal", "male", "white", "g00"),
              AgentState(location="g00", visit_counts={"g00": 1})),
        Agent(AgentProfile("crm_b", "criminal", "male", "white", "g00"),
              AgentState(location="g01", visit_counts={"g01": 1})),
    ], env.cell_ids)

    at_home = [CrimeEvent(1, "g00", "crm_a", "t1")]
    assert mean_residence_crime_distance(at_home, pop, env) == 0.0

    away = [CrimeEvent(1, "g01", "crm_b", "property@g01")]
    expected = env.distance_km("g00", "g01")
    got = mean_residence_crime_distance(away, pop, env)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(1.0, abs=0.05)  # one lattice step ~0.012 deg lon

    both = at_home + away
    assert mean_residence_crime_distance(both, pop, env) == pytest.approx(expected / 2)

    with pytest.raises(MetricError):
        mean_residence_crime_distance([], pop, env)
