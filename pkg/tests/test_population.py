import math

import pytest

from crimesim.env import CityEnvironment, FeatureBundle, GridCell
from crimesim.errors import InputError
from crimesim.population import (Agent, AgentProfile, AgentState, Population,
                                 colocated, dump_lines, dump_jsonl, restore_jsonl,
                                 sample_population)


def _two_cell_env(pop_a=90, pop_b=10):
    def bundle(pop):
        return FeatureBundle(population=pop, average_income=50000, poverty_ratio=0.2,
                             housing_value=200000, race_composition={"white": 0.6, "black": 0.4},
                             gender_ratio=0.5, poi_count=3, poi_categories={"food": 1},
                             safety_score=0.5, semantic_description="blocks")

    cells = {
        "A": GridCell(id="A", centroid=(41.0, -87.0), neighbors=frozenset({"B"})),
        "B": GridCell(id="B", centroid=(41.01, -87.0), neighbors=frozenset({"A"})),
    }
    return CityEnvironment(cells, {"A": bundle(pop_a), "B": bundle(pop_b)}, name="two")


def test_residences_follow_population_within_3_sigma():
    env = _two_cell_env(90, 10)
    pop = sample_population(env, {"citizens": 1000, "criminals": 1, "police": 1}, seed=7)
    in_a = sum(1 for a in pop.by_kind("citizen") if a.profile.residence == "A")
    # binomial n=1000 p=0.9: sigma = sqrt(n p (1-p)) ~ 9.4868
    sigma = math.sqrt(1000 * 0.9 * 0.1)
    assert abs(in_a - 900) <= 3 * sigma


def test_sampling_deterministic():
    env = _two_cell_env()
    counts = {"citizens": 50, "criminals": 10, "police": 5}
    a = sample_population(env, counts, seed=21)
    b = sample_population(env, counts, seed=21)
    assert dump_lines(a) == dump_lines(b)
    c = sample_population(env, counts, seed=22)
    assert dump_lines(a) != dump_lines(c)


def test_zero_citizens_rejected():
    env = _two_cell_env()
    with pytest.raises(InputError):
        sample_population(env, {"citizens": 0, "criminals": 1, "police": 1}, seed=1)


def test_zero_total_population_rejected():
    env = _two_cell_env(0, 0)
    with pytest.raises(InputError):
        sample_population(env, {"citizens": 1, "criminals": 1, "police": 1}, seed=1)


def test_counts_match_kind_tallies():
    env = _two_cell_env()
    pop = sample_population(env, {"citizens": 12, "criminals": 4, "police": 3}, seed=3)
    assert pop.counts == {"citizens": 12, "criminals": 4, "police": 3}
    assert all(len(a.profile.criminal_record) <= 3 for a in pop.by_kind("criminal"))
    assert all(a.state.visit_counts == {a.profile.residence: 1}
               for a in pop.agents.values())


def _manual_population():
    agents = [
        Agent(AgentProfile("cit_1", "citizen", "female", "white", "A"),
              AgentState(location="A", visit_counts={"A": 1})),
        Agent(AgentProfile("crm_1", "criminal", "male", "black", "B"),
              AgentState(location="B", visit_counts={"B": 1})),
        Agent(AgentProfile("pol_1", "police", "male", "white", "A"),
              AgentState(location="A", visit_counts={"A": 1})),
    ]
    return Population(agents, {"A", "B"})


def test_colocated_partitions_roles():
    pop = _manual_population()
    at = colocated(pop, "A")
    assert [a.agent_id for a in at.citizens] == ["cit_1"]
    assert at.criminals == []
    assert [a.agent_id for a in at.police] == ["pol_1"]


def test_colocated_excludes_arrested():
    pop = _manual_population()
    pop.agents["crm_1"].state.location = "A"
    pop.agents["crm_1"].state.arrested = True
    at = colocated(pop, "A")
    assert at.criminals == []


def test_colocated_empty_cell():
    pop = _manual_population()
    pop.agents["cit_1"].state.location = "B"
    pop.agents["pol_1"].state.location = "B"
    at = colocated(pop, "A")
    assert at.citizens == [] and at.criminals == [] and at.police == []


def test_colocated_unknown_cell():
    with pytest.raises(InputError):
        colocated(_manual_population(), "Z")


def test_colocated_conserves_non_arrested():
    env = _two_cell_env()
    pop = sample_population(env, {"citizens": 30, "criminals": 10, "police": 5}, seed=13)
    pop.agents["crm_00003"].state.arrested = True
    for kind, attr in (("citizen", "citizens"), ("criminal", "criminals"),
                       ("police", "police")):
        total = sum(len(getattr(colocated(pop, cid), attr)) for cid in ("A", "B"))
        live = sum(1 for a in pop.by_kind(kind) if not a.state.arrested)
        assert total == live


def test_dump_restore_roundtrip(tmp_path):
    env = _two_cell_env()
    pop = sample_population(env, {"citizens": 8, "criminals": 3, "police": 2}, seed=5)
    pop.agents["crm_00001"].state.history.append("step 1: moved to B")
    pop.agents["crm_00001"].state.crimes_committed = 2
    path = tmp_path / "pop.jsonl"
    dump_jsonl(pop, path)
    restored = restore_jsonl(path, env.cell_ids)
    assert dump_lines(restored) == dump_lines(pop)
