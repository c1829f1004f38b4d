"""Heterogeneous agent population: citizens, criminals, and police with
demographically sampled profiles and mutable per-agent state.

The population has a single writer (the simulation step loop); read-only
snapshots may be shared across threads for decision batching.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InputError
from .seeding import substream

KINDS = ("citizen", "criminal", "police")

# Synthetic prior-offense pool for criminal profiles; each criminal gets
# 0-3 seeded entries.
PRIOR_OFFENSES = (
    "petty theft", "burglary", "vehicle theft", "assault",
    "vandalism", "shoplifting", "robbery", "trespassing",
)


@dataclass
class AgentProfile:
    agent_id: str
    kind: str
    gender: str
    race: str
    residence: str
    criminal_record: list = field(default_factory=list)


@dataclass
class AgentState:
    location: str
    visit_counts: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    crimes_committed: int = 0
    arrested: bool = False

    def __post_init__(self):
        # mobility keeps index-aligned arrays here to avoid per-step
        # dict scans; rebuilt lazily whenever it is None
        self._mob_cache = None


@dataclass
class Agent:
    profile: AgentProfile
    state: AgentState

    @property
    def agent_id(self):
        return self.profile.agent_id

    @property
    def kind(self):
        return self.profile.kind


@dataclass
class AgentsAtCell:
    """Role-partitioned, non-arrested agents co-located at one cell."""

    citizens: list = field(default_factory=list)
    criminals: list = field(default_factory=list)
    police: list = field(default_factory=list)


_ROLE_ATTR = {"citizen": "citizens", "criminal": "criminals", "police": "police"}


class Population:
    """Collection of agents with role tallies and location queries."""

    def __init__(self, agents, cell_ids):
        self.agents = {a.agent_id: a for a in agents}
        if len(self.agents) != len(agents):
            raise InputError("agent ids must be unique")
        self.cell_ids = frozenset(cell_ids)
        for a in agents:
            if a.profile.residence not in self.cell_ids:
                raise InputError(f"agent {a.agent_id}: residence is not a known cell")

    @property
    def counts(self):
        tally = {"citizens": 0, "criminals": 0, "police": 0}
        for a in self.agents.values():
            tally[_ROLE_ATTR[a.kind]] += 1
        return tally

    def by_kind(self, kind):
        """Agents of one kind, ordered by agent id."""
        return [self.agents[aid] for aid in sorted(self.agents) if self.agents[aid].kind == kind]

    def sorted_agents(self):
        return [self.agents[aid] for aid in sorted(self.agents)]

    def bucket_by_location(self):
        """One pass over all agents -> cell id -> AgentsAtCell."""
        buckets = {}
        for aid in sorted(self.agents):
            agent = self.agents[aid]
            if agent.state.arrested:
                continue
            at = buckets.setdefault(agent.state.location, AgentsAtCell())
            getattr(at, _ROLE_ATTR[agent.kind]).append(agent)
        return buckets


def colocated(population, cell_id):
    """Non-arrested agents at `cell_id`, partitioned into citizens,
    criminals, and police."""
    if cell_id not in population.cell_ids:
        raise InputError(f"unknown cell id: {cell_id}")
    at = AgentsAtCell()
    for aid in sorted(population.agents):
        agent = population.agents[aid]
        if agent.state.arrested or agent.state.location != cell_id:
            continue
        getattr(at, _ROLE_ATTR[agent.kind]).append(agent)
    return at


def _draw_label(rng, composition):
    labels = sorted(composition)
    weights = [max(0.0, float(composition[l])) for l in labels]
    total = sum(weights)
    if total <= 0:
        return labels[0] if labels else "unknown"
    u = rng.random() * total
    acc = 0.0
    for label, w in zip(labels, weights):
        acc += w
        if acc > u:
            return label
    return labels[-1]


def _make_agent(agent_id, kind, cell_id, env, rng):
    feats = env.features[cell_id]
    gender = "female" if rng.random() < feats.gender_ratio else "male"
    race = _draw_label(rng, feats.race_composition)
    record = []
    if kind == "criminal":
        n_prior = int(rng.integers(0, 4))
        record = [PRIOR_OFFENSES[int(rng.integers(0, len(PRIOR_OFFENSES)))] for _ in range(n_prior)]
    profile = AgentProfile(agent_id=agent_id, kind=kind, gender=gender, race=race,
                           residence=cell_id, criminal_record=record)
    # the visited set starts non-empty so preferential return is defined
    state = AgentState(location=cell_id, visit_counts={cell_id: 1})
    return Agent(profile, state)


def sample_population(env, counts, seed):
    """Sample a population over `env` with residences drawn proportionally
    to cell population; gender and race follow the residence cell's
    composition; police are placed proportionally to population.

    Identical (env, counts, seed) inputs reproduce the population exactly.
    """
    for key in ("citizens", "criminals", "police"):
        if counts.get(key, 0) <= 0:
            raise InputError(f"counts.{key} must be positive")
    pops = [env.features[cid].population for cid in env.cell_ids]
    total_pop = sum(pops)
    if total_pop <= 0:
        raise InputError("environment has zero total population")
    shares = [p / total_pop for p in pops]

    rng = substream(seed, "population")
    agents = []
    for kind, prefix, n in (("citizen", "cit", counts["citizens"]),
                            ("criminal", "crm", counts["criminals"]),
                            ("police", "pol", counts["police"])):
        cells = rng.choice(len(env.cell_ids), size=n, p=shares)
        for i in range(n):
            cid = env.cell_ids[int(cells[i])]
            agents.append(_make_agent(f"{prefix}_{i:05d}", kind, cid, env, rng))
    return Population(agents, env.cell_ids)


def dump_jsonl(population, path):
    """One agent per line; stable key order for byte-identical replays."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in dump_lines(population):
            fh.write(line + "\n")


def dump_lines(population):
    lines = []
    for aid in sorted(population.agents):
        a = population.agents[aid]
        lines.append(json.dumps({
            "agent_id": a.profile.agent_id,
            "kind": a.profile.kind,
            "gender": a.profile.gender,
            "race": a.profile.race,
            "residence": a.profile.residence,
            "criminal_record": list(a.profile.criminal_record),
            "state": {
                "location": a.state.location,
                "visit_counts": dict(sorted(a.state.visit_counts.items())),
                "history": list(a.state.history),
                "crimes_committed": a.state.crimes_committed,
                "arrested": a.state.arrested,
            },
        }, sort_keys=True))
    return lines


def restore_jsonl(path, cell_ids):
    agents = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            profile = AgentProfile(
                agent_id=d["agent_id"], kind=d["kind"], gender=d["gender"],
                race=d["race"], residence=d["residence"],
                criminal_record=list(d.get("criminal_record", [])),
            )
            s = d["state"]
            state = AgentState(
                location=s["location"], visit_counts=dict(s["visit_counts"]),
                history=list(s["history"]), crimes_committed=s["crimes_committed"],
                arrested=s["arrested"],
            )
            agents.append(Agent(profile, state))
    return Population(agents, cell_ids)
