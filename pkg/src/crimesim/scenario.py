"""Counterfactual intervention layer: context injection into decision
prompts, crime-count-driven patrol reallocation, and per-step arrest of
the most active offenders, all on a step schedule.

Hooks run serially inside the step loop's single-writer phase.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InputError

KINDS = ("context_injection", "hotspot_policing", "offender_removal")

# zero-crime cells keep this floor weight so patrols can still reach them
PATROL_EPSILON = 1.0


@dataclass(frozen=True)
class Intervention:
    kind: str
    start_step: int
    end_step: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown intervention kind: {self.kind}")
        if self.start_step < 1 or self.end_step < self.start_step:
            raise InputError("intervention step range must satisfy 1 <= start <= end")
        if self.kind == "context_injection" and not str(self.params.get("text", "")).strip():
            raise InputError("context_injection requires non-empty text")
        if self.kind == "offender_removal" and int(self.params.get("k", 0)) < 1:
            raise InputError("offender_removal requires k >= 1")

    def active(self, step):
        return self.start_step <= step <= self.end_step


@dataclass(frozen=True)
class ScenarioPlan:
    name: str
    interventions: tuple = ()

    @classmethod
    def from_dict(cls, d):
        interventions = tuple(
            Intervention(
                kind=i["kind"],
                start_step=int(i.get("start_step", 1)),
                end_step=int(i.get("end_step", i.get("start_step", 1))),
                params=dict(i.get("params", {})),
            )
            for i in d.get("interventions", [])
        )
        return cls(name=d.get("name", "scenario"), interventions=interventions)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "name": self.name,
            "interventions": [
                {"kind": i.kind, "start_step": i.start_step, "end_step": i.end_step,
                 "params": dict(i.params)}
                for i in self.interventions
            ],
        }

    def validate_steps(self, total_steps):
        for i in self.interventions:
            if i.end_step > total_steps:
                raise InputError(
                    f"intervention '{i.kind}' ends at step {i.end_step}, "
                    f"beyond the run's {total_steps} steps")


def context_overlays(plan, step):
    """Active injected text blocks at `step`, in plan order."""
    if plan is None:
        return []
    return [str(i.params["text"]) for i in plan.interventions
            if i.kind == "context_injection" and i.active(step)]


def hotspot_policing_active(plan, step):
    return plan is not None and any(
        i.kind == "hotspot_policing" and i.active(step) for i in plan.interventions)


def offender_removal_k(plan, step):
    """Total arrests requested by active offender_removal interventions."""
    if plan is None:
        return 0
    return sum(int(i.params["k"]) for i in plan.interventions
               if i.kind == "offender_removal" and i.active(step))


def hotspot_policing_weights(cumulative_counts, epsilon=PATROL_EPSILON):
    """Per-cell patrol weights proportional to cumulative crime counts
    plus an epsilon floor, normalized to sum to 1."""
    weights = {cid: float(c) + epsilon for cid, c in cumulative_counts.items()}
    total = sum(weights.values())
    return {cid: w / total for cid, w in weights.items()}


def arrest_top_offenders(population, k):
    """Arrest the k most active non-arrested offenders (ties broken by
    ascending agent id); offenders with zero crimes are never arrested,
    so fewer than k may be taken. Returns the arrested ids."""
    if k < 1:
        raise InputError("k must be >= 1")
    candidates = [
        a for a in population.by_kind("criminal")
        if not a.state.arrested and a.state.crimes_committed > 0
    ]
    candidates.sort(key=lambda a: (-a.state.crimes_committed, a.agent_id))
    arrested = []
    for agent in candidates[:k]:
        agent.state.arrested = True
        arrested.append(agent.agent_id)
    return arrested
