"""The discrete-time step loop: move agents, assemble decision contexts,
batch decisions, apply crimes, update histories, and run scheduled
interventions.

Per step: scenario pre-step hooks -> mobility for every non-arrested
agent -> one decision per non-arrested criminal over an immutable
snapshot -> crimes applied simultaneously at step end in agent-id order
-> scenario post-step hooks (arrests). Rule-engine runs are fully
deterministic given the seed: every agent owns private named rng
streams, so evaluation order cannot change outcomes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import gateway as gw
from . import scenario as sc
from .decision import (AblationFlags, assemble_context, citywide_attractiveness,
                       decide, make_engine, parse_decision)
from .env import CityEnvironment, CrimeDistribution, load_city
from .errors import (ConfigError, EngineUnavailable, InputError, InvalidTarget,
                     ParseFailure)
from .mobility import EprParams, PatrolPolicy, epr_step, police_patrol_step
from .population import sample_population
from .seeding import DECIDE, MOVE, substream

DEFAULT_COUNTS = {"citizens": 4000, "criminals": 1000, "police": 500}
DEFAULT_STEPS = 50
DEFAULT_TOLERANCE = 0.2

# interpretation choices surfaced in every run report
RUN_NOTES = {
    "one_crime_per_criminal_per_step": True,
    "citizen_targets_reusable_within_step": True,
    "arrested_offenders_not_replaced": True,
    "baseline_engines_are_simplified_reimplementations": True,
}


@dataclass
class RunConfig:
    city: dict | None = None  # {"features": path, "boundaries": path?, ...}
    counts: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    steps: int = DEFAULT_STEPS
    seed: int = 0
    engine: str = "routine"
    engine_params: dict = field(default_factory=dict)
    mobility: dict = field(default_factory=dict)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    scenario: sc.ScenarioPlan | None = None
    gateway: gw.GatewayConfig | None = None
    tolerance: float = DEFAULT_TOLERANCE
    history_window: int = 10

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.engine == "llm" and self.gateway is None:
            raise ConfigError("llm engine requires gateway config (missing key: gateway)")
        for key in ("citizens", "criminals", "police"):
            if key not in self.counts:
                raise ConfigError(f"counts.{key} is required")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        plan = d.get("scenario")
        if isinstance(plan, str):
            plan = sc.ScenarioPlan.from_json(plan)
        elif isinstance(plan, dict):
            plan = sc.ScenarioPlan.from_dict(plan)
        gateway_cfg = d.get("gateway")
        if isinstance(gateway_cfg, dict):
            gateway_cfg = gw.GatewayConfig.from_dict(gateway_cfg)
        engine = d.get("engine", "routine")
        engine_params = dict(d.get("engine_params", {}))
        if isinstance(engine, dict):
            engine_params = {k: v for k, v in engine.items() if k != "name"}
            engine = engine.get("name", "routine")
        return cls(
            city=d.get("city"),
            counts=dict(d.get("counts", DEFAULT_COUNTS)),
            steps=int(d.get("steps", DEFAULT_STEPS)),
            seed=int(d.get("seed", 0)),
            engine=engine,
            engine_params=engine_params,
            mobility=dict(d.get("mobility", {})),
            ablation=AblationFlags.from_dict(d.get("ablation", {})),
            scenario=plan,
            gateway=gateway_cfg,
            tolerance=float(d.get("tolerance", DEFAULT_TOLERANCE)),
            history_window=int(d.get("history_window", 10)),
        )

    def to_dict(self):
        return {
            "city": self.city,
            "counts": dict(self.counts),
            "steps": self.steps,
            "seed": self.seed,
            "engine": self.engine,
            "engine_params": {k: v for k, v in self.engine_params.items()
                              if k != "script"},
            "mobility": dict(self.mobility),
            "ablation": {k: getattr(self.ablation, k) for k in
                         ("rat_structure", "safety_score", "semantic_description",
                          "static_features")},
            "scenario": self.scenario.to_dict() if self.scenario else None,
            "gateway": None if self.gateway is None else {
                "base_url": self.gateway.base_url,
                "api_key_env_name": self.gateway.api_key_env_name,
                "max_in_flight": self.gateway.max_in_flight,
                "retry_max": self.gateway.retry_max,
                "backoff_base_ms": self.gateway.backoff_base_ms,
                "timeout_ms": self.gateway.timeout_ms,
                "transcript_path": self.gateway.transcript_path,
            },
            "tolerance": self.tolerance,
            "history_window": self.history_window,
        }


@dataclass(frozen=True)
class CrimeEvent:
    step: int
    cell_id: str
    criminal_id: str
    target_id: str
    reasoning: str = ""

    def to_dict(self):
        return {"step": self.step, "cell_id": self.cell_id,
                "criminal_id": self.criminal_id, "target_id": self.target_id,
                "reasoning": self.reasoning}


@dataclass
class SimulationOutput:
    events: list
    per_cell_counts: CrimeDistribution
    per_step_counts: list
    diagnostics: dict
    config_echo: dict
    seed: int
    status: str = "complete"
    notes: dict = field(default_factory=lambda: dict(RUN_NOTES))

    def events_jsonl(self):
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.events)

    def summary_dict(self):
        return {
            "status": self.status,
            "seed": self.seed,
            "total_events": len(self.events),
            "per_step_counts": list(self.per_step_counts),
            "per_cell_counts": dict(sorted(self.per_cell_counts.counts.items())),
            "diagnostics": dict(self.diagnostics),
            "config": self.config_echo,
            "notes": dict(self.notes),
        }

    def write(self, outdir):
        """events.jsonl + summary.json under `outdir`; returns the paths."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        events_path = out / "events.jsonl"
        events_path.write_text(self.events_jsonl(), encoding="utf-8")
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps(self.summary_dict(), indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
        return {"events": str(events_path), "summary": str(summary_path)}


def guardianship_snapshot(population):
    """Non-arrested police per cell; absent cells read as zero."""
    counts = {}
    for agent in population.agents.values():
        if agent.kind == "police" and not agent.state.arrested:
            counts[agent.state.location] = counts.get(agent.state.location, 0) + 1
    return counts


def load_environment(config):
    if isinstance(config.city, CityEnvironment):
        return config.city
    if not config.city or "features" not in config.city:
        raise ConfigError("config.city.features is required to load the environment")
    return load_city(config.city["features"], config.city.get("boundaries"),
                     name=config.city.get("name"), metadata=config.city.get("metadata"))


def _engine_for(config, transport, transcript):
    return make_engine(config.engine, params=config.engine_params,
                       gateway_config=config.gateway, transport=transport,
                       transcript=transcript)


def _mobility_params(config):
    m = config.mobility
    return EprParams(rho=float(m.get("rho", EprParams.rho)),
                     gamma=float(m.get("gamma", EprParams.gamma)))


def run(config, env=None, population=None, transport=None):
    """Execute a full simulation and return its output.

    `env` and `population` may be supplied directly (tests, replays);
    otherwise they are loaded from the config. `transport` overrides the
    llm engine's HTTP transport, e.g. with a fixture or transcript.
    """
    env = env if env is not None else load_environment(config)
    plan = config.scenario
    if plan is not None:
        plan.validate_steps(config.steps)
    pop = population if population is not None else sample_population(
        env, config.counts, config.seed)

    transcript = None
    if config.engine == "llm" and config.gateway and config.gateway.transcript_path:
        transcript = gw.TranscriptWriter(config.gateway.transcript_path)
    engine = _engine_for(config, transport, transcript)
    epr = _mobility_params(config)
    base_policy = PatrolPolicy(kind=config.mobility.get("police_policy", "random_walk"))

    move_rngs = {aid: substream(config.seed, aid, MOVE) for aid in pop.agents}
    decide_rngs = {a.agent_id: substream(config.seed, a.agent_id, DECIDE)
                   for a in pop.by_kind("criminal")}

    events = []
    per_step_counts = []
    diagnostics = {"parse_failures": 0, "invalid_targets": 0,
                   "transport_errors": 0, "arrests": 0}
    cum_counts = {cid: 0 for cid in env.cell_ids}
    status = "complete"

    for t in range(1, config.steps + 1):
        overlays = sc.context_overlays(plan, t)
        if sc.hotspot_policing_active(plan, t):
            policy = PatrolPolicy(kind="hotspot_weighted",
                                  weights=sc.hotspot_policing_weights(cum_counts))
        else:
            policy = base_policy

        for agent in pop.sorted_agents():
            if agent.state.arrested:
                continue
            rng = move_rngs[agent.agent_id]
            if agent.kind == "police":
                police_patrol_step(agent.state, env, policy, rng)
            else:
                cell = epr_step(agent.state, env, epr, rng)
                if agent.kind == "criminal":
                    agent.state.history.append(f"step {t}: moved to {cell}")

        guard = guardianship_snapshot(pop)
        buckets = pop.bucket_by_location()
        burglary_norm = (citywide_attractiveness(env, guard)
                         if config.engine == "burglary" else None)

        criminals = [a for a in pop.by_kind("criminal") if not a.state.arrested]
        contexts = {}
        for agent in criminals:
            at = buckets.get(agent.state.location)
            contexts[agent.agent_id] = assemble_context(
                agent, env, at, scenario_overlays=overlays,
                ablation=config.ablation, step=t, burglary_norm=burglary_norm,
                history_window=config.history_window)

        decisions, step_transport_errors = _decide_step(
            engine, config, contexts, criminals, decide_rngs, diagnostics)

        step_events = []
        for agent in criminals:
            decision = decisions.get(agent.agent_id)
            if decision is None or not decision.commit:
                continue
            ev = CrimeEvent(step=t, cell_id=agent.state.location,
                            criminal_id=agent.agent_id, target_id=decision.target_id,
                            reasoning=decision.reasoning)
            step_events.append(ev)
            agent.state.crimes_committed += 1
            agent.state.history.append(
                f"step {t}: committed crime against {decision.target_id} "
                f"at {agent.state.location}")
        for ev in step_events:
            cum_counts[ev.cell_id] += 1
        events.extend(step_events)
        per_step_counts.append(len(step_events))

        k = sc.offender_removal_k(plan, t)
        if k > 0:
            arrested = sc.arrest_top_offenders(pop, k)
            diagnostics["arrests"] += len(arrested)
            for aid in arrested:
                pop.agents[aid].state.history.append(f"step {t}: arrested")

        if contexts and step_transport_errors / len(contexts) > config.tolerance:
            status = "incomplete"
            break

    per_cell = CrimeDistribution(counts=dict(cum_counts))
    return SimulationOutput(
        events=events, per_cell_counts=per_cell, per_step_counts=per_step_counts,
        diagnostics=diagnostics, config_echo=config.to_dict(), seed=config.seed,
        status=status,
    )


def _decide_step(engine, config, contexts, criminals, decide_rngs, diagnostics):
    """One decision per criminal over the step's immutable snapshot.

    llm decisions batch through the gateway's bounded concurrency; parse
    failures and invalid targets count as no-crime with a diagnostic.
    Returns (decisions by agent id, transport error count).
    """
    decisions = {}
    transport_errors = 0
    if engine.name == "llm":
        requests = [engine.build_request(contexts[a.agent_id]) for a in criminals]
        outcomes = gw.complete_batch(requests, engine.config, transport=engine.transport,
                                     transcript=engine.transcript)
        for agent in criminals:
            tag = f"{agent.agent_id}:{contexts[agent.agent_id].step}"
            outcome = outcomes.get(tag)
            if isinstance(outcome, str):
                try:
                    decisions[agent.agent_id] = parse_decision(
                        outcome, contexts[agent.agent_id])
                except ParseFailure:
                    diagnostics["parse_failures"] += 1
                except InvalidTarget:
                    diagnostics["invalid_targets"] += 1
            else:
                diagnostics["transport_errors"] += 1
                transport_errors += 1
        return decisions, transport_errors

    for agent in criminals:
        try:
            decisions[agent.agent_id] = decide(
                engine, contexts[agent.agent_id], decide_rngs[agent.agent_id])
        except ParseFailure:
            diagnostics["parse_failures"] += 1
        except InvalidTarget:
            diagnostics["invalid_targets"] += 1
        except EngineUnavailable:
            diagnostics["transport_errors"] += 1
            transport_errors += 1
    return decisions, transport_errors


def replay(output, config, env=None, transport=None):
    """Re-execute a run and diff its event log against `output`.

    Non-llm engines replay from the seed alone. llm runs replay through
    their logged transcript: the recorded completions are served back by
    tag, so the transcript file must exist.
    """
    if config.engine == "llm" and transport is None:
        path = config.gateway.transcript_path if config.gateway else None
        if not path or not Path(path).exists():
            raise InputError("llm replay requires the run's transcript file")
        transport = gw.FixtureTransport.from_transcript(path)
        # do not clobber the original transcript while replaying
        config = RunConfig.from_dict({**config.to_dict(),
                                      "gateway": {**config.to_dict()["gateway"],
                                                  "transcript_path": None}})
    fresh = run(config, env=env, transport=transport)
    expected = [e.to_dict() for e in output.events]
    actual = [e.to_dict() for e in fresh.events]
    first_divergence = None
    for i, (a, b) in enumerate(zip(expected, actual)):
        if a != b:
            first_divergence = {"index": i, "step": b.get("step"),
                                "expected": a, "actual": b}
            break
    if first_divergence is None and len(expected) != len(actual):
        longer = expected if len(expected) > len(actual) else actual
        i = min(len(expected), len(actual))
        first_divergence = {"index": i, "step": longer[i].get("step"),
                            "expected": expected[i] if i < len(expected) else None,
                            "actual": actual[i] if i < len(actual) else None}
    return {
        "identical": first_divergence is None,
        "events_compared": min(len(expected), len(actual)),
        "expected_total": len(expected),
        "actual_total": len(actual),
        "first_divergence": first_divergence,
    }
