"""Criminal decision engines behind one interface.

A decision is produced from a DecisionContext assembled out of the
offender's profile and history (motivation), the co-located citizens
(target vulnerability), and the police presence plus perceived cell
safety (guardianship). Engines:

  random    commit with a flat base probability
  routine   commit only with targets present and no police on the cell
  hotspot   routine's target scaling damped by police and safety score
  burglary  property crime proportional to citywide-normalized
            attractiveness, no personal target
  llm       prompt rendering -> chat completion -> strict JSON parse
  scripted  replays a fixture decision stream keyed by (agent_id, step)

Rule engines are deterministic given (context, rng seed).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError, EngineUnavailable, InputError, InvalidTarget, ParseFailure, RenderError
from .errors import TransportExhausted
from . import gateway as gw

DEFAULT_P_BASE = 0.05
DEFAULT_DETERRENCE = 0.5

ENGINE_NAMES = ("random", "routine", "hotspot", "burglary", "llm", "scripted")

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")

# placeholders whose template lines disappear when a context channel is
# ablated
_ABLATION_PLACEHOLDERS = {
    "safety_score": {"score"},
    "semantic_description": {"desc"},
    "static_features": {"poi_count", "population", "income", "poverty_ratio", "housing_value"},
}


@dataclass(frozen=True)
class AblationFlags:
    rat_structure: bool = True
    safety_score: bool = True
    semantic_description: bool = True
    static_features: bool = True

    def disabled(self):
        return [k for k in ("rat_structure", "safety_score", "semantic_description",
                            "static_features") if not getattr(self, k)]

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: bool(v) for k, v in (d or {}).items()})


@dataclass(frozen=True)
class CriminalView:
    agent_id: str
    gender: str
    race: str
    residence: str
    historical_trajectory: tuple
    criminal_record: tuple
    current_location: str


@dataclass(frozen=True)
class TargetView:
    agent_id: str
    gender: str
    race: str


@dataclass(frozen=True)
class CellView:
    semantic_description: str
    safety_score: float
    poi_count: int
    population: int
    average_income: float
    poverty_ratio: float
    housing_value: float


@dataclass(frozen=True)
class DecisionContext:
    criminal: CriminalView
    targets: tuple
    police_count: int
    cell: CellView
    city_meta: dict
    overlays: tuple = ()
    ablation: AblationFlags = AblationFlags()
    step: int = 0
    burglary_norm: float | None = None

    def target_ids(self):
        return {t.agent_id for t in self.targets}


@dataclass(frozen=True)
class CrimeDecision:
    commit: bool
    target_id: str | None = None
    reasoning: str = ""

    def __post_init__(self):
        if self.commit and not self.target_id:
            raise InputError("commit=true requires a target_id")
        if not self.commit and self.target_id is not None:
            raise InputError("commit=false forbids a target_id")


@dataclass(frozen=True)
class PromptTemplate:
    system_text: str
    user_text: str

    @property
    def placeholder_set(self):
        return frozenset(_PLACEHOLDER_RE.findall(self.system_text)
                         ) | frozenset(_PLACEHOLDER_RE.findall(self.user_text))


def _read_template_file(name):
    return resources.files("crimesim.templates").joinpath(name).read_text(encoding="utf-8")


def load_template(system_path=None, user_path=None):
    """Template from explicit files; falls back to the packaged defaults."""
    system_text = (open(system_path, encoding="utf-8").read() if system_path
                   else _read_template_file("criminal_system.txt"))
    user_text = (open(user_path, encoding="utf-8").read() if user_path
                 else _read_template_file("criminal_user.txt"))
    return PromptTemplate(system_text, user_text)


def ablate_template(template, ablation):
    """Drop the template lines tied to disabled context channels.

    With rat_structure off the step-by-step reasoning scaffold is swapped
    for the compact direct variant before the per-line filtering.
    """
    user_text = template.user_text
    if not ablation.rat_structure:
        user_text = _read_template_file("criminal_user_direct.txt")
    removed = set()
    for flag, names in _ABLATION_PLACEHOLDERS.items():
        if not getattr(ablation, flag):
            removed |= names
    if removed:
        kept = [line for line in user_text.splitlines(keepends=True)
                if not (set(_PLACEHOLDER_RE.findall(line)) & removed)]
        user_text = "".join(kept)
    return PromptTemplate(template.system_text, user_text)


def assemble_context(criminal, env, colocated_agents, scenario_overlays=(),
                     ablation=None, step=0, burglary_norm=None, history_window=10):
    """Build the decision context for one criminal at its current cell.

    Motivation comes from the profile and the last `history_window`
    history events; targets from co-located citizens; guardianship from
    the same-cell police count plus the cell's safety signals. Scenario
    overlays are carried in schedule order.
    """
    loc = criminal.state.location
    if loc not in env.cells:
        raise InputError(f"criminal {criminal.agent_id} is at unknown cell {loc}")
    feats = env.features[loc]
    view = CriminalView(
        agent_id=criminal.profile.agent_id,
        gender=criminal.profile.gender,
        race=criminal.profile.race,
        residence=criminal.profile.residence,
        historical_trajectory=tuple(criminal.state.history[-history_window:]),
        criminal_record=tuple(criminal.profile.criminal_record),
        current_location=loc,
    )
    targets = tuple(
        TargetView(a.profile.agent_id, a.profile.gender, a.profile.race)
        for a in colocated_agents.citizens
    )
    cell = CellView(
        semantic_description=feats.semantic_description,
        safety_score=feats.safety_score,
        poi_count=feats.poi_count,
        population=feats.population,
        average_income=feats.average_income,
        poverty_ratio=feats.poverty_ratio,
        housing_value=feats.housing_value,
    )
    meta = env.metadata
    return DecisionContext(
        criminal=view,
        targets=targets,
        police_count=len(colocated_agents.police),
        cell=cell,
        city_meta={
            "city": meta.get("city", env.name),
            "mayor": meta.get("mayor", "unknown"),
            "party": meta.get("party", "unknown"),
            "strategy": meta.get("strategy", "unknown"),
        },
        overlays=tuple(scenario_overlays),
        ablation=ablation or AblationFlags(),
        step=step,
        burglary_norm=burglary_norm,
    )


def _fmt(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def context_bindings(context):
    """Placeholder bindings for prompt rendering; ablated channels are
    simply absent so a stale template fails loudly."""
    c = context.criminal
    bindings = {
        "city": context.city_meta["city"],
        "mayor": context.city_meta["mayor"],
        "party": context.city_meta["party"],
        "strategy": context.city_meta["strategy"],
        "agent_id": c.agent_id,
        "gender": c.gender,
        "race": c.race,
        "residence": c.residence,
        "historical_trajectory": ", ".join(c.historical_trajectory) or "none",
        "criminal_record": "; ".join(c.criminal_record) or "none",
        "current_location": c.current_location,
        "target_str": ", ".join(f"{t.agent_id} ({t.gender}, {t.race})"
                                for t in context.targets) or "none",
        "police_count": _fmt(context.police_count),
    }
    ab = context.ablation
    if ab.safety_score:
        bindings["score"] = _fmt(context.cell.safety_score)
    if ab.semantic_description:
        bindings["desc"] = context.cell.semantic_description
    if ab.static_features:
        bindings.update(
            poi_count=_fmt(context.cell.poi_count),
            population=_fmt(context.cell.population),
            income=_fmt(context.cell.average_income),
            poverty_ratio=_fmt(context.cell.poverty_ratio),
            housing_value=_fmt(context.cell.housing_value),
        )
    return bindings


def render_prompt(context, template):
    """Byte-exact placeholder substitution into (system, user) texts.

    Scenario overlays, when present, are prepended to the user text as
    standalone blocks in schedule order. An unbound placeholder raises
    RenderError naming it.
    """
    bindings = context_bindings(context)

    def sub(text):
        def repl(match):
            name = match.group(1)
            if name not in bindings:
                raise RenderError(f"unbound placeholder: {{{name}}}")
            return bindings[name]

        return _PLACEHOLDER_RE.sub(repl, text)

    user_text = sub(template.user_text)
    if context.overlays:
        user_text = "\n\n".join(context.overlays) + "\n\n" + user_text
    return sub(template.system_text), user_text


def parse_decision(raw_text, context):
    """Extract the first balanced JSON object from a completion and map it
    onto a CrimeDecision.

    Requires a boolean `status`; a true status must name an objective_id
    drawn from the context's targets. Prose around the object is
    tolerated and discarded.
    """
    decoder = json.JSONDecoder()
    obj = None
    for pos, ch in enumerate(raw_text):
        if ch != "{":
            continue
        try:
            candidate, _ = decoder.raw_decode(raw_text[pos:])
        except ValueError:
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
    if obj is None:
        raise ParseFailure("no JSON object found in completion", raw_text=raw_text)
    status = obj.get("status")
    if not isinstance(status, bool):
        raise ParseFailure("completion lacks a boolean 'status'", raw_text=raw_text)
    reasoning = str(obj.get("reasoning", ""))
    if not status:
        return CrimeDecision(commit=False, reasoning=reasoning)
    target = obj.get("objective_id")
    if not isinstance(target, str) or target not in context.target_ids():
        raise InvalidTarget(f"objective_id {target!r} is not an offered target",
                            target_id=target if isinstance(target, str) else None,
                            reasoning=reasoning)
    return CrimeDecision(commit=True, target_id=target, reasoning=reasoning)


def citywide_attractiveness(env, police_by_cell):
    """Normalizer for the burglary engine: sum over cells of
    housing_value / (1 + police count)."""
    total = 0.0
    for cid in env.cell_ids:
        total += env.features[cid].housing_value / (1.0 + police_by_cell.get(cid, 0))
    return total


class RandomEngine:
    """Commit with a flat probability regardless of context."""

    name = "random"

    def __init__(self, p_base=DEFAULT_P_BASE):
        self.p_base = p_base

    def decide(self, context, rng):
        committed = rng.random() < self.p_base
        if not committed or not context.targets:
            return CrimeDecision(commit=False, reasoning="random baseline: no commit")
        target = context.targets[int(rng.integers(0, len(context.targets)))]
        return CrimeDecision(commit=True, target_id=target.agent_id,
                             reasoning="random baseline: coin-flip commit")


class RoutineEngine:
    """Commit only when targets converge with absent guardianship."""

    name = "routine"

    def __init__(self, p_base=DEFAULT_P_BASE):
        self.p_base = p_base

    def decide(self, context, rng):
        if not context.targets or context.police_count > 0:
            return CrimeDecision(commit=False, reasoning="routine: no unguarded target")
        p = min(1.0, self.p_base * len(context.targets))
        if rng.random() >= p:
            return CrimeDecision(commit=False, reasoning="routine: opportunity passed")
        target = context.targets[int(rng.integers(0, len(context.targets)))]
        return CrimeDecision(commit=True, target_id=target.agent_id,
                             reasoning="routine: unguarded target taken")


class HotspotEngine:
    """Routine's target scaling, damped multiplicatively by police count
    and the cell's perceived safety instead of a hard police gate."""

    name = "hotspot"

    def __init__(self, p_base=DEFAULT_P_BASE, deterrence=DEFAULT_DETERRENCE):
        self.p_base = p_base
        self.deterrence = deterrence

    def decide(self, context, rng):
        if not context.targets:
            return CrimeDecision(commit=False, reasoning="hotspot: no target")
        p = min(1.0, self.p_base * len(context.targets))
        p *= min(1.0, max(0.0, 1.0 - self.deterrence * context.police_count))
        p *= 1.0 - context.cell.safety_score
        if rng.random() >= p:
            return CrimeDecision(commit=False, reasoning="hotspot: deterred")
        target = context.targets[int(rng.integers(0, len(context.targets)))]
        return CrimeDecision(commit=True, target_id=target.agent_id,
                             reasoning="hotspot: low-guardianship opportunity")


class BurglaryEngine:
    """Property crime with probability equal to the cell's citywide
    attractiveness share; targets a synthetic property token."""

    name = "burglary"

    def decide(self, context, rng):
        if context.burglary_norm is None or context.burglary_norm <= 0.0:
            raise ConfigError("burglary engine requires a citywide attractiveness norm")
        attractiveness = context.cell.housing_value / (1.0 + context.police_count)
        p = min(1.0, attractiveness / context.burglary_norm)
        if rng.random() >= p:
            return CrimeDecision(commit=False, reasoning="burglary: unattractive block")
        return CrimeDecision(commit=True,
                             target_id=f"property@{context.criminal.current_location}",
                             reasoning="burglary: attractive unguarded property")


class ScriptedEngine:
    """Replays a fixture decision stream keyed by (agent_id, step)."""

    name = "scripted"

    def __init__(self, script):
        # keys either (agent_id, step) tuples or "agent_id:step" strings
        self.script = {}
        for key, value in script.items():
            if isinstance(key, str):
                aid, _, step = key.rpartition(":")
                key = (aid, int(step))
            self.script[key] = value

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def decide(self, context, rng):
        entry = self.script.get((context.criminal.agent_id, context.step))
        if not entry or not entry.get("commit"):
            return CrimeDecision(commit=False, reasoning=(entry or {}).get("reasoning", ""))
        return CrimeDecision(commit=True, target_id=entry["target_id"],
                             reasoning=entry.get("reasoning", ""))


class LlmEngine:
    """Prompt -> chat completion -> parsed decision, through the gateway."""

    name = "llm"

    def __init__(self, config, template=None, model="default", temperature=0.0,
                 max_tokens=1024, transport=None, transcript=None):
        self.config = config
        self.template = template or load_template()
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.transport = transport
        self.transcript = transcript

    def build_request(self, context):
        tpl = ablate_template(self.template, context.ablation)
        system_text, user_text = render_prompt(context, tpl)
        return gw.CompletionRequest(
            system_text=system_text, user_text=user_text, model=self.model,
            temperature=self.temperature, max_tokens=self.max_tokens,
            tag=f"{context.criminal.agent_id}:{context.step}",
        )

    def decide(self, context, rng=None):
        request = self.build_request(context)
        try:
            text = gw.complete(request, self.config, transport=self.transport,
                               transcript=self.transcript)
        except TransportExhausted as exc:
            raise EngineUnavailable(str(exc)) from exc
        return parse_decision(text, context)


def make_engine(name, params=None, gateway_config=None, transport=None, transcript=None):
    """Engine factory used by run configs and the CLI."""
    params = dict(params or {})
    if name == "random":
        return RandomEngine(p_base=params.get("p_base", DEFAULT_P_BASE))
    if name == "routine":
        return RoutineEngine(p_base=params.get("p_base", DEFAULT_P_BASE))
    if name == "hotspot":
        return HotspotEngine(p_base=params.get("p_base", DEFAULT_P_BASE),
                             deterrence=params.get("deterrence", DEFAULT_DETERRENCE))
    if name == "burglary":
        return BurglaryEngine()
    if name == "scripted":
        if "script" in params:
            return ScriptedEngine(params["script"])
        if "script_path" in params:
            return ScriptedEngine.from_json(params["script_path"])
        raise ConfigError("scripted engine requires 'script' or 'script_path'")
    if name == "llm":
        if gateway_config is None:
            raise ConfigError("llm engine requires a gateway config")
        template = None
        if params.get("system_template") or params.get("user_template"):
            template = load_template(params.get("system_template"), params.get("user_template"))
        return LlmEngine(gateway_config, template=template,
                         model=params.get("model", "default"),
                         temperature=params.get("temperature", 0.0),
                         max_tokens=params.get("max_tokens", 1024),
                         transport=transport, transcript=transcript)
    raise ConfigError(f"unknown engine: {name}")


def decide(engine, context, rng):
    """Dispatch a decision through any engine and enforce the target
    invariant on the way out.

    Scripted replays are exempt from the containment check: the fixture
    author owns the decision stream, and replay fidelity wins.
    """
    decision = engine.decide(context, rng)
    if decision.commit and engine.name != "scripted":
        valid = decision.target_id in context.target_ids() or (
            decision.target_id == f"property@{context.criminal.current_location}")
        if not valid:
            raise InvalidTarget(f"engine {engine.name} produced target outside context",
                                target_id=decision.target_id, reasoning=decision.reasoning)
    return decision
