"""HTTP run service consumed by the scenario-exploration UI.

Runs persist to a directory per run (config.json, events.jsonl,
summary.json, record.json, transcript.jsonl for llm runs) so every
artifact the CLI writes is retrievable through the API byte-identically.
Execution is asynchronous on a small worker pool; records transition
queued -> running -> done/failed/incomplete, never backwards.
"""
from __future__ import annotations

import json
import queue
import threading
import uuid
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response

from .cli import heatmap_geojson
from .env import CrimeDistribution
from .errors import CrimesimError, InputError
from .metrics import evaluate as evaluate_metrics
from .metrics import hotspot_crime_ratio
from .scenario import ScenarioPlan
from .simulation import RunConfig, run

STATUSES = ("queued", "running", "done", "failed", "incomplete")
_ORDER = {s: i for i, s in enumerate(STATUSES)}


@dataclass
class RunRecord:
    run_id: str
    status: str
    config: dict
    output_ref: str
    created_at: str
    finished_at: str | None = None
    error: str | None = None
    total_events: int | None = None

    def to_dict(self):
        return asdict(self)


def _now():
    return datetime.now(timezone.utc).isoformat()


def validate_config_dict(doc):
    """Field-level validation errors for a run config document."""
    errors = []
    if not isinstance(doc, dict):
        return [{"field": "config", "message": "config must be an object"}]
    if int(doc.get("steps", 1) or 0) < 1:
        errors.append({"field": "steps", "message": "steps must be >= 1"})
    counts = doc.get("counts", {})
    for key in ("citizens", "criminals", "police"):
        if key in counts and int(counts[key]) < 1:
            errors.append({"field": f"counts.{key}", "message": "must be positive"})
    engine = doc.get("engine", "routine")
    name = engine.get("name") if isinstance(engine, dict) else engine
    if name not in ("random", "routine", "hotspot", "burglary", "llm", "scripted"):
        errors.append({"field": "engine", "message": f"unknown engine '{name}'"})
    if name == "llm" and not doc.get("gateway"):
        errors.append({"field": "gateway", "message": "llm engine requires gateway config"})
    if errors:
        return errors
    try:
        RunConfig.from_dict(doc)
    except (CrimesimError, ValueError, TypeError, OSError) as exc:
        errors.append({"field": "config", "message": str(exc)})
    return errors


class RunStore:
    """Directory-backed run registry with a worker pool."""

    def __init__(self, env, runs_dir, workers=1):
        self.env = env
        self.runs_dir = Path(runs_dir)
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.records = {}
        self._queue = queue.Queue()
        self._scan()
        for _ in range(max(1, workers)):
            threading.Thread(target=self._worker, daemon=True).start()

    def _scan(self):
        for record_path in self.runs_dir.glob("*/record.json"):
            record = RunRecord(**json.loads(record_path.read_text(encoding="utf-8")))
            if record.status in ("queued", "running"):
                record.status = "failed"
                record.error = "interrupted by service restart"
            self.records[record.run_id] = record

    def _persist(self, record):
        rundir = self.runs_dir / record.run_id
        rundir.mkdir(parents=True, exist_ok=True)
        (rundir / "record.json").write_text(
            json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def _transition(self, record, status, **updates):
        with self._lock:
            if _ORDER[status] < _ORDER[record.status]:
                raise CrimesimError(f"illegal status transition {record.status} -> {status}")
            record.status = status
            for key, value in updates.items():
                setattr(record, key, value)
            self._persist(record)

    def submit(self, config_doc):
        run_id = uuid.uuid4().hex[:12]
        while run_id in self.records:
            run_id = uuid.uuid4().hex[:12]
        rundir = self.runs_dir / run_id
        rundir.mkdir(parents=True)
        record = RunRecord(run_id=run_id, status="queued", config=config_doc,
                           output_ref=str(rundir), created_at=_now())
        (rundir / "config.json").write_text(
            json.dumps(config_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        with self._lock:
            self.records[run_id] = record
            self._persist(record)
        self._queue.put(run_id)
        return record

    def _worker(self):
        while True:
            run_id = self._queue.get()
            record = self.records.get(run_id)
            if record is None:
                continue
            try:
                self._transition(record, "running")
                doc = dict(record.config)
                if doc.get("engine") == "llm" or (
                        isinstance(doc.get("engine"), dict)
                        and doc["engine"].get("name") == "llm"):
                    gateway = dict(doc.get("gateway") or {})
                    gateway.setdefault("transcript_path",
                                       str(Path(record.output_ref) / "transcript.jsonl"))
                    doc["gateway"] = gateway
                config = RunConfig.from_dict(doc)
                output = run(config, env=self.env)
                output.write(record.output_ref)
                self._transition(
                    record, "done" if output.status == "complete" else "incomplete",
                    finished_at=_now(), total_events=len(output.events))
            except Exception as exc:  # failure lands in the record, not the log
                self._transition(record, "failed", finished_at=_now(), error=str(exc))

    def get(self, run_id):
        record = self.records.get(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown run_id {run_id}")
        return record

    def distribution(self, run_id):
        record = self.get(run_id)
        if record.status not in ("done", "incomplete"):
            raise HTTPException(status_code=409, detail=f"run {run_id} is {record.status}")
        summary = json.loads(
            (Path(record.output_ref) / "summary.json").read_text(encoding="utf-8"))
        return CrimeDistribution(counts=summary["per_cell_counts"]), summary


class ScenarioStore:
    def __init__(self, scenarios_dir):
        self.dir = Path(scenarios_dir)
        self.dir.mkdir(parents=True, exist_ok=True)

    def list(self):
        docs = []
        for path in sorted(self.dir.glob("*.json")):
            doc = json.loads(path.read_text(encoding="utf-8"))
            doc["id"] = path.stem
            docs.append(doc)
        return docs

    def save(self, doc):
        plan = ScenarioPlan.from_dict(doc)  # validates
        slug = doc.get("id") or plan.name.lower().replace(" ", "_")
        slug = "".join(ch for ch in slug if ch.isalnum() or ch in "-_") or "scenario"
        path = self.dir / f"{slug}.json"
        path.write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        out = plan.to_dict()
        out["id"] = slug
        return out


def create_app(env, runs_dir="runs", scenarios_dir=None, real_dists=None, workers=1):
    """Build the FastAPI app around one city environment."""
    app = FastAPI(title="crimesim run service")
    store = RunStore(env, runs_dir, workers=workers)
    scenarios = ScenarioStore(scenarios_dir or (Path(runs_dir) / "scenarios"))
    real = dict(real_dists or {})
    app.state.store = store

    @app.post("/runs", status_code=202)
    def post_run(body: dict):
        config_doc = body.get("config", body)
        if "scenario" in body and "scenario" not in config_doc:
            config_doc = {**config_doc, "scenario": body["scenario"]}
        errors = validate_config_dict(config_doc)
        if errors:
            return JSONResponse(status_code=400, content={"errors": errors})
        record = store.submit(config_doc)
        return {"run_id": record.run_id, "status": record.status}

    @app.get("/runs")
    def list_runs():
        with store._lock:
            records = sorted(store.records.values(), key=lambda r: r.created_at)
        return [r.to_dict() for r in records]

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return store.get(run_id).to_dict()

    @app.get("/runs/{run_id}/heatmap")
    def get_heatmap(run_id: str):
        dist, _ = store.distribution(run_id)
        return heatmap_geojson(env, dist)

    @app.get("/runs/{run_id}/metrics")
    def get_metrics(run_id: str, against: str, alpha: float = 0.2, k: str = "1.0,1.5,2.0"):
        if against not in real:
            raise HTTPException(status_code=404,
                                detail=f"unknown ground-truth distribution '{against}'")
        if not 0.0 < alpha <= 1.0:
            raise HTTPException(status_code=400, detail="alpha must be in (0, 1]")
        try:
            ks = [float(x) for x in k.split(",") if x.strip()]
            if not ks or any(x <= 0 for x in ks):
                raise ValueError
        except ValueError:
            raise HTTPException(status_code=400, detail="k must be positive numbers")
        dist, _ = store.distribution(run_id)
        report = evaluate_metrics(real[against], dist, alpha=alpha, ks=ks)
        return report.to_dict()

    @app.get("/runs/{run_a}/compare/{run_b}")
    def compare(run_a: str, run_b: str, alpha: float = 0.2):
        if not 0.0 < alpha <= 1.0:
            raise HTTPException(status_code=400, detail="alpha must be in (0, 1]")
        dist_a, summary_a = store.distribution(run_a)
        dist_b, summary_b = store.distribution(run_b)
        total_a, total_b = dist_a.total, dist_b.total
        ratio_a = hotspot_crime_ratio(dist_a, alpha) if total_a else None
        ratio_b = hotspot_crime_ratio(dist_b, alpha) if total_b else None
        cells = []
        for cid in env.cell_ids:
            ca, cb = dist_a.counts.get(cid, 0), dist_b.counts.get(cid, 0)
            cells.append({
                "cell_id": cid,
                "count_a": ca, "count_b": cb,
                "share_a": ca / total_a if total_a else 0.0,
                "share_b": cb / total_b if total_b else 0.0,
            })
        return {
            "run_a": {"run_id": run_a, "total": total_a,
                      "hotspot_crime_ratio": ratio_a,
                      "per_step_counts": summary_a["per_step_counts"]},
            "run_b": {"run_id": run_b, "total": total_b,
                      "hotspot_crime_ratio": ratio_b,
                      "per_step_counts": summary_b["per_step_counts"]},
            "delta": {
                "total": total_a - total_b,
                "hotspot_crime_ratio": (ratio_a - ratio_b)
                if ratio_a is not None and ratio_b is not None else None,
            },
            "cells": cells,
        }

    @app.get("/runs/{run_id}/artifacts/{name}")
    def get_artifact(run_id: str, name: str):
        record = store.get(run_id)
        if name not in ("config.json", "events.jsonl", "summary.json",
                        "transcript.jsonl", "record.json"):
            raise HTTPException(status_code=404, detail=f"unknown artifact '{name}'")
        path = Path(record.output_ref) / name
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"artifact '{name}' not written")
        media = "application/json" if name.endswith(".json") else "application/jsonl"
        return Response(content=path.read_bytes(), media_type=media)

    @app.get("/city/cells")
    def city_cells():
        out = []
        for cid in env.cell_ids:
            cell = env.cells[cid]
            feats = env.features[cid]
            out.append({
                "cell_id": cid,
                "centroid": [cell.centroid[0], cell.centroid[1]],
                "boundary": [[lat, lon] for lat, lon in cell.boundary]
                if cell.boundary else None,
                "features": {
                    "population": feats.population,
                    "average_income": feats.average_income,
                    "poverty_ratio": feats.poverty_ratio,
                    "housing_value": feats.housing_value,
                    "poi_count": feats.poi_count,
                    "safety_score": feats.safety_score,
                    "semantic_description": feats.semantic_description,
                },
            })
        return {"name": env.name, "metadata": env.metadata, "cells": out}

    @app.get("/scenarios")
    def list_scenarios():
        return scenarios.list()

    @app.post("/scenarios", status_code=201)
    def post_scenario(body: dict):
        try:
            return scenarios.save(body)
        except (InputError, KeyError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    return app
