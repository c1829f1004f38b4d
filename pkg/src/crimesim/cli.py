"""Command-line interface.

Subcommands: ingest (build a city bundle + crime distribution),
simulate (run config -> events/summary files), evaluate (real vs sim
distributions -> metrics report), align (prompt alignment loop),
heatmap (distribution -> GeoJSON choropleth), serve (HTTP run service).

Exit codes: 0 success, 1 input error, 2 runtime failure.
"""
from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import gateway as gw
from . import metrics as mt
from . import perception as pc
from .env import CrimeDistribution, ingest_crimes, load_city
from .errors import CrimesimError, InputError
from .simulation import RunConfig, run


@click.group()
def cli():
    """Agent-based urban crime simulator."""


def _load_env_bundle(city_path):
    """A city bundle is either a features CSV or a JSON file pointing at
    one (plus optional boundaries/name/metadata)."""
    p = Path(city_path)
    if p.suffix == ".json":
        bundle = json.loads(p.read_text(encoding="utf-8"))
        features = bundle.get("features")
        if not features:
            raise InputError("city bundle lacks a 'features' path")
        base = p.parent
        boundaries = bundle.get("boundaries")
        return load_city(
            str(base / features) if not Path(features).is_absolute() else features,
            boundaries if boundaries is None else (
                str(base / boundaries) if not Path(boundaries).is_absolute() else boundaries),
            name=bundle.get("name"), metadata=bundle.get("metadata"),
        )
    return load_city(str(p))


def load_distribution(path, env=None, period=None):
    """Read a distribution from a distribution JSON, a run summary.json,
    or a crime-records CSV (cell_id column required without a city)."""
    p = Path(path)
    if p.suffix == ".json":
        doc = json.loads(p.read_text(encoding="utf-8"))
        if "per_cell_counts" in doc:
            return CrimeDistribution(counts=doc["per_cell_counts"])
        if "counts" in doc:
            return CrimeDistribution.from_dict(doc)
        raise InputError(f"{path}: JSON carries neither 'counts' nor 'per_cell_counts'")
    if env is not None:
        if period is None:
            period = _csv_time_range(p)
        return ingest_crimes(env, str(p), period)
    counts = {}
    with open(p, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            cid = (row.get("cell_id") or "").strip()
            if not cid:
                raise InputError(f"{path}: records need a cell_id column "
                                 "(or pass --city for coordinate assignment)")
            counts[cid] = counts.get(cid, 0) + 1
    return CrimeDistribution(counts=counts)


def _csv_time_range(path):
    lo = hi = None
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            ts = row.get("timestamp_iso8601")
            if ts:
                lo = ts if lo is None or ts < lo else lo
                hi = ts if hi is None or ts > hi else hi
    if lo is None:
        raise InputError(f"{path}: no timestamps found")
    return (lo, hi)


@cli.command()
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--boundaries", type=click.Path(exists=True))
@click.option("--crimes", type=click.Path(exists=True))
@click.option("--period", nargs=2, metavar="START END")
@click.option("--name", default=None)
@click.option("--out", required=True, type=click.Path())
def ingest(features, boundaries, crimes, period, name, out):
    """Build a city bundle (and optionally a crime distribution)."""
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    env = load_city(features, boundaries, name=name)
    bundle = {
        "features": str(Path(features).resolve()),
        "boundaries": str(Path(boundaries).resolve()) if boundaries else None,
        "name": env.name,
        "metadata": env.metadata,
    }
    (outdir / "city.json").write_text(json.dumps(bundle, indent=2) + "\n", encoding="utf-8")
    (outdir / "load_report.json").write_text(
        json.dumps(env.load_report.to_dict(), indent=2) + "\n", encoding="utf-8")
    click.echo(f"loaded {env.n_cells} cells "
               f"({len(env.load_report.dropped_missing_safety)} dropped)")
    if crimes:
        if not period:
            period = _csv_time_range(Path(crimes))
        dist = ingest_crimes(env, crimes, period)
        (outdir / "distribution.json").write_text(
            json.dumps(dist.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        click.echo(f"ingested {dist.total} events ({dist.report})")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def simulate(config_path, out):
    """Run a simulation from a RunConfig JSON file."""
    cfg_doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
    base = Path(config_path).parent

    def resolve(p):
        return p if p is None or Path(p).is_absolute() else str(base / p)

    city = cfg_doc.get("city")
    if isinstance(city, str):
        cfg_doc["city"] = {"features": resolve(city)}
    elif isinstance(city, dict):
        city["features"] = resolve(city.get("features"))
        city["boundaries"] = resolve(city.get("boundaries"))
    if isinstance(cfg_doc.get("scenario"), str):
        cfg_doc["scenario"] = resolve(cfg_doc["scenario"])
    config = RunConfig.from_dict(cfg_doc)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    if config.engine == "llm" and config.gateway and not config.gateway.transcript_path:
        config.gateway.transcript_path = str(outdir / "transcript.jsonl")
    output = run(config)
    (outdir / "config.json").write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths = output.write(outdir)
    click.echo(f"{len(output.events)} events ({output.status}) -> {paths['summary']}")
    if output.status != "complete":
        raise CrimesimError("run aborted beyond the engine error tolerance; "
                            "partial output written")


@cli.command()
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--sim", "sim_path", required=True, type=click.Path(exists=True))
@click.option("--alpha", default=0.2, show_default=True)
@click.option("--k", "ks", default="1.0,1.5,2.0", show_default=True,
              help="comma-separated HR@K thresholds")
@click.option("--city", "city_path", type=click.Path(exists=True),
              help="city bundle for coordinate-based record assignment")
@click.option("--period", nargs=2, metavar="START END")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="also write the per-cell comparison CSV")
def evaluate(real_path, sim_path, alpha, ks, city_path, period, out_path, csv_path):
    """Score a simulated distribution against ground truth."""
    if not 0.0 < alpha <= 1.0:
        raise InputError("alpha must be in (0, 1]")
    env = _load_env_bundle(city_path) if city_path else None
    real = load_distribution(real_path, env=env, period=period or None)
    sim = load_distribution(sim_path)
    k_values = [float(x) for x in ks.split(",") if x.strip()]
    report = mt.evaluate(real, sim, alpha=alpha, ks=k_values)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    click.echo(text.rstrip())
    if csv_path:
        mt.write_comparison_csv(csv_path, real, sim, alpha=alpha)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def align(config_path, out):
    """Run the prompt-alignment loop from an alignment config JSON."""
    doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
    base = Path(config_path).parent

    def resolve(p):
        return str(base / p) if p and not Path(p).is_absolute() else p

    annset = pc.read_annotations(resolve(doc["annotations_csv"]))
    human = pc.aggregate_annotations(annset)
    if doc.get("triplets_csv"):
        pts = pc.triplet_points(pc.read_triplets(resolve(doc["triplets_csv"])))
        human = pc.merge_human_scores(human, pts)
    dataset = pc.AlignmentDataset(image_ids=tuple(sorted(human)), human_scores=human)

    prompts = list(doc["prompts"])
    scorer = fixture_scorer_from_csv(resolve(doc["scores_csv"]), prompts)
    if doc.get("optimizer", {}).get("gateway"):
        optimizer = remote_optimizer(gw.GatewayConfig.from_dict(doc["optimizer"]["gateway"]),
                                     model=doc["optimizer"].get("model", "default"))
    else:
        optimizer = scripted_optimizer(prompts)
    loop = pc.LoopConfig(
        initial_prompt=prompts[0],
        max_iters=int(doc.get("max_iters", len(prompts) - 1 or 1)),
        patience=int(doc.get("patience", 3)),
        train_fraction=float(doc.get("train_fraction", 0.7)),
        split_seed=int(doc.get("split_seed", 13)),
        worst_k=int(doc.get("worst_k", 10)),
    )
    result = pc.align_prompt(dataset, scorer, optimizer, loop)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "alignment.json").write_text(
        json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"converged={result.converged} "
               f"train_pearson={result.best_train_pearson:.4f} "
               f"eval_pearson={result.eval_pearson:.4f}")


def fixture_scorer_from_csv(path, prompts):
    """Scorer backed by a prompt_index,image_id,score fixture table."""
    table = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            table[(int(row["prompt_index"]), row["image_id"])] = float(row["score"])
    index = {text: i for i, text in enumerate(prompts)}

    def scorer(prompt, image_id):
        if prompt not in index:
            raise InputError("fixture scorer has no table for the proposed prompt")
        try:
            return table[(index[prompt], image_id)]
        except KeyError as exc:
            raise InputError(f"fixture scorer lacks image {image_id}") from exc

    return scorer


def scripted_optimizer(prompts):
    """Optimizer that walks a fixed proposal list, then repeats the last."""
    state = {"next": 1}

    def optimizer(current, samples, train_r):
        i = min(state["next"], len(prompts) - 1)
        state["next"] += 1
        return prompts[i]

    return optimizer


def remote_optimizer(config, model="default"):
    """Optimizer backed by a chat-completions endpoint: sends the current
    prompt, its worst-aligned samples, and the train correlation; the
    completion text is the proposed prompt."""

    def optimizer(current, samples, train_r):
        lines = [f"- image {i}: machine {m:.3f} vs human {h:.3f}" for i, m, h in samples]
        request = gw.CompletionRequest(
            system_text=("You revise image-scoring prompts. Reply with ONLY the "
                         "revised prompt text."),
            user_text=(f"Current prompt:\n{current}\n\n"
                       f"Train Pearson correlation with human safety labels: {train_r:.4f}\n"
                       f"Worst-aligned samples:\n" + "\n".join(lines) +
                       "\n\nPropose a revised prompt that better matches human judgment."),
            model=model, tag=f"optimizer:{train_r:.4f}",
        )
        return gw.complete(request, config).strip()

    return optimizer


@cli.command()
@click.option("--dist", "dist_path", required=True, type=click.Path(exists=True))
@click.option("--city", "city_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def heatmap(dist_path, city_path, out_path):
    """Export a distribution as a GeoJSON choropleth."""
    env = _load_env_bundle(city_path)
    dist = load_distribution(dist_path)
    doc = heatmap_geojson(env, dist)
    Path(out_path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"wrote {len(doc['features'])} features -> {out_path}")


def heatmap_geojson(env, dist):
    """FeatureCollection with per-cell count and share; polygon geometry
    when a boundary exists, else the centroid point."""
    total = dist.total
    features = []
    for cid in env.cell_ids:
        count = dist.counts.get(cid, 0)
        cell = env.cells[cid]
        if cell.boundary is not None:
            geometry = {"type": "Polygon",
                        "coordinates": [[[lon, lat] for lat, lon in cell.boundary]]}
        else:
            geometry = {"type": "Point",
                        "coordinates": [cell.centroid[1], cell.centroid[0]]}
        features.append({
            "type": "Feature",
            "properties": {"cell_id": cid, "count": count,
                           "share": (count / total) if total else 0.0},
            "geometry": geometry,
        })
    return {"type": "FeatureCollection", "features": features}


@cli.command()
@click.option("--city", "city_path", required=True, type=click.Path(exists=True))
@click.option("--runs-dir", default="runs", show_default=True, type=click.Path())
@click.option("--scenarios-dir", default=None, type=click.Path())
@click.option("--real", "real_specs", multiple=True, metavar="NAME=PATH",
              help="register a ground-truth distribution for /metrics")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--workers", default=1, show_default=True)
def serve(city_path, runs_dir, scenarios_dir, real_specs, host, port, workers):
    """Start the HTTP run service."""
    import uvicorn

    from .service import create_app

    env = _load_env_bundle(city_path)
    real_dists = {}
    for spec in real_specs:
        name, _, path = spec.partition("=")
        if not path:
            raise InputError(f"--real expects NAME=PATH, got '{spec}'")
        real_dists[name] = load_distribution(path, env=env)
    app = create_app(env, runs_dir=runs_dir, scenarios_dir=scenarios_dir,
                     real_dists=real_dists, workers=workers)
    uvicorn.run(app, host=host, port=port)


def main(argv=None):
    try:
        return cli.main(args=argv, standalone_mode=False) or 0
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except CrimesimError as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        return 2
    except click.exceptions.Abort:
        return 1


if __name__ == "__main__":
    sys.exit(main())
