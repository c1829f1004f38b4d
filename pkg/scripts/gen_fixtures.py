#!/usr/bin/env python3
"""Regenerate the checked-in fixtures from seeded generators.

Run from the repo root: python3 scripts/gen_fixtures.py
"""
import csv
import json
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from crimesim.decision import (AblationFlags, CellView, CriminalView, DecisionContext,
                               TargetView, load_template, render_prompt)
from crimesim.perception import AlignmentDataset, aggregate_annotations, pearson, read_annotations, split_dataset
from crimesim.seeding import substream
from crimesim.synth import synthetic_city, write_boundaries_geojson, write_features_csv

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"


def gen_mini_city():
    out = FIX / "mini_city"
    out.mkdir(parents=True, exist_ok=True)
    env = synthetic_city(16, seed=5, name="miniville", boundaries=True)
    write_features_csv(env, out / "features.csv")
    write_boundaries_geojson(env, out / "boundaries.geojson")

    # crime records: concentrated in a few cells, plus strays outside the
    # period and outside the grid
    rng = substream(5, "mini-crimes")
    hot = ["g05", "g06", "g09", "g10"]
    rows = []
    for i in range(70):
        cid = hot[i % len(hot)] if i % 3 != 2 else env.cell_ids[int(rng.integers(0, 16))]
        lat, lon = env.cells[cid].centroid
        lat += float(rng.uniform(-0.004, 0.004))
        lon += float(rng.uniform(-0.004, 0.004))
        month = 1 + int(rng.integers(0, 12))
        day = 1 + int(rng.integers(0, 28))
        rows.append((f"2019-{month:02d}-{day:02d}T{int(rng.integers(0, 24)):02d}:00:00",
                     lat, lon, "", "theft"))
    rows.append(("2018-06-01T12:00:00", *env.cells["g00"].centroid, "", "theft"))
    rows.append(("2019-06-01T12:00:00", 45.0, -100.0, "", "theft"))
    with open(out / "crimes.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_iso8601", "lat", "lon", "cell_id", "category"])
        writer.writerows(rows)

    (FIX / "run_routine.json").write_text(json.dumps({
        "city": {"features": "mini_city/features.csv",
                 "boundaries": "mini_city/boundaries.geojson"},
        "counts": {"citizens": 60, "criminals": 15, "police": 6},
        "steps": 12,
        "seed": 7,
        "engine": "routine",
        "engine_params": {"p_base": 0.05},
        "mobility": {"rho": 0.6, "gamma": 0.21, "police_policy": "random_walk"},
    }, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def gen_scenarios():
    out = FIX / "scenarios"
    out.mkdir(parents=True, exist_ok=True)
    blm = {
        "name": "blm_chicago",
        "interventions": [{
            "kind": "context_injection",
            "start_step": 1,
            "end_step": 50,
            "params": {"text": (
                "**Current Situation Updates:**\n"
                "It is August 2020 and large Black Lives Matter protests are "
                "underway across the city following a police shooting. Crowds "
                "gather daily along downtown corridors; police units are "
                "concentrated around protest routes, stretching coverage thin "
                "elsewhere. Social tensions are heightened, storefronts near "
                "commercial strips are boarded up, and sporadic looting has "
                "been reported after dark.")},
        }],
    }
    dallas = {
        "name": "dallas_plan",
        "interventions": [
            {"kind": "hotspot_policing", "start_step": 1, "end_step": 50, "params": {}},
            {"kind": "offender_removal", "start_step": 1, "end_step": 50,
             "params": {"k": 10}},
        ],
    }
    (out / "blm_chicago.json").write_text(json.dumps(blm, indent=2) + "\n", encoding="utf-8")
    (out / "dallas_plan.json").write_text(json.dumps(dallas, indent=2) + "\n", encoding="utf-8")


def _scores_with_correlation(human, target_r, rng):
    """Machine scores with Pearson exactly target_r against `human`."""
    h = np.asarray(human, dtype=np.float64)
    z = h - h.mean()
    z /= np.linalg.norm(z)
    noise = rng.standard_normal(h.size)
    noise -= noise.mean()
    noise -= (noise @ z) * z
    noise /= np.linalg.norm(noise)
    s = target_r * z + math.sqrt(1.0 - target_r ** 2) * noise
    s = (s - s.min()) / (s.max() - s.min())  # affine rescale keeps r
    return np.round(s, 6)


def gen_align():
    out = FIX / "align"
    out.mkdir(parents=True, exist_ok=True)
    rng = substream(23, "align-fixture")
    images = [f"img{i:02d}" for i in range(20)]
    annotators = ["a1", "a2", "a3"]
    latent = rng.uniform(0.0, 1.0, size=len(images))
    base = (1 + np.floor(latent * 3)).astype(int)
    with open(out / "annotations.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["annotator_id", "image_id", "rating"])
        for a_i, ann in enumerate(annotators):
            for i, img in enumerate(images):
                jitter = int(rng.integers(0, 3)) - 1 if a_i and rng.random() < 0.4 else 0
                writer.writerow([ann, img, int(np.clip(base[i] + jitter, 1, 3))])

    with open(out / "triplets.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_a", "image_b", "image_c", "order"])
        for _ in range(10):
            tri = rng.choice(len(images), size=3, replace=False)
            vals = [(base[t], "abc"[j]) for j, t in enumerate(tri)]
            order = "".join(slot for _, slot in sorted(vals, key=lambda p: -p[0]))
            writer.writerow([images[tri[0]], images[tri[1]], images[tri[2]], order])

    annset = read_annotations(out / "annotations.csv")
    human = aggregate_annotations(annset)
    dataset = AlignmentDataset(image_ids=tuple(sorted(human)), human_scores=human)
    train_ids, eval_ids = split_dataset(dataset, 0.7, 13)

    prompts = [
        "Rate the street-level safety of this image from 0 to 1.",
        ("Rate the street-level safety of this image from 0 to 1, weighing "
         "lighting, upkeep, visible activity, and sightlines the way a "
         "resident walking alone would."),
    ]
    for ids in (train_ids, eval_ids):
        values = {human[i] for i in ids}
        assert len(values) > 1, "split half has constant human scores; reseed"

    table = {}
    for prompt_index, target_r in ((0, 0.42), (1, 0.90)):
        for ids in (train_ids, eval_ids):
            h = [human[i] for i in ids]
            s = _scores_with_correlation(h, target_r, rng)
            for img, val in zip(ids, s):
                table[(prompt_index, img)] = float(val)
    with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prompt_index", "image_id", "score"])
        for (pi, img), val in sorted(table.items()):
            writer.writerow([pi, img, val])

    # rounding to 6 decimals perturbs the engineered correlation slightly
    for pi, r in ((0, 0.42), (1, 0.90)):
        got = pearson([table[(pi, i)] for i in train_ids], [human[i] for i in train_ids])
        assert abs(got - r) < 5e-3, (pi, got)

    (out / "align_config.json").write_text(json.dumps({
        "annotations_csv": "annotations.csv",
        "prompts": prompts,
        "scores_csv": "scores.csv",
        "max_iters": 1,
        "patience": 3,
        "train_fraction": 0.7,
        "split_seed": 13,
    }, indent=2) + "\n", encoding="utf-8")


def gen_golden_prompt():
    out = FIX / "golden"
    out.mkdir(parents=True, exist_ok=True)
    context = DecisionContext(
        criminal=CriminalView(
            agent_id="crm_00042", gender="male", race="hispanic", residence="g03",
            historical_trajectory=("step 1: moved to g05",
                                   "step 2: committed crime against cit_00007 at g05",
                                   "step 3: moved to g06"),
            criminal_record=("petty theft", "vandalism"),
            current_location="g06",
        ),
        targets=(TargetView("cit_00019", "female", "white"),
                 TargetView("cit_00031", "male", "black")),
        police_count=1,
        cell=CellView(
            semantic_description="dim lighting after dusk, vacant lots, boarded windows",
            safety_score=0.34, poi_count=9, population=1450,
            average_income=41250.0, poverty_ratio=0.23, housing_value=182300.0,
        ),
        city_meta={"city": "Miniville", "mayor": "J. Ortega", "party": "Independent",
                   "strategy": "community-first policing with targeted patrols"},
        ablation=AblationFlags(),
        step=4,
    )
    system_text, user_text = render_prompt(context, load_template())
    (out / "criminal_prompt_system.txt").write_text(system_text, encoding="utf-8")
    (out / "criminal_prompt_user.txt").write_text(user_text, encoding="utf-8")
    (out / "golden_context.json").write_text(json.dumps({
        "note": "fixture context for the byte-exact prompt rendering check",
        "criminal": context.criminal.__dict__ | {
            "historical_trajectory": list(context.criminal.historical_trajectory),
            "criminal_record": list(context.criminal.criminal_record)},
        "targets": [t.__dict__ for t in context.targets],
        "police_count": context.police_count,
        "cell": context.cell.__dict__,
        "city_meta": context.city_meta,
        "step": context.step,
    }, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    gen_mini_city()
    gen_scenarios()
    gen_align()
    gen_golden_prompt()
    print("fixtures regenerated under", FIX)
