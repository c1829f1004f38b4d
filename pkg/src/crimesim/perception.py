"""Street-level perception: per-image safety scores aggregated to
per-cell profiles, human annotation handling, agreement statistics, and
the prompt-refinement loop that aligns machine scores with human
judgment.

Image pixels never enter this module; scoring is delegated to an engine
abstraction (a remote vision-capable endpoint or a fixture table).
"""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import CrimesimError, InputError, MetricError
from .seeding import substream

SAFETY_LEVELS = 20  # discretization of normalized human scores


@dataclass(frozen=True)
class ImageScoreRecord:
    image_id: str
    cell_id: str
    safety_score: float
    descriptors: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.safety_score <= 1.0:
            raise InputError(f"image {self.image_id}: safety_score out of [0,1]")


@dataclass(frozen=True)
class AnnotationSet:
    """Direct 3-point ratings (annotator x image) plus optional
    most-to-least-safe triplet rankings."""

    image_ids: tuple
    ratings: tuple  # rows per annotator, aligned with image_ids
    triplet_rankings: tuple = ()  # ((img_a, img_b, img_c), "bca") entries

    def __post_init__(self):
        for row in self.ratings:
            if len(row) != len(self.image_ids):
                raise InputError("every annotator must rate every image")
            if any(r not in (1, 2, 3) for r in row):
                raise InputError("ratings must be on the 3-point scale {1,2,3}")
        for triple, order in self.triplet_rankings:
            if sorted(order) != ["a", "b", "c"] or len(triple) != 3:
                raise InputError(f"triplet order '{order}' is not a permutation of abc")

    def matrix(self):
        return np.array(self.ratings, dtype=np.float64)


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    prompt: str
    train_pearson: float
    eval_pearson: float


@dataclass
class AlignmentResult:
    best_prompt: str
    trace: list
    converged: bool
    best_train_pearson: float
    eval_pearson: float
    aborted: str | None = None

    def to_dict(self):
        return {
            "best_prompt": self.best_prompt,
            "converged": self.converged,
            "best_train_pearson": self.best_train_pearson,
            "eval_pearson": self.eval_pearson,
            "aborted": self.aborted,
            "trace": [
                {"iteration": t.iteration, "prompt": t.prompt,
                 "train_pearson": t.train_pearson, "eval_pearson": t.eval_pearson}
                for t in self.trace
            ],
        }


def read_image_scores(path):
    """CSV image_id,cell_id,safety_score,descriptors_json -> records."""
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            descriptors = tuple(json.loads(row.get("descriptors_json") or "[]"))
            records.append(ImageScoreRecord(
                image_id=row["image_id"], cell_id=row["cell_id"],
                safety_score=float(row["safety_score"]), descriptors=descriptors,
            ))
    return records


def read_annotations(path):
    """CSV annotator_id,image_id,rating -> AnnotationSet (complete matrix)."""
    cells = {}
    annotators, images = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            a, i = row["annotator_id"], row["image_id"]
            if a not in annotators:
                annotators.append(a)
            if i not in images:
                images.append(i)
            cells[(a, i)] = int(row["rating"])
    try:
        ratings = tuple(tuple(cells[(a, i)] for i in images) for a in annotators)
    except KeyError as exc:
        raise InputError(f"annotation matrix incomplete: missing {exc.args[0]}") from exc
    return AnnotationSet(image_ids=tuple(images), ratings=ratings)


def read_triplets(path):
    """CSV image_a,image_b,image_c,order with order like 'bca'."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(((row["image_a"], row["image_b"], row["image_c"]), row["order"]))
    return tuple(out)


def aggregate_cell_perception(records, summarizer=None):
    """Mean safety score plus a semantic summary for one cell.

    The deterministic fallback summarizer joins the five most frequent
    descriptors (ties keep first-seen order); pass `summarizer` to
    delegate to a language model instead.
    """
    records = list(records)
    if not records:
        raise InputError("cell has no image records; exclude it from simulation")
    score = sum(r.safety_score for r in records) / len(records)
    if summarizer is not None:
        return score, summarizer(records)
    seen_at = {}
    counts = Counter()
    for r in records:
        for d in r.descriptors:
            counts[d] += 1
            seen_at.setdefault(d, len(seen_at))
    ranked = sorted(counts, key=lambda d: (-counts[d], seen_at[d]))
    return score, ", ".join(ranked[:5])


def _round_half_up(x):
    return math.floor(x + 0.5)


def aggregate_annotations(annset):
    """Per-image mean rating, min-max normalized over the set and
    quantized half-up onto 20 levels {0, 1/19, ..., 1}."""
    m = annset.matrix()
    if m.shape[0] < 2:
        raise InputError("need at least two annotators")
    means = m.mean(axis=0)
    lo, hi = float(means.min()), float(means.max())
    if hi - lo <= 0.0:
        raise MetricError("all images share one mean rating; normalization degenerate")
    out = {}
    for image_id, mean in zip(annset.image_ids, means):
        norm = (float(mean) - lo) / (hi - lo)
        out[image_id] = _round_half_up(norm * (SAFETY_LEVELS - 1)) / (SAFETY_LEVELS - 1)
    return out


def triplet_points(triplet_rankings):
    """Most-to-least-safe triplet orders -> per-image points (2/1/0 per
    triplet, summed)."""
    points = Counter()
    for (triple, order) in triplet_rankings:
        by_slot = dict(zip("abc", triple))
        for rank, slot in enumerate(order):
            points[by_slot[slot]] += 2 - rank
    return dict(points)


def merge_human_scores(direct, triplet_pts):
    """Average of min-max-normalized direct scores and triplet points,
    per image; images present in only one source keep that source."""

    def normalized(d):
        if not d:
            return {}
        lo, hi = min(d.values()), max(d.values())
        if hi - lo <= 0:
            return {k: 0.5 for k in d}
        return {k: (v - lo) / (hi - lo) for k, v in d.items()}

    a, b = normalized(direct), normalized(triplet_pts)
    merged = {}
    for k in set(a) | set(b):
        vals = [d[k] for d in (a, b) if k in d]
        merged[k] = sum(vals) / len(vals)
    return merged


def cronbach_alpha(ratings):
    """Internal consistency with annotators as items and population
    variances: k/(k-1) * (1 - sum(item variances) / variance of totals)."""
    m = np.array(ratings, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise InputError("need >= 2 annotators and >= 2 images")
    k = m.shape[0]
    item_vars = m.var(axis=1)
    total_var = m.sum(axis=0).var()
    if total_var <= 0.0:
        raise MetricError("zero variance across image totals; alpha undefined")
    return (k / (k - 1.0)) * (1.0 - item_vars.sum() / total_var)


def pearson(x, y):
    """Sample Pearson correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise InputError("vectors must share length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise MetricError("pearson undefined for a constant vector")
    return float(xc @ yc) / (sx * sy)


@dataclass(frozen=True)
class AlignmentDataset:
    image_ids: tuple
    human_scores: dict  # image_id -> score in [0,1]


@dataclass
class LoopConfig:
    initial_prompt: str
    max_iters: int = 8
    patience: int = 3
    train_fraction: float = 0.7
    split_seed: int = 13
    worst_k: int = 10


def split_dataset(dataset, train_fraction=0.7, seed=13):
    """Seeded shuffle split of image ids into (train, eval)."""
    ids = list(dataset.image_ids)
    rng = substream(seed, "align-split")
    rng.shuffle(ids)
    cut = max(1, min(len(ids) - 1, round(train_fraction * len(ids))))
    return ids[:cut], ids[cut:]


def _score_split(scorer, prompt, ids, human):
    machine = [scorer(prompt, i) for i in ids]
    target = [human[i] for i in ids]
    return machine, pearson(machine, target)


def align_prompt(dataset, scorer, optimizer, loop_config):
    """Iterative prompt refinement against human safety judgments.

    Each round scores the train split with the current prompt, hands the
    optimizer the prompt, its worst-aligned samples, and the train
    correlation, and adopts the proposed prompt only when it improves
    train Pearson. Stops on patience consecutive stalls or max_iters.
    The result's converged flag records whether any proposal was
    adopted; a scorer/optimizer transport failure aborts the loop with
    the partial trace retained.
    """
    train_ids, eval_ids = split_dataset(dataset, loop_config.train_fraction,
                                        loop_config.split_seed)
    human = dataset.human_scores
    trace = []

    def evaluate(prompt):
        machine, train_r = _score_split(scorer, prompt, train_ids, human)
        _, eval_r = _score_split(scorer, prompt, eval_ids, human)
        return machine, train_r, eval_r

    try:
        machine, train_r, eval_r = evaluate(loop_config.initial_prompt)
    except CrimesimError as exc:
        return AlignmentResult(best_prompt=loop_config.initial_prompt, trace=[],
                               converged=False, best_train_pearson=float("nan"),
                               eval_pearson=float("nan"), aborted=str(exc))
    trace.append(TraceEntry(0, loop_config.initial_prompt, train_r, eval_r))
    best_prompt, best_r, best_eval = loop_config.initial_prompt, train_r, eval_r
    best_machine = machine
    stalls = 0
    aborted = None

    for iteration in range(1, loop_config.max_iters + 1):
        worst = sorted(
            zip(train_ids, best_machine),
            key=lambda pair: -abs(pair[1] - human[pair[0]]),
        )[: loop_config.worst_k]
        samples = [(i, m, human[i]) for i, m in worst]
        try:
            proposal = optimizer(best_prompt, samples, best_r)
            machine, train_r, eval_r = evaluate(proposal)
        except CrimesimError as exc:
            aborted = str(exc)
            break
        trace.append(TraceEntry(iteration, proposal, train_r, eval_r))
        if train_r > best_r:
            best_prompt, best_r, best_eval = proposal, train_r, eval_r
            best_machine = machine
            stalls = 0
        else:
            stalls += 1
            if stalls >= loop_config.patience:
                break

    return AlignmentResult(
        best_prompt=best_prompt, trace=trace,
        converged=best_prompt != loop_config.initial_prompt and aborted is None,
        best_train_pearson=best_r, eval_pearson=best_eval, aborted=aborted,
    )
