"""Agent movement: exploration-and-preferential-return for citizens and
criminals, patrol policies for police.

Each step an agent explores a new cell with probability rho * S^-gamma
(S = distinct cells visited so far) and otherwise returns to a visited
cell proportionally to its visit count. Exploration targets are weighted
by inverse squared centroid distance from the current cell. Movement is
a pure function of (state, rng), so agents can be stepped in parallel
when each owns its own rng stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernels import masked_weighted_pick, weighted_pick

DEFAULT_RHO = 0.6
DEFAULT_GAMMA = 0.21


@dataclass(frozen=True)
class EprParams:
    rho: float = DEFAULT_RHO
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        # rho <= 1 keeps rho * S^-gamma a probability for every S >= 1
        if not 0.0 < self.rho <= 1.0:
            raise InputError("rho must be in (0, 1]")
        if self.gamma < 0.0:
            raise InputError("gamma must be >= 0")


@dataclass(frozen=True)
class PatrolPolicy:
    kind: str = "random_walk"  # or "hotspot_weighted"
    weights: dict | None = None  # cell id -> weight, for hotspot_weighted
    jurisdiction: frozenset | None = None  # None = whole city

    def __post_init__(self):
        if self.kind not in ("random_walk", "hotspot_weighted"):
            raise InputError(f"unknown patrol policy: {self.kind}")


def explore_probability(params, n_visited):
    """rho * S^-gamma for S distinct visited cells."""
    return params.rho * float(n_visited) ** -params.gamma


class _MobCache:
    """Index-aligned visited arrays kept coherent with visit_counts by
    the two mutators below; capacity doubles on growth."""

    __slots__ = ("idx", "cnt", "size", "pos")

    def __init__(self, state, env):
        n = max(8, 2 * len(state.visit_counts))
        self.idx = np.empty(n, dtype=np.int64)
        self.cnt = np.empty(n, dtype=np.float64)
        self.size = 0
        self.pos = {}
        for cid, count in state.visit_counts.items():
            self._append(env.index[cid], float(count))

    def _append(self, cell_idx, count):
        if self.size == self.idx.shape[0]:
            self.idx = np.concatenate([self.idx, np.empty_like(self.idx)])
            self.cnt = np.concatenate([self.cnt, np.empty_like(self.cnt)])
        self.idx[self.size] = cell_idx
        self.cnt[self.size] = count
        self.pos[cell_idx] = self.size
        self.size += 1

    def visit(self, cell_idx):
        at = self.pos.get(cell_idx)
        if at is None:
            self._append(cell_idx, 1.0)
        else:
            self.cnt[at] += 1.0


def _cache(state, env):
    cache = state._mob_cache
    if cache is None:
        cache = _MobCache(state, env)
        state._mob_cache = cache
    return cache


def _record_visit(state, env, cell_id):
    state.visit_counts[cell_id] = state.visit_counts.get(cell_id, 0) + 1
    state.location = cell_id
    if state._mob_cache is not None:
        state._mob_cache.visit(env.index[cell_id])


def epr_step(state, env, params, rng):
    """Advance one agent by one step; returns the chosen cell id.

    Mutates the agent's location and visit counts. When every cell has
    been visited, exploration falls back to preferential return.
    """
    if not state.visit_counts:
        raise InputError("agent has no visited cells")
    cache = _cache(state, env)
    s = cache.size
    u_branch = rng.random()
    u_pick = rng.random()

    choice = -1
    if u_branch < explore_probability(params, s) and s < env.n_cells:
        row = env.inv_sq_distance()[env.index[state.location]]
        choice = masked_weighted_pick(row, cache.idx[: cache.size], u_pick)
    if choice < 0:
        # preferential return, weighted by visit frequency
        at = weighted_pick(cache.cnt[: cache.size], u_pick)
        choice = int(cache.idx[at])
    cell_id = env.cell_ids[int(choice)]
    _record_visit(state, env, cell_id)
    return cell_id


def police_patrol_step(state, env, policy, rng):
    """Move one police agent per the patrol policy; returns the cell id.

    random_walk draws uniformly over the current cell and its neighbors.
    hotspot_weighted draws proportionally to the supplied per-cell
    weights restricted to the agent's jurisdiction, falling back to
    random_walk when every weight is zero.
    """
    if policy.kind == "hotspot_weighted" and policy.weights is not None:
        cells = sorted(policy.jurisdiction) if policy.jurisdiction else env.cell_ids
        w = np.array([max(0.0, float(policy.weights.get(cid, 0.0))) for cid in cells])
        u_pick = rng.random()
        at = weighted_pick(w, u_pick)
        if at >= 0:
            cell_id = cells[int(at)]
            _record_visit(state, env, cell_id)
            return cell_id
    options = [state.location] + sorted(env.cells[state.location].neighbors)
    cell_id = options[int(rng.integers(0, len(options)))]
    _record_visit(state, env, cell_id)
    return cell_id
