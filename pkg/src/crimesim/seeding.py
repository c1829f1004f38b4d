"""Deterministic RNG stream derivation.

Every agent owns independent named streams derived from (run seed,
agent id, purpose) so agents can be evaluated in parallel without
sharing generator state. Streams are consumed sequentially across the
simulation's steps.
"""
import hashlib

import numpy as np

MOVE = "move"
DECIDE = "decide"


def stable_hash64(value) -> int:
    """Platform- and process-stable 64-bit hash of a string-able value."""
    return int.from_bytes(hashlib.sha256(str(value).encode("utf-8")).digest()[:8], "big")


def substream(seed, *parts):
    """A fresh Generator keyed by the run seed plus arbitrary parts."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [stable_hash64(p) for p in parts]
    return np.random.default_rng(np.random.SeedSequence(entropy))
