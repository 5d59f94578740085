"""Deterministic RNG substreams derived from one root seed.

Every source of randomness in the toolkit pulls a named stream from the
root seed, so components can be re-run independently and reproduce bit
for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_seed(root_seed: int, *labels) -> int:
    """Stable 64-bit seed for the substream named by ``labels``."""
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big")


def substream(root_seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(stream_seed(root_seed, *labels))


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
