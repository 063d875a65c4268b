"""Seed derivation helpers.

All randomness in the package flows through generators derived here, so that a
single 64-bit seed reproduces every draw regardless of scheduling or platform.
"""

import hashlib
import random

import numpy as np


def subseed(seed: int, *tags) -> int:
    """Derive a stable 64-bit sub-seed from a master seed and a tag path."""
    text = f"{seed}|" + "|".join(str(t) for t in tags)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(seed: int, *tags) -> random.Random:
    return random.Random(subseed(seed, *tags))


def np_rng_for(seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(subseed(seed, *tags))
