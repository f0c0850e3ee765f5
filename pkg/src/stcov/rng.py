"""Deterministic random-number substreams.

All randomness in the package flows through counter-based Philox generators
keyed by an explicit integer seed plus a path of integer labels.  Distinct
paths give statistically independent streams, and a stream depends only on
(seed, path) -- never on thread count or evaluation order -- so every
stochastic pipeline is reproducible bit-for-bit.
"""

from __future__ import annotations

import numpy as np

Seed = int | tuple[int, ...]

# Path labels used by the rank test and the reproduction harness.
STAGE_OBSERVED = 0
STAGE_BOOTSTRAP = 1
ROLE_PSEUDO_OBS = 0
ROLE_H0 = 1
ROLE_REFERENCE = 2


def seed_path(seed: Seed, *path: int) -> tuple[int, ...]:
    """Flatten a seed plus path labels into one entropy tuple."""
    if isinstance(seed, (int, np.integer)):
        base: tuple[int, ...] = (int(seed),)
    else:
        base = tuple(int(s) for s in seed)
    return base + tuple(int(x) for x in path)


def substream(seed: Seed, *path: int) -> np.random.Generator:
    """Return the Philox generator for ``(seed, *path)``.

    The same arguments always return a generator producing the same
    sequence; different paths hash to unrelated streams.
    """
    entropy = seed_path(seed, *path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
