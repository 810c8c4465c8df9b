"""Derivation of independent, reproducible random streams.

Every stochastic routine in the toolkit draws from a generator derived from
``(seed, domain, *indices)`` rather than from a shared global stream.  Two
consequences:

* a run is bit-exact reproducible from its seed alone, and
* work units (matrix cells, sampling steps) can be computed in any order or
  on any number of workers without changing a single draw, because each unit
  regenerates its own stream from the key.

Within one reverse-sampling run the per-step noise block is keyed by
``(seed, STEP_NOISE, step_index)`` and indexed by path, so a worker holding a
slice of paths reproduces exactly the values a sequential run would use.
"""
from __future__ import annotations

import numpy as np

# Domain tags; never reuse a value for a new purpose.
BASE_INIT = 1
STEP_NOISE = 2
FORWARD_SIM = 3
KERNEL_DRAW = 4
TRAIN_INIT = 5
TRAIN_STEP = 6
WORLD_DRAW = 7
REFERENCE = 8

_MASK = (1 << 32) - 1


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return a fresh generator for the stream identified by (seed, *key)."""
    words = [int(seed) & _MASK] + [int(k) & _MASK for k in key]
    return np.random.default_rng(np.random.SeedSequence(words))
