"""Seeded, counter-based random number generation.

Every stochastic routine in this package draws from a Philox counter-based
bit generator keyed by an integer seed.  Parallel or logically independent
sampling tasks derive child generators by jumping the counter
(``stream`` offsets), so results are bit-reproducible regardless of how
work is partitioned.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return the Philox generator for ``seed``, advanced to ``stream``.

    Distinct ``stream`` values yield non-overlapping counter ranges of the
    same keyed sequence; ``(seed, stream)`` fully determines the draws.
    """
    bg = np.random.Philox(key=np.uint64(seed))
    if stream:
        bg = bg.jumped(stream)
    return np.random.Generator(bg)


def combine_means(means, ns):
    """Sample-weighted combination of partial Monte Carlo means."""
    means = np.asarray(means, dtype=float)
    ns = np.asarray(ns, dtype=float)
    return float(np.sum(means * ns) / np.sum(ns))
