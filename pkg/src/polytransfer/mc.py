"""Monte Carlo plumbing shared across modules: sample budgets and estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class McSpec:
    """A Monte Carlo budget: sample count plus the seed that fixes the draws."""

    n_samples: int
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class McEstimate:
    """An estimate with its standard error and an optional diagnostic flag."""

    value: float
    stderr: float
    flag: str = ""

    def __float__(self) -> float:
        return self.value

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def scaled(self, factor: float) -> "McEstimate":
        return McEstimate(self.value * factor, self.stderr * abs(factor), self.flag)


def mean_and_stderr(values) -> McEstimate:
    import numpy as np

    v = np.asarray(values, dtype=float)
    n = v.size
    mean = float(np.mean(v))
    if n < 2:
        return McEstimate(mean, float("nan"))
    return McEstimate(mean, float(np.std(v, ddof=1) / math.sqrt(n)))
