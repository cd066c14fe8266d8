from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, derived from (seed, trial)."""
    return np.random.default_rng([seed, trial])


@dataclass(frozen=True)
class StatReport:
    """A Monte Carlo estimate with its standard error and a reference value."""

    name: str
    estimate: float
    se: float
    trials: int
    reference: Optional[float] = None
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, name: str, samples: Sequence[float], reference=None, params=None, extra=None):
        xs = np.asarray(samples, dtype=float)
        n = len(xs)
        se = float(xs.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        return cls(name, float(xs.mean()), se, n, reference, dict(params or {}), dict(extra or {}))

    def z(self) -> float:
        if self.reference is None:
            raise ValueError("no reference value")
        if self.se == 0:
            return 0.0 if self.estimate == self.reference else math.copysign(math.inf, self.estimate - self.reference)
        return (self.estimate - self.reference) / self.se

    def within(self, n_se: float = 3.0) -> bool:
        return abs(self.estimate - self.reference) <= n_se * self.se

    def to_record(self) -> dict:
        return asdict(self)
