"""Compositions of tabulated random functions [N] -> [N].

Each trial draws a fresh family (one table per level, or a single table in
``same`` mode) and measures the whole domain at once, so the per-function
averages are exact and the standard error is taken across function samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .report import StatReport, trial_rng

MAX_N = 2 ** 22
MAX_TABLE_BYTES = 1 << 30


@dataclass
class RandomFunctionFamily:
    N: int
    k: int
    mode: str = "independent"
    seed: int = 0
    rng: Optional[np.random.Generator] = field(default=None, repr=False)

    def __post_init__(self):
        if self.N < 2 or self.N > MAX_N or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two in [2, 2^22], got {self.N}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.mode not in ("independent", "same"):
            raise ValueError("mode is 'independent' or 'same'")
        levels = 1 if self.mode == "same" else self.k
        if levels * self.N * 4 > MAX_TABLE_BYTES:
            raise ValueError("tables would exceed 1 GiB")
        rng = self.rng if self.rng is not None else np.random.default_rng(self.seed)
        self.tables = rng.integers(0, self.N, size=(levels, self.N), dtype=np.uint32)

    def h(self, i: int) -> np.ndarray:
        """Table of h_i, 1-based."""
        if not 1 <= i <= self.k:
            raise IndexError(i)
        return self.tables[0 if self.mode == "same" else i - 1]

    def compose(self, x, i: int = 1, j: Optional[int] = None):
        """h_[i,j](x) = h_j(...h_i(x)); works on scalars and arrays."""
        j = self.k if j is None else j
        scalar = np.isscalar(x)
        y = np.asarray(x, dtype=np.uint32)
        for level in range(i, j + 1):
            y = self.h(level)[y]
        return int(y) if scalar else y

    def image_sizes(self) -> list[int]:
        """|h_[1,j]([N])| for j = 1..k."""
        mask = np.ones(self.N, dtype=bool)
        sizes = []
        for level in range(1, self.k + 1):
            nxt = np.zeros(self.N, dtype=bool)
            nxt[self.h(level)[mask]] = True
            mask = nxt
            sizes.append(int(mask.sum()))
        return sizes

    def preimage_counts(self) -> np.ndarray:
        """L_j = |{x : h_[1,k](x) = j}| for every j."""
        return np.bincount(self.compose(np.arange(self.N, dtype=np.uint32)), minlength=self.N)


def collides(family: RandomFunctionFamily, x: int, x2: int) -> bool:
    if x == x2:
        raise ValueError("the two points must differ")
    return family.compose(x) == family.compose(x2)


def image_recursion(N: int, k: int) -> float:
    """N alpha_k with alpha_0 = 1 and alpha_{j+1} = 1 - (1 - 1/N)^(alpha_j N)."""
    alpha = 1.0
    log_keep = math.log1p(-1.0 / N)
    for _ in range(k):
        alpha = -math.expm1(alpha * N * log_keep)
    return N * alpha


def collision_reference(N: int, k: int) -> float:
    """Two distinct points stay apart at each level with probability 1 - 1/N."""
    return -math.expm1(k * math.log1p(-1.0 / N))


def _check_regime(N: int, k: int) -> None:
    if k * k > N:
        raise ValueError(f"need k <= sqrt(N); got k={k}, N={N}")


def _family(N, k, seed, trial):
    return RandomFunctionFamily(N, k, rng=trial_rng(seed, trial))


def mc_image_size(N: int, k: int, trials: int = 100, seed: int = 0) -> StatReport:
    _check_regime(N, k)
    sizes = [_family(N, k, seed, t).image_sizes()[-1] for t in range(trials)]
    return StatReport.from_samples("image_size", sizes, image_recursion(N, k),
                                   {"N": N, "k": k, "seed": seed})


def mc_collision_prob(N: int, k: int, trials: int = 100, seed: int = 0) -> StatReport:
    """Per function, the exact collision rate over all distinct pairs; SE across functions."""
    _check_regime(N, k)
    rates = []
    for t in range(trials):
        L = _family(N, k, seed, t).preimage_counts().astype(np.float64)
        rates.append(float((L * (L - 1)).sum() / (N * (N - 1.0))))
    return StatReport.from_samples("collision_prob", rates, collision_reference(N, k),
                                   {"N": N, "k": k, "seed": seed})


def mc_preimage_stats(N: int, k: int, trials: int = 100, seed: int = 0,
                      eps: tuple[float, ...] = (0.5, 0.1)) -> dict[str, StatReport]:
    """Distribution of L at the image of a uniform x: mean, variance and tail.

    With x uniform, Pr[L_{h(x)} = l] weights each image point by L itself, so
    per function the mean is sum L^2 / N and so on.
    """
    _check_regime(N, k)
    means, variances = [], []
    tails: dict[float, list[float]] = {e: [] for e in eps}
    for t in range(trials):
        L = _family(N, k, seed, t).preimage_counts().astype(np.float64)
        m1 = float((L * L).sum() / N)
        m2 = float((L ** 3).sum() / N)
        means.append(m1)
        variances.append(m2 - m1 * m1)
        for e in eps:
            tails[e].append(float(L[L >= 2 * k / math.sqrt(e)].sum() / N))
    params = {"N": N, "k": k, "seed": seed}
    exact_mean = 1.0 + (N - 1) * collision_reference(N, k)
    out = {
        "mean": StatReport.from_samples("preimage_mean", means, k + 1.0, params, {"exact_finite_N": exact_mean}),
        "variance": StatReport.from_samples("preimage_variance", variances, 0.5 * (k + 1) ** 2, params),
    }
    for e in eps:
        out[f"tail_{e}"] = StatReport.from_samples(
            f"preimage_tail_eps_{e}", tails[e], e / 2, {**params, "eps": e},
            {"threshold": 2 * k / math.sqrt(e)})
    return out
