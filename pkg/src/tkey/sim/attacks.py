"""Inversion attacks on iterated random functions.

Budgets count oracle queries, one table lookup each. Computing the target
y = h_[1,k](x) is the challenger's work and is not charged.
"""

from __future__ import annotations

import math

import numpy as np

from .functions import MAX_N, RandomFunctionFamily
from .report import StatReport, trial_rng


def same_function_bound(N: int, k: int, T: int) -> float:
    """Success lower bound 1 - (1 - k/N)^(T - k) of the forward-walk attack."""
    return -math.expm1((T - k) * math.log1p(-k / N))


def independent_bound(N: int, k: int, T: int) -> float:
    """Upper bound (2T + 2k + 1)/N for inverting a chain of independent functions."""
    return (2 * T + 2 * k + 1) / N


def _check_N(N: int) -> None:
    if N < 2 or N > MAX_N or N & (N - 1):
        raise ValueError("N must be a power of two in [2, 2^22]")


def walk_invert(table: np.ndarray, y: int, T: int, rng: np.random.Generator) -> tuple[bool, int]:
    """Invert one function by walking forward from y.

    Walk x_0 = y, x_j = h(x_{j-1}); returning to y means x_{j-1} is a
    preimage. Hitting an already seen point restarts at a uniformly random
    unseen one. Returns (success, queries used).
    """
    N = len(table)
    seen = {y}
    cur = y
    pool = iter(())
    for used in range(1, T + 1):
        nxt = int(table[cur])
        if nxt == y:
            return True, used
        if nxt not in seen:
            seen.add(nxt)
            cur = nxt
            continue
        if len(seen) == N:
            return False, used
        while True:
            cand = next(pool, None)
            if cand is None:
                pool = iter(rng.integers(0, N, size=64).tolist())
                continue
            if cand not in seen:
                break
        seen.add(cand)
        cur = cand
    return False, T


def attack_same_function(N: int, k: int, T: int, trials: int = 1000, seed: int = 0,
                         check_regime: bool = True) -> StatReport:
    """Forward-walk inversion of h^(k) for a single tabulated h."""
    _check_N(N)
    if T < 1:
        raise ValueError("T must be >= 1")
    if check_regime and not (k * k <= N and 2 * k <= T <= N // k):
        raise ValueError("outside the regime k <= sqrt(N), 2k <= T <= N/k")
    wins = []
    for t in range(trials):
        rng = trial_rng(seed, t)
        fam = RandomFunctionFamily(N, k, "same", rng=rng)
        y = fam.compose(int(rng.integers(0, N)))
        ok, _ = walk_invert(fam.h(1), y, T, rng)
        wins.append(1.0 if ok else 0.0)
    return StatReport.from_samples("attack_same_function", wins, same_function_bound(N, k, T),
                                   {"N": N, "k": k, "T": T, "seed": seed})


def _lazy_chain_guess(N: int, k: int, m: int, rng: np.random.Generator) -> bool:
    """Evaluate h_[1,k] on m random guesses and the hidden x_0 with lazily sampled tables.

    At each level the distinct current points get fresh uniform values; equal
    inputs share one value. This is exactly the joint law of full tables
    restricted to the points touched.
    """
    pts = rng.integers(0, N, size=m + 1)  # pts[0] is x_0
    for _ in range(k):
        uniq, inv = np.unique(pts, return_inverse=True)
        pts = rng.integers(0, N, size=len(uniq))[inv]
    return bool(np.any(pts[1:] == pts[0]))


def _explicit_chain_guess(N: int, k: int, m: int, rng: np.random.Generator) -> bool:
    fam = RandomFunctionFamily(N, k, rng=rng)
    pts = rng.integers(0, N, size=m + 1)
    out = fam.compose(pts.astype(np.uint32))
    return bool(np.any(out[1:] == out[0]))


def attack_independent(N: int, k: int, T: int, trials: int = 1000, seed: int = 0,
                       tables: str = "lazy") -> StatReport:
    """Guess a preimage of the whole chain by evaluating it on floor(T/k) random points.

    ``tables="explicit"`` tabulates all k functions per trial; ``"lazy"``
    samples only the entries the attack touches and is what makes N = 2^20
    affordable.
    """
    _check_N(N)
    if T < 0 or k < 1:
        raise ValueError("need T >= 0 and k >= 1")
    guess = {"lazy": _lazy_chain_guess, "explicit": _explicit_chain_guess}[tables]
    m = T // k
    wins = []
    for t in range(trials):
        rng = trial_rng(seed, t)
        wins.append(1.0 if m and guess(N, k, m, rng) else 0.0)
    return StatReport.from_samples("attack_independent", wins, independent_bound(N, k, T),
                                   {"N": N, "k": k, "T": T, "seed": seed, "tables": tables},
                                   {"guesses": m, "heuristic": T / N})
