"""Login sessions against checkpoint plans, counting hashes without hashing.

A session starts with a fresh chain of ``ell`` slots and a plan placed from
offset 0. Gaps between logins are ceil(Exp(lambda)) slots (at least one); the
session ends at the first login past the head. Each login costs
cover(t) - t hashes, after which the plan is recomputed for the remaining
chain, as the prover does. All schemes see the same gap sequences.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..checkpoints import ExponentialModel, LoginModel, expected_cost, make_plan
from .report import StatReport, trial_rng

SCHEMES = ("naive", "recursive", "expectation_optimal", "mixed")


def sample_gaps(ell: int, lam: float, rng: np.random.Generator) -> list[int]:
    """Gaps of one session, truncated once the running total passes ell."""
    gaps, total = [], 0
    while True:
        chunk = np.maximum(1, np.ceil(rng.exponential(1.0 / lam, size=64))).astype(np.int64)
        for g in chunk.tolist():
            total += g
            if total > ell:
                return gaps
            gaps.append(g)


def replay_costs(ell: int, gaps: Iterable[int], scheme: str, q: int, model: LoginModel,
                 q_worst: Optional[int] = None, reposition: bool = True) -> list[int]:
    """Hash count of each login in one session."""
    now = 0
    slots = sorted(make_plan(scheme, ell, q, model, q_worst).positions)
    costs = []
    for g in gaps:
        t = now + g
        if t > ell:
            break
        i = bisect.bisect_left(slots, t)
        cover = slots[i] if i < len(slots) else ell
        costs.append(cover - t)
        now = t
        if reposition and now < ell:
            slots = [now + c for c in make_plan(scheme, ell - now, q, model, q_worst).positions]
        elif not reposition:
            slots = slots[i:]
    return costs


@dataclass(frozen=True)
class LoginCostReport:
    scheme: str
    q: int
    mean: float
    se: float
    max: int
    logins: int
    sessions: int

    def to_record(self) -> dict:
        return dict(self.__dict__)


def simulate_logins(ell: int, model: ExponentialModel, schemes: Sequence[str] = SCHEMES, q: int = 20,
                    sessions: int = 200, seed: int = 0, q_worst: Optional[int] = None,
                    reposition: bool = True) -> dict[str, LoginCostReport]:
    """Mean and max hashes per login for each scheme over the same sessions.

    The standard error treats sessions as the independent units (logins in a
    session share a plan history).
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    all_gaps = [sample_gaps(ell, model.lam, trial_rng(seed, s)) for s in range(sessions)]
    out = {}
    for scheme in schemes:
        per_session_sum, per_session_n, worst = [], [], 0
        for gaps in all_gaps:
            costs = replay_costs(ell, gaps, scheme, q, model, q_worst, reposition)
            per_session_sum.append(sum(costs))
            per_session_n.append(len(costs))
            worst = max([worst, *costs])
        sums, ns = np.array(per_session_sum, float), np.array(per_session_n, float)
        n_logins = int(ns.sum())
        mean = sums.sum() / n_logins if n_logins else 0.0
        # ratio estimator standard error over sessions
        if sessions > 1 and n_logins:
            resid = sums - mean * ns
            se = math.sqrt((resid ** 2).sum() / (sessions * (sessions - 1))) / ns.mean()
        else:
            se = math.nan
        out[scheme] = LoginCostReport(scheme, q, float(mean), float(se), int(worst), n_logins, sessions)
    return out


def mc_expected_cost(plan, model: ExponentialModel, samples: int = 100_000, seed: int = 0) -> StatReport:
    """Single-login cost from a fresh plan at a continuous Exp(lambda) time.

    Logins after the head cost nothing, matching :func:`expected_cost`.
    """
    rng = trial_rng(seed, 0)
    t = rng.exponential(1.0 / model.lam, size=samples)
    pos = np.array([*plan.positions, plan.ell], dtype=float)
    cover = pos[np.minimum(np.searchsorted(pos, t, side="left"), len(pos) - 1)]
    cost = np.where(t <= plan.ell, cover - t, 0.0)
    return StatReport.from_samples("expected_cost", cost, expected_cost(plan, model),
                                   {"ell": plan.ell, "scheme": plan.scheme, "q": len(plan.positions)})
