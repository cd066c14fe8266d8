"""Checkpoint placement over the remaining part of a chain.

Coordinates are tail-relative: offset 0 is the slot of the last login, offset
``ell`` is the head. A login at offset ``t`` is served by the lowest checkpoint
at or above ``t`` (or the head) and costs ``cover - t`` hashes.

All solvers work on the continuous relaxation and round once at the end, half
up, dropping duplicates. The continuous solution is kept on the plan as
``raw`` so that stationarity residuals can be audited.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import InvalidParams, NonConvergence

SCHEMES = ("naive", "recursive", "expectation_optimal", "mixed")


# -- Lambert W ---------------------------------------------------------------

def lambert_w0(z: float, max_iter: int = 100) -> float:
    """Principal branch W0(z) for z >= 0 by Halley iteration from log1p(z)."""
    if z < 0 or math.isnan(z):
        raise ValueError("lambert_w0 is only defined here for z >= 0")
    if z == 0:
        return 0.0
    if math.isinf(z):
        return math.inf
    if z > 1e10:
        return _w_of_log(math.log(z), max_iter)
    w = math.log1p(z)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 4e-16 * abs(w):
            return w
    raise NonConvergence(f"lambert_w0({z!r}) did not converge")


def _w_of_log(L: float, max_iter: int) -> float:
    # Newton on w + log(w) = L, valid for L > 1
    w = L - math.log(L)
    for _ in range(max_iter):
        step = (w + math.log(w) - L) * w / (w + 1.0)
        w -= step
        if abs(step) <= 4e-16 * w:
            return w
    raise NonConvergence(f"W0(exp({L!r})) did not converge")


def lambert_w0_exp(L: float, max_iter: int = 100) -> float:
    """W0(exp(L)) without forming exp(L) when it would overflow."""
    if L < 23.0:
        return lambert_w0(math.exp(L), max_iter)
    return _w_of_log(L, max_iter)


# -- login models --------------------------------------------------------------

class LoginModel:
    """Distribution of the offset of the next login. Subclasses give pdf and cdf.

    The generic single-checkpoint solver bisects ``mass_ratio(a, x) = b - x``.
    """

    def pdf(self, t: float) -> float:
        raise NotImplementedError

    def cdf(self, t: float) -> float:
        raise NotImplementedError

    def mass(self, a: float, b: float) -> float:
        return self.cdf(b) - self.cdf(a)

    def mass_ratio(self, a: float, x: float) -> float:
        """(F(x) - F(a)) / p(x)."""
        return self.mass(a, x) / self.pdf(x)

    def partial_mean(self, ell: float) -> float:
        """Integral of t p(t) over [0, ell]."""
        from scipy.integrate import quad

        return quad(lambda t: t * self.pdf(t), 0.0, ell, limit=200)[0]

    def single_checkpoint(self, a: float, b: float) -> float:
        lo, hi = a, b
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.mass_ratio(a, mid) - (b - mid) < 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def sample(self, rng) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialModel(LoginModel):
    """Poisson logins: p(t) = lam e^{-lam t}. ``lam`` is per slot."""

    lam: float = 1.0 / 20160

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParams("lambda must be positive")

    @property
    def mean_gap(self) -> float:
        return 1.0 / self.lam

    def pdf(self, t):
        return self.lam * math.exp(-self.lam * t)

    def cdf(self, t):
        return -math.expm1(-self.lam * t)

    def mass(self, a, b):
        return math.exp(-self.lam * a) * -math.expm1(-self.lam * (b - a))

    def mass_ratio(self, a, x):
        try:
            return math.expm1(self.lam * (x - a)) / self.lam
        except OverflowError:
            return math.inf

    def partial_mean(self, ell):
        lam = self.lam
        return 1.0 / lam - math.exp(-lam * ell) * (ell + 1.0 / lam)

    def single_checkpoint(self, a, b):
        # With D = lam (b - a) and y = lam (x - a), the optimum solves
        # expm1(y) + y = D, whose root is y = D + 1 - W0(e^{D + 1}).
        D = self.lam * (b - a)
        if D <= 0:
            return a
        y = D + 1.0 - lambert_w0_exp(D + 1.0)
        if D < 1e-3 or not 0 < y < D:
            # cancellation guard: polish on the stable residual
            y = min(max(y, 0.0), D) if 0 < y < D else 0.5 * D
            for _ in range(8):
                r = math.expm1(y) + y - D
                y -= r / (math.exp(y) + 1.0)
        x = a + y / self.lam
        return min(max(x, math.nextafter(a, b)), math.nextafter(b, a))

    def sample(self, rng):
        return rng.expovariate(self.lam)


class AdaptiveRate:
    """Exponentially weighted estimate of the mean gap between logins."""

    def __init__(self, mean_gap: float = 20160.0, weight: float = 0.2):
        if not 0 < weight <= 1:
            raise InvalidParams("weight must be in (0, 1]")
        self.mean_gap = float(mean_gap)
        self.weight = weight

    def observe(self, gap: float) -> None:
        self.mean_gap = (1 - self.weight) * self.mean_gap + self.weight * max(gap, 1.0)

    def model(self) -> ExponentialModel:
        return ExponentialModel(1.0 / self.mean_gap)


# -- plans -------------------------------------------------------------------

@dataclass(frozen=True)
class CheckpointPlan:
    positions: tuple[int, ...]
    ell: int
    scheme: str
    raw: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        pos = self.positions
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise InvalidParams("checkpoint positions must be strictly increasing")
        if pos and not (0 < pos[0] and pos[-1] <= self.ell):
            raise InvalidParams("checkpoint positions must lie in (0, ell]")

    def cover(self, t: int) -> int:
        """Lowest checkpoint offset >= t, or ell (the head)."""
        i = bisect.bisect_left(self.positions, t)
        return self.positions[i] if i < len(self.positions) else self.ell


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _finalize(raw: Sequence[float], ell: int, scheme: str) -> CheckpointPlan:
    raw = sorted(raw)
    ints = sorted({min(max(round_half_up(x), 1), ell) for x in raw})
    return CheckpointPlan(tuple(ints), ell, scheme, tuple(raw))


def _check_ell(ell: int) -> None:
    if ell < 1:
        raise InvalidParams("remaining length must be >= 1")


def naive_positions(ell: int, q: int) -> CheckpointPlan:
    """Equally spaced checkpoints at round(j ell / (q + 1)), j = 1..q."""
    _check_ell(ell)
    if q < 0:
        raise InvalidParams("q must be >= 0")
    d = q + 1
    # exact round-half-up of j*ell/d
    ints = sorted({(2 * j * ell + d) // (2 * d) for j in range(1, q + 1)} - {0})
    return CheckpointPlan(tuple(ints), ell, "naive", tuple(j * ell / d for j in range(1, q + 1)))


def recursive_positions(ell: int, q: int, model: LoginModel) -> CheckpointPlan:
    """Split [0, ell] level by level, one optimal checkpoint per interval.

    Every interval of a level is split before any interval of the next. When
    ``q`` runs out part-way through a level, the intervals carrying the most
    probability mass are split first.
    """
    _check_ell(ell)
    if q < 1:
        raise InvalidParams("recursive placement needs q >= 1")
    level = [(0.0, float(ell))]
    raw: list[float] = []
    while len(raw) < q:
        level.sort(key=lambda ab: (-model.mass(*ab), ab[0]))
        children = []
        for a, b in level[: q - len(raw)]:
            x = model.single_checkpoint(a, b)
            raw.append(x)
            children += [(a, x), (x, b)]
        level = children
    return _finalize(raw, ell, "recursive")


def stationarity_residuals(raw: Sequence[float], ell: float, model: LoginModel) -> list[float]:
    """Residuals of (F(c_i) - F(c_{i-1})) / p(c_i) = c_{i+1} - c_i, c_0 = 0, c_{q+1} = ell."""
    c = [0.0, *sorted(raw), float(ell)]
    return [model.mass_ratio(c[i - 1], c[i]) - (c[i + 1] - c[i]) for i in range(1, len(c) - 1)]


def _shoot(c1: float, q: int, ell: float, model: LoginModel) -> float:
    """End point c_{q+1} of the forward recursion started at c_1 (inf once past ell)."""
    prev, cur = 0.0, c1
    for _ in range(q):
        nxt = cur + model.mass_ratio(prev, cur)
        if not nxt <= 2 * ell:
            return math.inf
        prev, cur = cur, nxt
    return cur


def _solve_shooting(ell: int, q: int, model: LoginModel) -> list[float]:
    lo, hi = 0.0, float(ell)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _shoot(mid, q, ell, model) < ell:
            lo = mid
        else:
            hi = mid
    c1 = 0.5 * (lo + hi)
    out = [c1]
    prev = 0.0
    for _ in range(q - 1):
        out.append(out[-1] + model.mass_ratio(prev, out[-1]))
        prev = out[-2]
    return out


def _solve_coordinate(ell: int, q: int, model: LoginModel, tol: float, max_sweeps: int) -> list[float]:
    c = [0.0, *recursive_positions(ell, q, model).raw, float(ell)]
    if len(c) != q + 2:
        raise NonConvergence("recursive initialisation produced too few positions")
    for _ in range(max_sweeps):
        moved = 0.0
        for i in range(1, q + 1):
            left, right = c[i - 1], c[i + 1]
            lo, hi = left, right
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if model.mass_ratio(left, mid) - (right - mid) < 0:
                    lo = mid
                else:
                    hi = mid
            new = 0.5 * (lo + hi)
            moved = max(moved, abs(new - c[i]))
            c[i] = new
        if moved < tol * ell:
            return c[1:-1]
    raise NonConvergence(f"coordinate updates did not settle within {max_sweeps} sweeps")


def expectation_optimal_positions(ell: int, q: int, model: LoginModel, tol: float = 1e-9,
                                  method: str = "shooting", max_sweeps: int = 10_000) -> CheckpointPlan:
    """Solve the stationarity system for q checkpoints.

    ``method="shooting"`` bisects on c_1 and runs the system forward; it is exact
    for any model whose forward recursion is monotone in c_1 (the exponential
    one is). ``method="coordinate"`` starts from the recursive plan and solves
    each equation in turn by bisection; it is slower but needs no monotonicity.
    Both are checked against ``tol * ell`` before returning.
    """
    _check_ell(ell)
    if q < 1:
        raise InvalidParams("expectation-optimal placement needs q >= 1")
    if tol <= 0:
        raise InvalidParams("tol must be positive")
    if method == "shooting":
        raw = _solve_shooting(ell, q, model)
    elif method == "coordinate":
        raw = _solve_coordinate(ell, q, model, tol, max_sweeps)
    else:
        raise InvalidParams(f"unknown method {method!r}")
    worst = max(abs(r) for r in stationarity_residuals(raw, ell, model))
    if not worst < tol * ell:
        if method == "shooting":
            raw = _solve_coordinate(ell, q, model, tol, max_sweeps)
        else:
            raise NonConvergence(f"stationarity residual {worst:.3g} exceeds {tol * ell:.3g}")
    return _finalize(raw, ell, "expectation_optimal")


def mixed_positions(ell: int, q_total: int, q_worst: int, model: LoginModel, **kw) -> CheckpointPlan:
    """Expectation-optimal plan plus q_worst equally spaced checkpoints bounding the worst case."""
    if not 0 <= q_worst <= q_total:
        raise InvalidParams("need 0 <= q_worst <= q_total")
    naive = naive_positions(ell, q_worst)
    q_exp = q_total - q_worst
    if q_exp == 0:
        return CheckpointPlan(naive.positions, ell, "mixed", naive.raw)
    opt = expectation_optimal_positions(ell, q_exp, model, **kw)
    ints = tuple(sorted(set(naive.positions) | set(opt.positions)))
    return CheckpointPlan(ints, ell, "mixed", tuple(sorted(naive.raw + opt.raw)))


def make_plan(scheme: str, ell: int, q: int, model: LoginModel, q_worst: Optional[int] = None) -> CheckpointPlan:
    if scheme == "naive" or q == 0:
        plan = naive_positions(ell, q)
        return plan if scheme == "naive" else CheckpointPlan((), ell, scheme)
    if scheme == "recursive":
        return recursive_positions(ell, q, model)
    if scheme in ("expectation_optimal", "optimal"):
        return expectation_optimal_positions(ell, q, model)
    if scheme == "mixed":
        return mixed_positions(ell, q, default_q_worst(q) if q_worst is None else q_worst, model)
    raise InvalidParams(f"unknown scheme {scheme!r}")


def default_q_worst(q_total: int) -> int:
    """8 of 20 by default; scaled proportionally for other totals."""
    return round(q_total * 8 / 20)


# -- costs -------------------------------------------------------------------

def expected_cost(plan: CheckpointPlan, model: LoginModel, continuous: bool = False) -> float:
    """C = sum_i c_i (F(c_i) - F(c_{i-1})) + ell (F(ell) - F(c_q)) - int_0^ell t p(t) dt."""
    pts = plan.raw if continuous else plan.positions
    cs = [0.0, *pts, float(plan.ell)]
    total = sum(cs[i] * model.mass(cs[i - 1], cs[i]) for i in range(1, len(cs)))
    return total - model.partial_mean(plan.ell)


def max_gap(plan: CheckpointPlan) -> int:
    cs = (0, *plan.positions, plan.ell)
    return max(b - a for a, b in zip(cs, cs[1:]))


def worst_case_hashes(plan: CheckpointPlan) -> int:
    """Largest hash count over integer login offsets 1..ell (one less than the widest gap)."""
    return max_gap(plan) - 1
