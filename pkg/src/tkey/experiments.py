"""Experiment runners behind ``tkey simulate`` and ``tkey bench``.

Every runner returns a list of flat records. :func:`write_results` stores
them as JSON lines (one record per experiment) and as CSV, and the CLI
renders a figure next to them.

Record schemas:

* lemmas / attacks: name, estimate, se, trials, reference, params, extra, ok
  (``ok``: the estimate passes its band test, see :data:`BAND_RULES`)
* checkpoints: scheme, q, mean, se, max, logins, sessions, ell, lam, q_worst, cap
* bench: k, setup_hashes, setup_s, gen_mean_hashes, gen_mean_s, gen_expected_hashes,
  gen_worst_hashes, gen_worst_s, max_gap, verify_full_hashes, verify_full_s
"""

from __future__ import annotations

import csv
import json
import math
import random
import time
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .chain import HashCounter, Params
from .checkpoints import ExponentialModel, default_q_worst, expected_cost, make_plan, max_gap
from .prover import PlanConfig, gen_password, init
from .sim import (
    attack_independent, attack_same_function, mc_collision_prob, mc_image_size, mc_preimage_stats,
    simulate_logins,
)
from .sim.logins import SCHEMES
from .verifier import SkewPolicy, enroll, verify

# how each report is judged: "band" is |est - ref| <= 3 SE, "upper" is est <= ref + 3 SE,
# "lower" is est >= ref - 3 SE
BAND_RULES = {
    "image_size": "band", "collision_prob": "band", "preimage_mean": "band",
    "preimage_variance": "upper", "attack_same_function": "lower", "attack_independent": "upper",
}


def judge(rec: dict, n_se: float = 3.0) -> bool:
    rule = BAND_RULES.get(rec["name"], "upper" if rec["name"].startswith("preimage_tail") else "band")
    est, ref, se = rec["estimate"], rec["reference"], rec["se"]
    if rule == "band":
        return abs(est - ref) <= n_se * se
    if rule == "upper":
        return est <= ref + n_se * se
    return est >= ref - n_se * se


def _with_verdict(report) -> dict:
    rec = report.to_record()
    rec["ok"] = judge(rec)
    return rec


def run_lemmas(N: int = 2 ** 16, k_image: int = 256, k_collision: int = 128, k_preimage: int = 64,
               trials: int = 100, seed: int = 0) -> list[dict]:
    out = [_with_verdict(mc_image_size(N, k_image, trials, seed)),
           _with_verdict(mc_collision_prob(N, k_collision, trials, seed))]
    out += [_with_verdict(r) for r in mc_preimage_stats(N, k_preimage, trials, seed).values()]
    return out


def run_attacks(N: int = 2 ** 20, k: int = 64, budgets: Sequence[int] = (1024, 4096, 8192),
                trials: int = 1000, seed: int = 0, independent_trials: Optional[int] = None) -> list[dict]:
    out = []
    for T in budgets:
        out.append(_with_verdict(attack_same_function(N, k, T, trials, seed)))
        out.append(_with_verdict(attack_independent(N, k, T, independent_trials or 10 * trials, seed)))
    return out


def run_checkpoints(ell: int = 1_050_000, lam: float = 1 / 20160, qs: Sequence[int] = (5, 10, 15, 20, 25),
                    sessions: int = 200, seed: int = 0, schemes: Sequence[str] = SCHEMES) -> list[dict]:
    model = ExponentialModel(lam)
    rows = []
    for q in qs:
        qw = default_q_worst(q)
        for scheme, rep in simulate_logins(ell, model, schemes, q, sessions, seed, qw).items():
            rows.append({**rep.to_record(), "ell": ell, "lam": lam, "q_worst": qw, "cap": -(-ell // (qw + 1))})
    return rows


def bench_row(k: int, q: int = 20, scheme: str = "mixed", lam: float = 1 / 20160, samples: int = 20,
              seed: int = 0, I: int = 30) -> dict:
    """Setup, generation and full verification for one chain length, in hashes and seconds."""
    params = Params(k=k, I=I)
    q_worst = default_q_worst(q) if scheme == "mixed" else q
    cfg = PlanConfig(scheme="expectation_optimal" if scheme == "optimal" else scheme,
                     q_total=q, q_worst=q_worst, mean_gap=1 / lam)
    ctr = HashCounter()
    t0 = time.perf_counter()
    state, enr = init(params, random.Random(seed), 0, cfg, counter=ctr)
    row = {"k": k, "setup_hashes": ctr.count, "setup_s": time.perf_counter() - t0}

    model = state.model()
    plan = make_plan(cfg.scheme, k, q, model, q_worst)
    rng = random.Random(seed + 1)
    hashes, secs = [], []
    for _ in range(samples):
        slot = min(k, max(1, math.ceil(rng.expovariate(lam))))
        state.last_emitted = None
        c = HashCounter()
        t0 = time.perf_counter()
        gen_password(state, slot, counter=c)
        secs.append(time.perf_counter() - t0)
        hashes.append(c.count)
    row.update(gen_mean_hashes=sum(hashes) / samples, gen_mean_s=sum(secs) / samples,
               gen_expected_hashes=expected_cost(plan, model))

    # worst slot: just above the bottom of the widest gap
    edges = (0, *plan.positions, k)
    lo, hi = max(zip(edges, edges[1:]), key=lambda e: e[1] - e[0])
    state.last_emitted = None
    c = HashCounter()
    t0 = time.perf_counter()
    gen_password(state, lo + 1, counter=c)
    row.update(gen_worst_hashes=c.count, gen_worst_s=time.perf_counter() - t0, max_gap=max_gap(plan))

    cred = enroll(enr, "bench")
    c = HashCounter()
    t0 = time.perf_counter()
    verify(cred, state.sk, state.t_max, SkewPolicy(w_back=0), counter=c)
    row.update(verify_full_hashes=c.count, verify_full_s=time.perf_counter() - t0)
    return row


def run_bench(ks: Iterable[int] = (2 ** 20, 2 ** 21, 2 ** 22), **kw) -> list[dict]:
    return [bench_row(k, **kw) for k in ks]


def _flat(rec: dict) -> dict:
    out = {}
    for key, val in rec.items():
        if isinstance(val, dict):
            out.update({f"{key}.{k}": v for k, v in val.items()})
        else:
            out[key] = val
    return out


def write_results(rows: Sequence[dict], out_dir, stem: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jsonl = out_dir / f"{stem}.jsonl"
    with open(jsonl, "w") as fh:
        for rec in rows:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    flat = [_flat(r) for r in rows]
    fields = list(dict.fromkeys(k for r in flat for k in r))
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(flat)
    return jsonl, csv_path
