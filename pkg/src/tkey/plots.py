"""Figures for the simulate and bench reports, rendered to files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .checkpoints import CheckpointPlan, ExponentialModel  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def checkpoint_costs(rows: Sequence[dict], path) -> Path:
    """Mean hashes per login against the number of checkpoints, one line per scheme."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in dict.fromkeys(r["scheme"] for r in rows):
        pts = sorted((r["q"], r["mean"], r["se"]) for r in rows if r["scheme"] == scheme)
        qs, means, ses = zip(*pts)
        ax.errorbar(qs, means, yerr=[3 * s for s in ses], marker="o", capsize=3, label=scheme)
    ax.set_yscale("log")
    ax.set_xlabel("checkpoints q")
    ax.set_ylabel("mean hashes per login")
    ax.legend()
    return _save(fig, path)


def checkpoint_placement(plans: Mapping[str, CheckpointPlan], model: ExponentialModel, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ell = max(p.ell for p in plans.values())
    xs = [ell * i / 400 for i in range(401)]
    ax.plot(xs, [model.pdf(x) for x in xs], color="0.6", label="login pdf")
    top = model.pdf(0)
    for row, (name, plan) in enumerate(plans.items()):
        y = top * (0.9 - 0.15 * row)
        ax.scatter(plan.positions, [y] * len(plan.positions), marker="|", s=120, label=name)
    ax.set_xlabel("slots after last login")
    ax.legend(fontsize=8)
    return _save(fig, path)


def attack_success(rows: Sequence[dict], path) -> Path:
    """Empirical success against budget T with the reference bound for each attack."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in dict.fromkeys(r["name"] for r in rows):
        pts = sorted((r["params"]["T"], r["estimate"], r["se"], r["reference"]) for r in rows if r["name"] == name)
        Ts, est, se, ref = zip(*pts)
        line = ax.errorbar(Ts, est, yerr=[3 * s for s in se], marker="o", capsize=3, label=name)
        ax.plot(Ts, ref, linestyle="--", color=line[0].get_color(), label=f"{name} bound")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("query budget T")
    ax.set_ylabel("success probability")
    ax.legend(fontsize=8)
    return _save(fig, path)


def lemma_bands(rows: Sequence[dict], path) -> Path:
    """Each estimate as a z-score against its reference; the shaded band is +-3 SE."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [r["name"] for r in rows]
    zs = []
    for r in rows:
        se = r["se"] or math.nan
        zs.append((r["estimate"] - r["reference"]) / se if se == se and se > 0 else 0.0)
    ax.axhspan(-3, 3, color="0.9")
    ax.scatter(range(len(rows)), zs)
    ax.set_xticks(range(len(rows)), names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("(estimate - reference) / SE")
    return _save(fig, path)


def bench_scaling(rows: Sequence[dict], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = [r["k"] for r in rows]
    for key in ("setup_s", "verify_full_s", "gen_worst_s"):
        ax.plot(ks, [r[key] for r in rows], marker="o", label=key)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("chain length k")
    ax.set_ylabel("seconds")
    ax.legend()
    return _save(fig, path)
