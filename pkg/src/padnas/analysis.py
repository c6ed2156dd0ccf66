"""Rank-correlation and front analysis utilities.

All functions here are pure: identical inputs give bit-identical outputs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .evolution import Individual, dominates, non_dominated_sort
from .pruning import LayerDistribution


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected rank correlation (tau-b) by exact pair counting.

    O(n^2) over all pairs: concordant minus discordant, normalized by the
    geometric mean of the non-tied pair counts in each coordinate.
    Raises if n < 2 or either coordinate has zero variance (tau undefined).
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise ValueError("kendall tau needs at least 2 pairs")
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    denom_x = concordant + discordant + ties_x
    denom_y = concordant + discordant + ties_y
    if denom_x == 0 or denom_y == 0:
        raise ValueError("kendall tau undefined: zero variance in a coordinate")
    return (concordant - discordant) / math.sqrt(denom_x * denom_y)


def pareto_front(evals: list) -> list:
    """Maximal subset under (latency no bigger, accuracy no lower) dominance.

    Accepts anything with ``accuracy`` and ``latency_ms`` attributes and
    preserves input order. Exact duplicates of a kept point are kept too
    (they do not dominate each other), but dominated points are dropped.
    """
    if not evals:
        raise ValueError("empty evaluation set")
    front = []
    for i, cand in enumerate(evals):
        if not any(dominates(other, cand) for j, other in enumerate(evals) if j != i):
            front.append(cand)
    return front


def distribution_variance(runs: list[list[LayerDistribution]]) -> dict:
    """Per-(layer, op) mean and unbiased variance of probabilities across runs.

    Returns ``{"per_op": {(layer, op): {"mean": .., "var": ..}},
    "aggregate_mean_variance": ..}``. All runs must cover the same layers
    and candidate sets.
    """
    if len(runs) < 2:
        raise ValueError("need at least 2 runs")
    first = runs[0]
    keys = [(d.layer, cid) for d in first for cid in d.probs]
    for run in runs[1:]:
        other = [(d.layer, cid) for d in run for cid in d.probs]
        if other != keys:
            raise ValueError("distribution shape mismatch across runs")
    n = len(runs)
    per_op = {}
    total_var = 0.0
    for d_idx, d in enumerate(first):
        for cid in d.probs:
            vals = [run[d_idx].probs[cid] for run in runs]
            mean = sum(vals) / n
            var = sum((v - mean) ** 2 for v in vals) / (n - 1)
            per_op[(d.layer, cid)] = {"mean": mean, "var": var}
            total_var += var
    return {"per_op": per_op, "aggregate_mean_variance": total_var / len(per_op)}


@dataclass
class FrontSample:
    individuals: list[Individual]
    requested: int
    flagged: bool  # front smaller than requested; everything was used


def sample_front(front: list[Individual], n: int) -> FrontSample:
    """n architectures at equal index spacing along the latency-sorted front."""
    if n < 2:
        raise ValueError("need n >= 2")
    ordered = sorted(front, key=lambda i: (i.latency_ms, i.accuracy, i.arch.choices))
    if len(ordered) <= n:
        return FrontSample(ordered, n, flagged=len(ordered) < n)
    last = len(ordered) - 1
    idx = [int(math.floor(i * last / (n - 1) + 0.5)) for i in range(n)]
    return FrontSample([ordered[i] for i in idx], n, flagged=False)


def near_front_pool(individuals: list[Individual], n: int) -> tuple[list[Individual], bool]:
    """Lowest-nondomination-rank individuals, widened front by front until
    at least ``n`` are pooled. Second value reports whether ranks beyond the
    Pareto front were needed."""
    ranked = [replace(i) for i in individuals]
    non_dominated_sort(ranked)
    ranked.sort(key=lambda i: i.rank)
    pool: list[Individual] = []
    widened = False
    rank = 1
    while len(pool) < n and rank <= ranked[-1].rank:
        members = [i for i in ranked if i.rank == rank]
        if rank > 1 and members:
            widened = True
        pool.extend(members)
        rank += 1
    return pool, widened


def front_tau(individuals: list[Individual], truth_fn, n: int = 30) -> dict:
    """Rank agreement between search-time accuracy and ground truth on a
    latency-spread sample of (near-)front architectures.

    The sample comes from the Pareto front of ``individuals``; if the front
    holds fewer than ``n`` points, successive nondomination ranks are pooled
    (reported via ``flagged``). Returns tau=None when undefined.
    """
    pool, widened = near_front_pool(individuals, max(2, n))
    sample = sample_front(pool, max(2, n))
    predicted = [ind.accuracy for ind in sample.individuals]
    true = [truth_fn(ind.arch) for ind in sample.individuals]
    result = {
        "n": len(sample.individuals),
        "flagged": sample.flagged or widened,
        "tau": None,
    }
    if len(predicted) >= 2:
        try:
            result["tau"] = kendall_tau(predicted, true)
        except ValueError:
            pass
    return result


def tau_stage_table(stage_reports: list) -> list[dict]:
    """Stage-by-stage tau rows extracted from pipeline stage reports."""
    rows = []
    for report in stage_reports:
        tau = getattr(report, "tau", None) if not isinstance(report, dict) else report.get("tau")
        if tau is not None:
            rows.append({"stage": report["stage"] if isinstance(report, dict) else report.stage, **tau})
    return rows


def save_tau_table_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "tau", "n", "flagged"])
        for row in rows:
            writer.writerow([row["stage"], repr(row["tau"]), row["n"], row["flagged"]])


def save_front_scatter_csv(front: list[Individual], path: str | Path) -> None:
    """Front points as (latency, accuracy) rows, plot-ready."""
    ordered = sorted(front, key=lambda i: (i.latency_ms, i.accuracy, i.arch.choices))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["latency_ms", "accuracy", "arch"])
        for ind in ordered:
            writer.writerow([repr(ind.latency_ms), repr(ind.accuracy), "|".join(ind.arch.choices)])
