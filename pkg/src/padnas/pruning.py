"""Operation-frequency estimation and threshold pruning.

After a search, the per-layer probability of each operation is estimated
by counting its frequency among low-nondomination-rank architectures and
normalizing. Operations whose probability falls at or below the threshold
are removed from the space, except that every layer always retains its
single most probable candidate (the pruning floor), so pruning can never
leave a layer empty.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .evolution import Individual, SearchResult, non_dominated_sort
from .space import Architecture, SearchSpace


@dataclass
class LayerDistribution:
    layer: int
    probs: dict[str, float]
    support_count: int

    def to_dict(self) -> dict:
        return {"layer": self.layer, "probs": dict(self.probs), "support_count": self.support_count}


@dataclass
class PruneReport:
    removed: list[tuple[int, str, float]]
    kept: list[tuple[int, str, float]]
    threshold: float
    rank_cutoff: int | None = None
    floor_triggers: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "removed": [{"layer": l, "op": o, "p": p} for l, o, p in self.removed],
            "kept": [{"layer": l, "op": o, "p": p} for l, o, p in self.kept],
            "threshold": self.threshold,
            "rank_cutoff": self.rank_cutoff,
            "floor_triggers": list(self.floor_triggers),
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def select_counting_set(
    result: SearchResult, rank_cutoff: int = 10, source: str = "combined"
) -> list[Architecture]:
    """Unique architectures with nondomination rank strictly below the cutoff.

    Ranks are recomputed over the chosen pool: the final combined
    parents+children population by default, or the whole evaluation
    archive with ``source="archive"``.
    """
    if rank_cutoff < 1:
        raise ValueError("rank_cutoff must be >= 1")
    if source == "combined":
        pool = result.final_combined
    elif source == "archive":
        pool = result.archive
    else:
        raise ValueError(f"unknown counting source {source!r}")
    if not pool:
        raise ValueError("empty search result")
    unique: dict[tuple[str, ...], Individual] = {}
    for ind in pool:
        unique.setdefault(ind.arch.choices, ind)
    ranked = [replace(i) for i in unique.values()]
    non_dominated_sort(ranked)
    return [i.arch for i in ranked if i.rank < rank_cutoff]


def estimate_distributions(
    archs: list[Architecture], space: SearchSpace
) -> list[LayerDistribution]:
    """Normalized per-layer operation frequencies; unseen candidates get 0."""
    if not archs:
        raise ValueError("cannot estimate distributions from an empty set")
    for arch in archs:
        if not space.validate(arch):
            raise ValueError(f"architecture {arch.choices} is not valid in this space")
    n = len(archs)
    dists = []
    for layer in space.layers:
        counts = dict.fromkeys(layer.candidates, 0)
        for arch in archs:
            counts[arch.choices[layer.index]] += 1
        dists.append(
            LayerDistribution(
                layer=layer.index,
                probs={cid: counts[cid] / n for cid in layer.candidates},
                support_count=n,
            )
        )
    return dists


def prune_below_threshold(
    space: SearchSpace,
    dists: list[LayerDistribution],
    p_th: float,
    rank_cutoff: int | None = None,
) -> tuple[SearchSpace, PruneReport]:
    """Remove every candidate with probability <= p_th (inclusive threshold).

    If a whole layer falls at or below the threshold, its single
    highest-probability candidate is retained and the layer is recorded in
    ``floor_triggers``.
    """
    if not (0.0 <= p_th < 1.0):
        raise ValueError(f"p_th must be in [0, 1), got {p_th}")
    by_layer = {d.layer: d for d in dists}
    missing = [l.index for l in space.layers if l.index not in by_layer]
    if missing:
        raise ValueError(f"distributions missing for layers {missing}")

    report = PruneReport(removed=[], kept=[], threshold=p_th, rank_cutoff=rank_cutoff)
    pruned = space
    for layer in space.layers:
        probs = by_layer[layer.index].probs
        p = {cid: probs.get(cid, 0.0) for cid in layer.candidates}
        keep = [cid for cid in layer.candidates if p[cid] > p_th]
        if not keep:
            best = max(layer.candidates, key=lambda cid: p[cid])
            keep = [best]
            report.floor_triggers.append(layer.index)
        for cid in layer.candidates:
            row = (layer.index, cid, p[cid])
            (report.kept if cid in keep else report.removed).append(row)
        if len(keep) != len(layer.candidates):
            pruned = pruned.replace_candidates(layer.index, keep)
    return pruned, report


def structural_constraint_check(space: SearchSpace, reference: SearchSpace | None = None) -> dict:
    """Validate layer invariants and report size (and reduction vs a reference)."""
    diagnostics = {
        "layers": space.num_layers,
        "size": space.size(),
        "log10_size": math.log10(space.size()),
        "min_candidates": min(len(l.candidates) for l in space.layers),
        "identity_rule_ok": all(
            layer.allows_identity or not any(space.catalog[c].is_identity for c in layer.candidates)
            for layer in space.layers
        ),
        "expansion_rule_ok": all(
            not layer.fixed_expansion_one
            or all(
                space.catalog[c].is_identity or space.catalog[c].expansion == 1
                for c in layer.candidates
            )
            for layer in space.layers
        ),
    }
    if reference is not None:
        diagnostics["is_subspace_of_reference"] = space.is_subspace_of(reference)
        diagnostics["log10_reduction"] = math.log10(reference.size()) - math.log10(space.size())
    return diagnostics


def distribution_matrix_csv(dists: list[LayerDistribution], path: str | Path) -> None:
    """Operations-by-layers probability matrix, ready for heatmap plotting."""
    ops = sorted({cid for d in dists for cid in d.probs})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["op"] + [f"layer{d.layer}" for d in dists])
        for op in ops:
            writer.writerow([op] + [repr(d.probs.get(op, 0.0)) for d in dists])
