"""Constrained evolutionary search over (accuracy, latency).

The main searcher is NSGA-II specialised to two objectives (maximize
accuracy, minimize latency) with a hard latency band: offspring that land
outside the band are rejected during variation and regenerated, so every
individual ever evaluated is feasible. A single-objective
accuracy-truncation EA is provided as a comparison baseline; it keeps the
top half by accuracy each generation and discards the rest.

Dominance: ``a`` dominates ``b`` iff ``a`` is no slower and no less
accurate, and strictly better in at least one objective. Identical
objective points therefore never dominate each other.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .latency import LatencyBand, LatencyTable, latency_extremes
from .oracle import Oracle
from .space import Architecture, SearchSpace


class InfeasibleBandError(RuntimeError):
    """No feasible architecture was found within the sampling budget."""

    def __init__(self, band: LatencyBand, lat_lo: float, lat_hi: float):
        super().__init__(
            f"no architecture found in band [{band.lat_min}, {band.lat_max}] ms; "
            f"achievable latencies span [{lat_lo:.2f}, {lat_hi:.2f}] ms"
        )
        self.band = band
        self.achievable = (lat_lo, lat_hi)


@dataclass
class Individual:
    arch: Architecture
    accuracy: float
    latency_ms: float
    rank: int = 0
    crowding: float = 0.0


@dataclass(frozen=True)
class CesConfig:
    population_size: int = 64
    iterations: int = 40
    crossover_kind: str = "two_point"
    crossover_prob: float = 0.9
    mutation_kind: str = "polynomial_index"
    mutation_prob: float | None = None  # None -> 1 / num_layers
    eta: float = 20.0
    retry_budget: int = 10
    tournament_size: int = 2
    init_max_factor: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 2")
        if self.crossover_kind != "two_point":
            raise ValueError(f"unsupported crossover {self.crossover_kind!r}")
        if self.mutation_kind != "polynomial_index":
            raise ValueError(f"unsupported mutation {self.mutation_kind!r}")
        for p in (self.crossover_prob, self.mutation_prob):
            if p is not None and not (0.0 <= p <= 1.0):
                raise ValueError(f"probability {p} outside [0, 1]")
        if self.retry_budget < 1:
            raise ValueError("retry_budget must be >= 1")


@dataclass
class SearchResult:
    population: list[Individual]
    archive: list[Individual]
    front_history: list[list[Individual]]
    final_combined: list[Individual]
    archive_iterations: list[int] = field(default_factory=list)
    queries: int = 0
    cache_hits: int = 0
    evaluations: int = 0

    def to_dict(self) -> dict:
        def row(ind: Individual) -> dict:
            return {
                "arch": list(ind.arch.choices),
                "accuracy": ind.accuracy,
                "latency_ms": ind.latency_ms,
                "rank": ind.rank,
            }

        return {
            "population": [row(i) for i in self.population],
            "archive": [row(i) for i in self.archive],
            "front_history": [[row(i) for i in front] for front in self.front_history],
            "queries": self.queries,
            "cache_hits": self.cache_hits,
            "evaluations": self.evaluations,
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def save_archive_csv(self, path: str | Path) -> None:
        """Archive rows with nondomination rank recomputed over the archive."""
        ranked = [replace(i) for i in self.archive]
        non_dominated_sort(ranked)
        iters = self.archive_iterations or [0] * len(ranked)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["arch", "accuracy", "latency_ms", "rank", "iteration"])
            for ind, it in zip(ranked, iters):
                writer.writerow(
                    ["|".join(ind.arch.choices), repr(ind.accuracy), repr(ind.latency_ms),
                     ind.rank, it]
                )


def dominates(a: Individual, b: Individual) -> bool:
    return (
        a.latency_ms <= b.latency_ms
        and a.accuracy >= b.accuracy
        and (a.latency_ms < b.latency_ms or a.accuracy > b.accuracy)
    )


def non_dominated_sort(pop: list[Individual]) -> list[list[int]]:
    """Fast non-dominated sort; assigns 1-based ranks and returns index fronts."""
    n = len(pop)
    dominated: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    fronts: list[list[int]] = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(pop[p], pop[q]):
                dominated[p].append(q)
            elif dominates(pop[q], pop[p]):
                counts[p] += 1
        if counts[p] == 0:
            pop[p].rank = 1
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    pop[q].rank = i + 2
                    nxt.append(q)
        i += 1
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(front: list[Individual]) -> list[float]:
    """Per-objective normalized neighbor gaps; boundary points get +inf."""
    n = len(front)
    if n <= 2:
        for ind in front:
            ind.crowding = math.inf
        return [math.inf] * n
    dist = [0.0] * n
    for key in (lambda i: front[i].latency_ms, lambda i: front[i].accuracy):
        order = sorted(range(n), key=key)
        lo, hi = key(order[0]), key(order[-1])
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = hi - lo
        if span == 0:
            continue  # zero objective range contributes nothing
        for k in range(1, n - 1):
            if dist[order[k]] != math.inf:
                dist[order[k]] += (key(order[k + 1]) - key(order[k - 1])) / span
    for ind, d in zip(front, dist):
        ind.crowding = d
    return dist


def _tournament(pop: list[Individual], size: int, rng: np.random.Generator) -> Individual:
    k = min(size, len(pop))
    idx = rng.choice(len(pop), size=k, replace=False)
    best = pop[int(idx[0])]
    for i in idx[1:]:
        cand = pop[int(i)]
        if cand.rank < best.rank or (cand.rank == best.rank and cand.crowding > best.crowding):
            best = cand
    return best


def two_point_crossover(
    a: tuple[str, ...], b: tuple[str, ...], rng: np.random.Generator
) -> tuple[str, ...]:
    """Splice b's [c1, c2) segment into a; equal cuts are resampled once."""
    j = len(a)
    c1, c2 = int(rng.integers(j + 1)), int(rng.integers(j + 1))
    if c1 == c2:
        c1, c2 = int(rng.integers(j + 1)), int(rng.integers(j + 1))
    if c1 > c2:
        c1, c2 = c2, c1
    return a[:c1] + b[c1:c2] + a[c2:]


def polynomial_index_mutation(
    index: int, n_candidates: int, eta: float, rng: np.random.Generator
) -> int:
    """Polynomial perturbation of a candidate index, rounded and clamped.

    A perturbation that rounds back onto the original index is resampled
    once, then accepted as a no-op.
    """
    if n_candidates <= 1:
        return index
    span = n_candidates - 1
    for _ in range(2):
        u = float(rng.random())
        if u < 0.5:
            delta = (2.0 * u) ** (1.0 / (eta + 1.0)) - 1.0
        else:
            delta = 1.0 - (2.0 * (1.0 - u)) ** (1.0 / (eta + 1.0))
        moved = index + delta * span
        new = min(span, max(0, int(math.floor(moved + 0.5))))
        if new != index:
            return new
    return index


def _vary(
    p1: tuple[str, ...],
    p2: tuple[str, ...],
    space: SearchSpace,
    cfg: CesConfig,
    rng: np.random.Generator,
) -> Architecture:
    genes = p1
    if float(rng.random()) < cfg.crossover_prob:
        genes = two_point_crossover(p1, p2, rng)
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / space.num_layers
    out = list(genes)
    for j, layer in enumerate(space.layers):
        if float(rng.random()) < pm:
            idx = layer.candidates.index(out[j])
            out[j] = layer.candidates[
                polynomial_index_mutation(idx, len(layer.candidates), cfg.eta, rng)
            ]
    return Architecture(tuple(out))


def make_offspring(
    parents: list[Individual],
    cfg: CesConfig,
    space: SearchSpace,
    table: LatencyTable,
    band: LatencyBand,
    rng: np.random.Generator,
) -> list[Architecture]:
    """population_size feasible children; infeasible variations are retried
    up to the retry budget, then the (feasible) tournament winner is copied."""
    children: list[Architecture] = []
    for _ in range(cfg.population_size):
        w1 = _tournament(parents, cfg.tournament_size, rng)
        w2 = _tournament(parents, cfg.tournament_size, rng)
        child: Architecture | None = None
        for _ in range(cfg.retry_budget):
            cand = _vary(w1.arch.choices, w2.arch.choices, space, cfg, rng)
            if space.validate(cand) and band.contains(table.predict(cand)):
                child = cand
                break
        children.append(child if child is not None else w1.arch)
    return children


def _init_population(
    space: SearchSpace,
    table: LatencyTable,
    band: LatencyBand,
    cfg: CesConfig,
    rng: np.random.Generator,
) -> list[Architecture]:
    from .space import sample_uniform

    seen: dict[tuple[str, ...], None] = {}
    budget = cfg.init_max_factor * cfg.population_size
    for _ in range(budget):
        arch = sample_uniform(space, rng)
        if band.contains(table.predict(arch)):
            seen.setdefault(arch.choices, None)
            if len(seen) >= cfg.population_size:
                break
    if not seen:
        lo, hi = latency_extremes(space, table)
        raise InfeasibleBandError(band, lo, hi)
    return [Architecture(c) for c in seen]


def _dedup(individuals: list[Individual]) -> list[Individual]:
    out: dict[tuple[str, ...], Individual] = {}
    for ind in individuals:
        out.setdefault(ind.arch.choices, ind)
    return list(out.values())


def _environmental_select(combined: list[Individual], size: int) -> list[Individual]:
    fronts = non_dominated_sort(combined)
    selected: list[Individual] = []
    for front_idx in fronts:
        front = [combined[i] for i in front_idx]
        crowding_distance(front)
        if len(selected) + len(front) <= size:
            selected.extend(front)
        else:
            room = size - len(selected)
            order = sorted(range(len(front)), key=lambda k: -front[k].crowding)
            selected.extend(front[k] for k in order[:room])
            break
    return selected


class _Archive:
    """Insertion-ordered record of every unique evaluated architecture."""

    def __init__(self, oracle: Oracle):
        self.oracle = oracle
        self.records: dict[tuple[str, ...], Individual] = {}
        self.iterations: dict[tuple[str, ...], int] = {}
        self.iteration = 0

    def evaluate(self, arch: Architecture) -> Individual:
        ev = self.oracle.evaluate(arch)
        if arch.choices not in self.records:
            self.records[arch.choices] = Individual(arch, ev.accuracy, ev.latency_ms)
            self.iterations[arch.choices] = self.iteration
        return Individual(arch, ev.accuracy, ev.latency_ms)

    def individuals(self) -> list[Individual]:
        return list(self.records.values())

    def iteration_list(self) -> list[int]:
        return [self.iterations[key] for key in self.records]


def _snapshot_front(pop: list[Individual]) -> list[Individual]:
    return [replace(i) for i in pop if i.rank == 1]


def ces_search(
    space: SearchSpace,
    table: LatencyTable,
    band: LatencyBand,
    oracle: Oracle,
    cfg: CesConfig,
) -> SearchResult:
    """NSGA-II with latency-feasible initialization and variation.

    Nothing evaluated is ever discarded from the archive; the returned
    ``final_combined`` holds the last parents+children union (deduplicated)
    on which the final environmental selection ran.
    """
    rng = np.random.default_rng(cfg.seed)
    q0, h0, _ = oracle.stats.snapshot()
    archive = _Archive(oracle)

    pop = [archive.evaluate(a) for a in _init_population(space, table, band, cfg, rng)]
    combined = _dedup(pop)
    fronts = non_dominated_sort(combined)
    for front_idx in fronts:
        crowding_distance([combined[i] for i in front_idx])
    pop = combined
    history = [_snapshot_front(pop)]

    for it in range(cfg.iterations):
        archive.iteration = it + 1
        children = make_offspring(pop, cfg, space, table, band, rng)
        child_inds = [archive.evaluate(a) for a in children]
        combined = _dedup(pop + child_inds)
        pop = _environmental_select(combined, cfg.population_size)
        history.append(_snapshot_front(pop))

    q1, h1, _ = oracle.stats.snapshot()
    return SearchResult(
        population=pop,
        archive=archive.individuals(),
        front_history=history,
        final_combined=combined,
        archive_iterations=archive.iteration_list(),
        queries=q1 - q0,
        cache_hits=h1 - h0,
        evaluations=len(archive.records),
    )


def spos_search(
    space: SearchSpace,
    table: LatencyTable,
    band: LatencyBand,
    oracle: Oracle,
    cfg: CesConfig,
) -> SearchResult:
    """Accuracy-truncation baseline EA (top half survives each generation).

    Variation and feasibility handling match ``ces_search``; only parent
    selection differs: parents are drawn uniformly from the current top-k
    by accuracy, and low-accuracy individuals are discarded outright.
    """
    rng = np.random.default_rng(cfg.seed)
    q0, h0, _ = oracle.stats.snapshot()
    archive = _Archive(oracle)

    def acc_order(inds: list[Individual]) -> list[Individual]:
        return sorted(inds, key=lambda i: (-i.accuracy, i.latency_ms, i.arch.choices))

    pop = [archive.evaluate(a) for a in _init_population(space, table, band, cfg, rng)]
    pop = acc_order(_dedup(pop))
    history = []

    def snapshot(inds: list[Individual]) -> list[Individual]:
        copies = [replace(i) for i in inds]
        non_dominated_sort(copies)
        return [i for i in copies if i.rank == 1]

    history.append(snapshot(pop))
    combined = list(pop)
    k = max(1, cfg.population_size // 2)
    for it in range(cfg.iterations):
        archive.iteration = it + 1
        top = pop[: min(k, len(pop))]
        children: list[Architecture] = []
        for _ in range(cfg.population_size):
            p1 = top[int(rng.integers(len(top)))]
            p2 = top[int(rng.integers(len(top)))]
            child: Architecture | None = None
            for _ in range(cfg.retry_budget):
                cand = _vary(p1.arch.choices, p2.arch.choices, space, cfg, rng)
                if space.validate(cand) and band.contains(table.predict(cand)):
                    child = cand
                    break
            children.append(child if child is not None else p1.arch)
        child_inds = [archive.evaluate(a) for a in children]
        combined = _dedup(top + child_inds)
        pop = acc_order(combined)[: cfg.population_size]
        history.append(snapshot(pop))

    q1, h1, _ = oracle.stats.snapshot()
    final = [replace(i) for i in pop]
    non_dominated_sort(final)
    return SearchResult(
        population=final,
        archive=archive.individuals(),
        front_history=history,
        final_combined=_dedup(combined),
        archive_iterations=archive.iteration_list(),
        queries=q1 - q0,
        cache_hits=h1 - h0,
        evaluations=len(archive.records),
    )
