import itertools
import math

import numpy as np
import pytest

from padnas import (
    Architecture,
    CesConfig,
    Individual,
    InfeasibleBandError,
    LatencyBand,
    LatencyTable,
    Oracle,
    build_space,
    ces_search,
    crowding_distance,
    dominates,
    make_offspring,
    non_dominated_sort,
    sample_uniform,
    spos_search,
    synth_latency_table,
)
from padnas.evolution import polynomial_index_mutation, two_point_crossover

from conftest import tiny_profile, toy_space


def ind(lat, acc):
    return Individual(Architecture(("x",)), accuracy=acc, latency_ms=lat)


def random_population(rng, n):
    return [ind(float(rng.integers(0, 40)) / 2.0, float(rng.integers(0, 40)) / 40.0) for _ in range(n)]


# --- independent O(n^2 * fronts) reference: peel non-dominated sets ----------

def brute_force_fronts(pop):
    remaining = list(range(len(pop)))
    fronts = []
    while remaining:
        front = [
            i for i in remaining
            if not any(dominates_ref(pop[j], pop[i]) for j in remaining if j != i)
        ]
        fronts.append(front)
        remaining = [i for i in remaining if i not in front]
    return fronts


def dominates_ref(a, b):
    if a.latency_ms > b.latency_ms or a.accuracy < b.accuracy:
        return False
    return a.latency_ms < b.latency_ms or a.accuracy > b.accuracy


def test_single_individual_is_front_one():
    pop = [ind(10.0, 0.5)]
    fronts = non_dominated_sort(pop)
    assert fronts == [[0]]
    assert pop[0].rank == 1


def test_three_point_example():
    pop = [ind(10, 0.7), ind(20, 0.8), ind(15, 0.6)]
    fronts = non_dominated_sort(pop)
    assert fronts == [[0, 1], [2]]
    assert [p.rank for p in pop] == [1, 1, 2]


def test_identical_points_do_not_dominate():
    a, b = ind(10, 0.5), ind(10, 0.5)
    assert not dominates(a, b) and not dominates(b, a)
    fronts = non_dominated_sort([a, b])
    assert fronts == [[0, 1]]


def test_dominance_is_strict_partial_order():
    rng = np.random.default_rng(0)
    pop = random_population(rng, 120)
    for a in pop:
        assert not dominates(a, a)
    for a, b, c in zip(pop, pop[1:], pop[2:]):
        if dominates(a, b) and dominates(b, c):
            assert dominates(a, c)
        if dominates(a, b):
            assert not dominates(b, a)


def test_sort_matches_brute_force_on_random_populations():
    rng = np.random.default_rng(42)
    for trial in range(120):
        n = int(rng.integers(1, 120 if trial % 10 else 500))
        pop = random_population(rng, n)
        got = non_dominated_sort([Individual(p.arch, p.accuracy, p.latency_ms) for p in pop])
        want = brute_force_fronts(pop)
        assert [sorted(f) for f in got] == [sorted(f) for f in want]


def test_crowding_small_fronts_all_infinite():
    for n in (1, 2):
        front = [ind(10 + i, 0.5 + 0.1 * i) for i in range(n)]
        assert crowding_distance(front) == [math.inf] * n


def test_crowding_equally_spaced_middle_is_two():
    front = [ind(0, 0.0), ind(1, 0.5), ind(2, 1.0)]
    dist = crowding_distance(front)
    assert dist[0] == math.inf and dist[2] == math.inf
    assert dist[1] == pytest.approx(2.0)


def test_crowding_zero_range_contributes_zero():
    front = [ind(10, 0.5) for _ in range(4)]
    dist = crowding_distance(front)
    assert dist[0] == math.inf and dist[-1] == math.inf
    assert dist[1] == 0.0 and dist[2] == 0.0


def test_crowding_interior_formula():
    front = [ind(0, 0.0), ind(1, 0.1), ind(4, 0.9), ind(10, 1.0)]
    dist = crowding_distance(front)
    assert dist[1] == pytest.approx((4 - 0) / 10 + (0.9 - 0.0) / 1.0)
    assert dist[2] == pytest.approx((10 - 1) / 10 + (1.0 - 0.1) / 1.0)


def test_two_point_crossover_segments():
    rng = np.random.default_rng(0)
    a = ("a0", "a1", "a2", "a3", "a4")
    b = ("b0", "b1", "b2", "b3", "b4")
    seen_mixed = False
    for _ in range(100):
        child = two_point_crossover(a, b, rng)
        assert len(child) == 5
        for j, gene in enumerate(child):
            assert gene in (a[j], b[j])
        sources = [gene[0] for gene in child]
        # contiguous b-segment between two a-segments
        if "b" in sources:
            seen_mixed = True
            first = sources.index("b")
            last = len(sources) - 1 - sources[::-1].index("b")
            assert all(s == "b" for s in sources[first:last + 1])
    assert seen_mixed


def test_polynomial_mutation_bounds_and_determinism():
    rng = np.random.default_rng(1)
    for _ in range(500):
        n = int(rng.integers(1, 9))
        idx = int(rng.integers(n))
        out = polynomial_index_mutation(idx, n, eta=20.0, rng=rng)
        assert 0 <= out < n
    assert polynomial_index_mutation(0, 1, 20.0, np.random.default_rng(0)) == 0
    a = [polynomial_index_mutation(3, 7, 20.0, np.random.default_rng(7)) for _ in range(1)]
    b = [polynomial_index_mutation(3, 7, 20.0, np.random.default_rng(7)) for _ in range(1)]
    assert a == b


def test_mutation_is_local_for_high_eta():
    rng = np.random.default_rng(2)
    jumps = [abs(polynomial_index_mutation(3, 7, 20.0, rng) - 3) for _ in range(2000)]
    moved = [j for j in jumps if j > 0]
    assert moved and np.mean(moved) < 2.0


def search_problem(profile="basic", band_q=(0.1, 0.9)):
    space = toy_space(profile)
    table = synth_latency_table(space, rng=1)
    rng = np.random.default_rng(0)
    lats = sorted(table.predict(sample_uniform(space, rng)) for _ in range(400))
    band = LatencyBand(lats[int(band_q[0] * 400)], lats[int(band_q[1] * 400)])
    oracle = Oracle(space, table, backend="supernet", seed=3)
    return space, table, band, oracle


def test_make_offspring_feasible_and_sized():
    space, table, band, oracle = search_problem()
    rng = np.random.default_rng(0)
    cfg = CesConfig(population_size=32, iterations=1, seed=0)
    parents = []
    while len(parents) < 32:
        arch = sample_uniform(space, rng)
        if band.contains(table.predict(arch)):
            ev = oracle.evaluate(arch)
            parents.append(Individual(arch, ev.accuracy, ev.latency_ms))
    non_dominated_sort(parents)
    children = make_offspring(parents, cfg, space, table, band, rng)
    assert len(children) == 32
    for child in children:
        assert space.validate(child)
        assert band.contains(table.predict(child))


def test_make_offspring_degenerate_operators_copy_winners():
    space, table, band, oracle = search_problem()
    rng = np.random.default_rng(1)
    cfg = CesConfig(population_size=16, crossover_prob=0.0, mutation_prob=0.0, seed=0)
    parents = []
    while len(parents) < 16:
        arch = sample_uniform(space, rng)
        if band.contains(table.predict(arch)):
            ev = oracle.evaluate(arch)
            parents.append(Individual(arch, ev.accuracy, ev.latency_ms))
    non_dominated_sort(parents)
    parent_set = {p.arch.choices for p in parents}
    children = make_offspring(parents, cfg, space, table, band, rng)
    assert all(c.choices in parent_set for c in children)


def test_unbounded_band_never_rejects():
    space, table, _, oracle = search_problem()
    band = LatencyBand(0.0, math.inf)
    cfg = CesConfig(population_size=16, iterations=2, seed=5)
    result = ces_search(space, table, band, oracle, cfg)
    assert result.queries == result.evaluations + result.cache_hits
    assert len(result.population) <= 16


def test_ces_archive_feasible_and_deterministic():
    space, table, band, _ = search_problem()
    cfg = CesConfig(population_size=32, iterations=10, seed=9)
    runs = []
    for _ in range(2):
        oracle = Oracle(space, table, backend="supernet", seed=3)
        runs.append(ces_search(space, table, band, oracle, cfg))
    a, b = runs
    assert [i.arch.choices for i in a.archive] == [i.arch.choices for i in b.archive]
    assert [i.accuracy for i in a.archive] == [i.accuracy for i in b.archive]
    assert a.to_dict() == b.to_dict()
    for i in a.archive:
        assert band.contains(i.latency_ms)
    assert a.queries <= 32 * 11
    assert a.evaluations == len(a.archive)


def test_ces_front_mutually_nondominating_and_elitist():
    space, table, band, oracle = search_problem()
    cfg = CesConfig(population_size=32, iterations=12, seed=4)
    result = ces_search(space, table, band, oracle, cfg)
    front = [i for i in result.population if i.rank == 1]
    for a in front:
        for b in front:
            assert not dominates(a, b)
    best_eval = max(result.archive, key=lambda i: i.accuracy)
    assert any(i.arch.choices == best_eval.arch.choices for i in result.archive)
    # the best accuracy ever seen is never bettered by the final population
    assert max(i.accuracy for i in result.population) <= best_eval.accuracy


def enumerate_feasible(space, table, band):
    menus = [layer.candidates for layer in space.layers]
    for combo in itertools.product(*menus):
        arch = Architecture(combo)
        if band.contains(table.predict(arch)):
            yield arch


def test_ces_recovers_exact_front_on_enumerable_space():
    space = build_space(tiny_profile([
        ["IBConv_K3_E1", "IBConv_K3_E3", "IBConv_K5_E3", "IBConv_K7_E6"],
        ["IBConv_K3_E3", "IBConv_K5_E6", "IBConv_K7_E3", "Identity"],
        ["IBConv_K3_E1", "IBConv_K5_E3", "IBConv_K7_E6", "Identity"],
        ["IBConv_K3_E3", "IBConv_K5_E3", "IBConv_K5_E6"],
        ["IBConv_K3_E1", "IBConv_K3_E6", "IBConv_K7_E3", "Identity"],
    ]))
    table = synth_latency_table(space, rng=11)
    rng = np.random.default_rng(0)
    lats = sorted(table.predict(sample_uniform(space, rng)) for _ in range(500))
    band = LatencyBand(lats[50], lats[450])
    oracle = Oracle(space, table, backend="synthetic", seed=29)

    feasible = list(enumerate_feasible(space, table, band))
    evaluated = [
        Individual(a, oracle.true_accuracy(a), table.predict(a)) for a in feasible
    ]
    truth_front = {
        e.arch.choices
        for e in evaluated
        if not any(dominates_ref(o, e) for o in evaluated if o is not e)
    }

    cfg = CesConfig(population_size=64, iterations=100, mutation_prob=0.4, eta=2.0, seed=1)
    result = ces_search(space, table, band, oracle, cfg)
    got_front = {i.arch.choices for i in result.population if i.rank == 1}
    assert got_front == truth_front


def test_infeasible_band_reports_achievable_range():
    space, table, _, oracle = search_problem()
    band = LatencyBand(0.0, 0.5)
    cfg = CesConfig(population_size=8, iterations=1, init_max_factor=10, seed=0)
    with pytest.raises(InfeasibleBandError, match="achievable"):
        ces_search(space, table, band, oracle, cfg)


def test_spos_deterministic_and_feasible():
    space, table, band, _ = search_problem()
    cfg = CesConfig(population_size=32, iterations=10, seed=2)
    runs = []
    for _ in range(2):
        oracle = Oracle(space, table, backend="supernet", seed=3)
        runs.append(spos_search(space, table, band, oracle, cfg))
    a, b = runs
    assert [i.arch.choices for i in a.population] == [i.arch.choices for i in b.population]
    for i in a.archive:
        assert band.contains(i.latency_ms)


def test_spos_finds_near_best_accuracy_on_enumerable_space():
    space = build_space(tiny_profile([
        ["IBConv_K3_E1", "IBConv_K3_E3", "IBConv_K5_E3"],
        ["IBConv_K3_E3", "IBConv_K5_E6", "Identity"],
        ["IBConv_K3_E1", "IBConv_K5_E3", "Identity"],
        ["IBConv_K3_E3", "IBConv_K5_E3"],
    ]))
    table = synth_latency_table(space, rng=13)
    band = LatencyBand(0.0, math.inf)
    oracle = Oracle(space, table, backend="synthetic", seed=31)
    best_true = max(oracle.true_accuracy(a) for a in enumerate_feasible(space, table, band))
    cfg = CesConfig(population_size=32, iterations=40, mutation_prob=0.3, seed=3)
    result = spos_search(space, table, band, oracle, cfg)
    assert result.population[0].accuracy == pytest.approx(best_true)


def test_search_result_export(tmp_path):
    space, table, band, oracle = search_problem()
    cfg = CesConfig(population_size=16, iterations=4, seed=8)
    result = ces_search(space, table, band, oracle, cfg)
    result.save_json(tmp_path / "result.json")
    result.save_archive_csv(tmp_path / "archive.csv")
    lines = (tmp_path / "archive.csv").read_text().strip().splitlines()
    assert lines[0] == "arch,accuracy,latency_ms,rank,iteration"
    assert len(lines) == len(result.archive) + 1
