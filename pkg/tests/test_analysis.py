import itertools
import math

import numpy as np
import pytest
from scipy.stats import kendalltau as scipy_kendalltau

from padnas import (
    Architecture,
    Individual,
    distribution_variance,
    kendall_tau,
    non_dominated_sort,
    pareto_front,
    sample_front,
)
from padnas.analysis import front_tau, near_front_pool
from padnas.pruning import LayerDistribution


def brute_force_tau_b(x, y):
    """Exhaustive tie-corrected pair counting, coded independently."""
    n = len(x)
    c = d = tx = ty = 0
    for i, j in itertools.combinations(range(n), 2):
        sx = (x[i] > x[j]) - (x[i] < x[j])
        sy = (y[i] > y[j]) - (y[i] < y[j])
        if sx == 0 and sy == 0:
            continue
        if sx == 0:
            tx += 1
        elif sy == 0:
            ty += 1
        elif sx == sy:
            c += 1
        else:
            d += 1
    return (c - d) / math.sqrt((c + d + tx) * (c + d + ty))


def test_identical_and_reversed_orderings():
    x = [1.0, 2.0, 3.0, 4.0]
    assert kendall_tau(x, x) == 1.0
    assert kendall_tau(x, list(reversed(x))) == -1.0


def test_hand_counted_example():
    # pairs {(1,2),(2,1),(3,3)}: concordant 2, discordant 1
    assert kendall_tau([1, 2, 3], [2, 1, 3]) == pytest.approx(1 / 3)


def test_all_permutations_up_to_seven():
    for n in range(2, 8):
        base = list(range(n))
        for perm in itertools.permutations(base):
            got = kendall_tau(base, list(perm))
            want = brute_force_tau_b(base, list(perm))
            assert got == want


def test_random_tied_inputs_match_brute_force_and_scipy():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        x = [float(v) for v in rng.integers(0, 4, size=n)]
        y = [float(v) for v in rng.integers(0, 4, size=n)]
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        got = kendall_tau(x, y)
        assert got == brute_force_tau_b(x, y)
        assert got == pytest.approx(scipy_kendalltau(x, y).statistic, abs=1e-12)


def test_reversal_antisymmetry_without_ties():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        x = list(rng.permutation(n).astype(float))
        y = list(rng.permutation(n).astype(float))
        assert kendall_tau(x, [-v for v in y]) == pytest.approx(-kendall_tau(x, y))


def test_tau_error_cases():
    with pytest.raises(ValueError, match="at least 2"):
        kendall_tau([1.0], [1.0])
    with pytest.raises(ValueError, match="zero variance"):
        kendall_tau([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="length"):
        kendall_tau([1.0, 2.0], [1.0])


def ind(lat, acc, name="x"):
    return Individual(Architecture((name,)), accuracy=acc, latency_ms=lat)


def test_pareto_front_single_point():
    e = ind(10, 0.5)
    assert pareto_front([e]) == [e]


def test_pareto_front_drops_dominated_duplicates_kept():
    a, b = ind(10, 0.5, "a"), ind(10, 0.5, "b")
    worse = ind(12, 0.4, "c")
    front = pareto_front([a, b, worse])
    assert a in front and b in front and worse not in front


def test_pareto_front_empty_is_error():
    with pytest.raises(ValueError, match="empty"):
        pareto_front([])


def test_pareto_front_agrees_with_rank_one():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 200))
        evals = [
            ind(float(rng.integers(0, 50)) / 2, float(rng.integers(0, 50)) / 50, str(i))
            for i in range(n)
        ]
        front = pareto_front(evals)
        copies = [Individual(e.arch, e.accuracy, e.latency_ms) for e in evals]
        fronts = non_dominated_sort(copies)
        want = {evals[i].arch.choices[0] for i in fronts[0]}
        got = {e.arch.choices[0] for e in front}
        assert got == want
        for a in front:
            for b in front:
                assert not (
                    a.latency_ms <= b.latency_ms
                    and a.accuracy >= b.accuracy
                    and (a.latency_ms < b.latency_ms or a.accuracy > b.accuracy)
                )


def dist_run(probs_by_layer):
    return [
        LayerDistribution(layer=j, probs=dict(p), support_count=10)
        for j, p in enumerate(probs_by_layer)
    ]


def test_distribution_variance_identical_runs_zero():
    run = dist_run([{"A": 0.5, "B": 0.5}, {"C": 1.0}])
    out = distribution_variance([run, run, run])
    assert out["aggregate_mean_variance"] == 0.0
    assert all(v["var"] == 0.0 for v in out["per_op"].values())


def test_distribution_variance_hand_value():
    r1 = dist_run([{"A": 0.4, "B": 0.6}])
    r2 = dist_run([{"A": 0.6, "B": 0.4}])
    out = distribution_variance([r1, r2])
    assert out["per_op"][(0, "A")]["var"] == pytest.approx(0.02)
    assert out["per_op"][(0, "A")]["mean"] == pytest.approx(0.5)


def test_distribution_variance_shape_mismatch():
    r1 = dist_run([{"A": 0.4, "B": 0.6}])
    r2 = dist_run([{"A": 1.0}])
    with pytest.raises(ValueError, match="mismatch"):
        distribution_variance([r1, r2])
    with pytest.raises(ValueError, match="at least 2"):
        distribution_variance([r1])


def test_sample_front_spacing_and_flag():
    front = [ind(float(i), i / 10, str(i)) for i in range(10)]
    sample = sample_front(front, 4)
    assert not sample.flagged
    assert [i.latency_ms for i in sample.individuals] == [0.0, 3.0, 6.0, 9.0]
    small = sample_front(front[:3], 5)
    assert small.flagged and len(small.individuals) == 3
    with pytest.raises(ValueError):
        sample_front(front, 1)


def test_near_front_pool_widens_when_needed():
    # two fronts of two points each
    pts = [ind(1, 0.9, "a"), ind(2, 0.95, "b"), ind(1.5, 0.85, "c"), ind(3, 0.9, "d")]
    pool, widened = near_front_pool(pts, 2)
    assert not widened and len(pool) == 2
    pool, widened = near_front_pool(pts, 3)
    assert widened and len(pool) >= 3


def test_front_tau_zero_noise_is_one():
    # accuracy strictly increasing with latency: one mutually non-dominated front
    front = [ind(float(i), 0.5 + 0.01 * i, str(i)) for i in range(40)]
    truth = {i.arch.choices: i.accuracy for i in front}
    out = front_tau(front, lambda a: truth[a.choices], n=30)
    assert out["tau"] == 1.0
    assert out["n"] == 30 and not out["flagged"]


def test_front_tau_minimal_and_degenerate():
    front = [ind(1.0, 0.5, "a"), ind(2.0, 0.6, "b")]
    out = front_tau(front, lambda a: 0.5, n=2)
    assert out["tau"] is None  # zero variance in truth
    out2 = front_tau(front, lambda a: float(len(a.choices[0])), n=2)
    assert out2["n"] == 2
