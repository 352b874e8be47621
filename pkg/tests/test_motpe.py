import numpy as np
import pytest

from subnetsim.motpe import (
    DEFAULT_SPACE,
    KernelDensity1d,
    dominates,
    hypervolume,
    nondominated_rank,
    pareto_front,
    propose,
    sample_dependent,
    split_observations,
    tune,
)


def test_dominates_cases():
    assert dominates((1.0, 2.0), (2.0, 3.0))
    assert dominates((1.0, 2.0), (1.0, 3.0))
    assert not dominates((1.0, 2.0), (1.0, 2.0))
    assert not dominates((1.0, 2.0), (2.0, 1.0))
    assert not dominates((2.0, 3.0), (1.0, 2.0))


def _front_bruteforce(ys):
    n = len(ys)
    return {
        i
        for i in range(n)
        if not any(dominates(ys[j], ys[i]) for j in range(n) if j != i)
    }


def test_pareto_front_matches_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(20):
        ys = rng.integers(0, 6, (30, 2)).astype(float)  # coarse grid forces ties
        got = set(pareto_front(ys).tolist())
        assert got == _front_bruteforce(ys)


def test_nondominated_rank_matches_iterative_peeling():
    rng = np.random.default_rng(2)
    ys = rng.random((40, 2))
    got = nondominated_rank(ys)
    remaining = list(range(40))
    level = 0
    while remaining:
        sub = ys[remaining]
        front = _front_bruteforce(sub)
        for pos in sorted(front, reverse=True):
            assert got[remaining[pos]] == level
            del remaining[pos]
        level += 1


def test_hypervolume_hand_cases():
    ref = np.array([3.0, 3.0])
    assert hypervolume(np.array([[1.0, 1.0]]), np.array([2.0, 2.0])) == pytest.approx(1.0)
    assert hypervolume(np.array([[0.0, 2.0], [1.0, 1.0]]), ref) == pytest.approx(5.0)
    # dominated points contribute nothing
    assert hypervolume(
        np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 2.0]]), ref
    ) == pytest.approx(5.0)
    assert hypervolume(np.array([[5.0, 5.0]]), ref) == 0.0
    assert hypervolume(np.empty((0, 2)), ref) == 0.0


def test_hypervolume_against_monte_carlo():
    rng = np.random.default_rng(3)
    ys = rng.random((12, 2))
    ref = np.array([1.2, 1.3])
    got = hypervolume(ys, ref)
    lo = ys.min(axis=0)
    pts = lo + rng.random((60000, 2)) * (ref - lo)
    covered = (pts[:, None, :] >= ys[None, :, :]).all(axis=2).any(axis=1)
    mc = covered.mean() * np.prod(ref - lo)
    assert got == pytest.approx(mc, rel=0.03)


def test_split_prefers_front_by_contribution():
    # B carves out far more volume than the symmetric corner points A and C
    ys = np.array(
        [[0.0, 3.0], [1.0, 1.0], [3.0, 0.0], [2.0, 2.0], [3.0, 3.0], [2.5, 2.8]]
    )
    good, bad = split_observations(ys, gamma=0.34)  # ceil(0.34 * 6) = 3
    assert len(good) == 3 and len(bad) == 3
    assert sorted(np.concatenate([good, bad]).tolist()) == list(range(6))
    assert good[0] == 1
    assert set(good.tolist()) == {0, 1, 2}  # the whole first front


def test_split_needs_two_observations():
    with pytest.raises(ValueError):
        split_observations(np.array([[1.0, 2.0]]), 0.1)


def test_kde_is_a_density_on_the_interval():
    kde = KernelDensity1d(np.array([2.0, 5.0, 9.0]), 0.0, 10.0)
    x = np.linspace(0.0, 10.0, 4001)
    mass = np.trapezoid(kde.pdf(x), x)
    assert mass == pytest.approx(1.0, abs=5e-3)
    assert kde.pdf(np.array([-0.5, 10.5])).tolist() == [0.0, 0.0]
    assert (kde.pdf(x) >= 0.0).all()


def test_kde_without_observations_still_proper():
    kde = KernelDensity1d(np.array([]), 0.0, 10.0)
    x = np.linspace(0.0, 10.0, 2001)
    assert np.trapezoid(kde.pdf(x), x) == pytest.approx(1.0, abs=5e-3)


def test_kde_concentrates_near_data():
    kde = KernelDensity1d(np.full(6, 5.0), 0.0, 10.0)
    assert kde.pdf(5.0)[0] > 4.0 * kde.pdf(0.5)[0]


def test_kde_sampling_respects_bounds():
    kde = KernelDensity1d(np.array([1.0, 2.0, 8.0]), 0.0, 10.0)
    rng = np.random.default_rng(4)
    x = kde.sample(rng, 2000)
    assert (x >= 0.0).all() and (x <= 10.0).all()
    # dynamic lower bound is strict, even when it exceeds most of the data
    lo = np.full(2000, 7.9)
    y = kde.sample(rng, 2000, lo_dyn=lo)
    assert (y > 7.9).all() and (y <= 10.0).all()


def test_dependent_sampling_keeps_strict_chain():
    rng = np.random.default_rng(5)
    for _ in range(500):
        y = sample_dependent(rng)
        assert 0.0 <= y[0] <= 1.0
        assert y[1] < y[2] < y[3]
        assert y[1] <= 100.0 and y[2] <= 200.0 and y[3] <= 300.0


def test_propose_respects_chain_and_is_deterministic():
    rng = np.random.default_rng(6)
    params = np.array([sample_dependent(rng) for _ in range(40)])
    ys = np.array([[p[1] / 100.0, (100.0 - p[1]) / 100.0] for p in params])
    a = propose(params, ys, 0.2, 24, np.random.default_rng(7))
    b = propose(params, ys, 0.2, 24, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)
    assert a[1] < a[2] < a[3]


def _toy_objective(y):
    x = np.array([y[0], y[1] / 100.0, y[2] / 200.0, y[3] / 300.0])
    a = np.array([0.2, 0.3, 0.5, 0.6])
    b = np.array([0.8, 0.7, 0.6, 0.7])
    return float(((x - a) ** 2).sum()), float(((x - b) ** 2).sum())


def test_tune_returns_consistent_result():
    res = tune(_toy_objective, trials=40, startup=15, rng=np.random.default_rng(8))
    assert res.params.shape == (40, 4)
    assert res.ys.shape == (40, 2)
    assert res.selected_idx in res.pareto_idx
    for row in res.params:
        assert row[1] < row[2] < row[3]
    sel = res.selected
    assert sel["k1"] < sel["z1"] < sel["z2"]
    inc = res.incumbent_best
    assert (np.diff(inc, axis=0) <= 0).all()
    assert res.selection_rule


def test_tune_beats_paired_random_search_on_a_fixed_seed():
    seed = 3
    res = tune(_toy_objective, trials=80, startup=25, rng=np.random.default_rng(seed))
    rng = np.random.default_rng(seed)
    ys_rand = np.array(
        [_toy_objective(sample_dependent(rng)) for _ in range(80)]
    )
    ref = 1.1 * np.maximum(res.ys.max(axis=0), ys_rand.max(axis=0))
    assert hypervolume(res.ys, ref) >= hypervolume(ys_rand, ref)
