import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from hostsym.brw import (
    BRWParams, BRWState, count_paths, expected_occupancy, lazy_walk_step_prob, leak_bound, run_brw,
    run_brw_replicas, series_tail, truncation_dominated,
)


def enumerate_paths(d, n):
    """Oracle: Counter over (holds, endpoint) from all (2d+1)^n step sequences."""
    steps = [(0,) * d]
    for axis in range(d):
        for s in (1, -1):
            e = [0] * d
            e[axis] = s
            steps.append(tuple(e))
    out = Counter()
    for seq in itertools.product(range(2 * d + 1), repeat=n):
        pos = [0] * d
        for i in seq:
            pos = [p + q for p, q in zip(pos, steps[i])]
        out[(seq.count(0), tuple(pos))] += 1
    return out


def mean_ode_oracle(a_bar, b_bar, t, X, radius=20):
    """m' = m ((a_bar - 1) I + b_bar A) on a path of 2 radius + 1 sites, solved with expm."""
    n = 2 * radius + 1
    G = (a_bar - 1.0) * np.eye(n)
    for i in range(n - 1):
        G[i, i + 1] = G[i + 1, i] = b_bar
    start = np.zeros(n)
    start[radius] = 1.0
    return (start @ expm(t * G))[radius + X]


def test_params():
    p = BRWParams.from_contact(1.0, 2.0, d=2, delta=0.5, M=3)
    assert p.alpha_bar == 0.5 and p.beta_bar == 0.25 and p.growth(2) == 1.5
    with pytest.raises(ValueError):
        BRWParams(-1, 0)
    with pytest.raises(ValueError):
        BRWParams(0, 0, delta=1.0)


@pytest.mark.parametrize("d,n", [(1, n) for n in range(7)] + [(2, n) for n in range(6)])
def test_count_paths_matches_enumeration(d, n):
    table = count_paths(d, n)
    oracle = enumerate_paths(d, n)
    for k in range(n + 1):
        for X in itertools.product(range(-n, n + 1), repeat=d):
            assert table.at(n, k, X) == oracle.get((k, X), 0)
    assert table.total(n) == (2 * d + 1) ** n


def test_count_paths_small_examples():
    t = count_paths(1, 2)
    assert t.at(1, 0, (1,)) == t.at(1, 0, (-1,)) == 1 and t.at(1, 1, (0,)) == 1
    assert t.at(1, 0, (0,)) == 0
    assert t.at(2, 0, (0,)) == 2 and t.at(2, 1, (0,)) == 0 and t.at(2, 2, (0,)) == 1
    assert t.at(2, 3, (0,)) == 0


def test_count_paths_wide_integers():
    t = count_paths(1, 40)
    assert t.mu[40].dtype == object
    assert t.total(40) == 3**40
    assert t.at(40, 40, (0,)) == 1
    # one step out and one back, on either side
    assert t.at(40, 38, (0,)) == 40 * 39
    assert t.at(40, 0, (0,)) == math.comb(40, 20)


def test_count_paths_box_cropping():
    full = count_paths(1, 5)
    small = count_paths(1, 5, box=2)
    assert small.radius == 2
    assert small.at(5, 1, (2,)) == full.at(5, 1, (2,))
    assert small.at(5, 0, (3,)) == 0


def test_expected_occupancy_no_rates():
    for t in (0.0, 0.5, 3.0):
        assert expected_occupancy(BRWParams(0, 0), t, (0,), 5).value == pytest.approx(math.exp(-t))
        assert expected_occupancy(BRWParams(0, 0), t, (1,), 5).value == 0.0


def test_expected_occupancy_out_of_reach():
    res = expected_occupancy(BRWParams(0.3, 0.01), 0.5, (8, 0), 6, tol=1e-3)
    assert res.value == 0.0 and 0 < res.tail < 1e-3


def test_expected_occupancy_matches_ode_oracle():
    p = BRWParams(0.4, 0.4)
    for X in (0, 1, 3):
        v = expected_occupancy(p, 4.0, (X,), 40).value
        assert v == pytest.approx(mean_ode_oracle(0.4, 0.4, 4.0, X), abs=1e-6)


def test_expected_occupancy_2d_against_ode():
    from scipy.sparse import diags, identity, kron
    from scipy.sparse.linalg import expm_multiply

    a, b, t, R = 0.3, 0.2, 2.0, 12
    n = 2 * R + 1
    path = diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1])
    G = (a - 1.0) * identity(n * n) + b * (kron(path, identity(n)) + kron(identity(n), path))
    v0 = np.zeros(n * n)
    v0[R * n + R] = 1.0
    m = expm_multiply(t * G.T.tocsc(), v0).reshape(n, n)
    for X in ((0, 0), (1, 0), (2, 1)):
        assert expected_occupancy(BRWParams(a, b), t, X, 30).value == pytest.approx(m[R + X[0], R + X[1]], abs=1e-9)


def test_tail_error():
    with pytest.raises(ValueError, match="increase n_max"):
        expected_occupancy(BRWParams(0.5, 0.5), 10.0, (0,), 5)
    assert series_tail(BRWParams(0, 0), 1, 5.0, 3) == 0.0


def test_supercritical_mean_exceeds_one_at_neighbour():
    """alpha_bar + 2 beta_bar > 1: some t <= 30 has mean occupancy above 1 at a neighbour."""
    p = BRWParams(0.55, 0.3)
    values = [expected_occupancy(p, t, (1,), 140).value for t in range(1, 31)]
    assert max(values) > 1


def test_lazy_walk_basics():
    p = BRWParams(0.4, 0.4)
    assert lazy_walk_step_prob(p, 0, (0,)) == 1.0 and lazy_walk_step_prob(p, 0, (1,)) == 0.0
    assert lazy_walk_step_prob(p, 1, (0,)) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        lazy_walk_step_prob(BRWParams(0, 0), 1, (0,))


@pytest.mark.parametrize("d", [1, 2])
def test_path_counts_versus_lazy_walk(d):
    p = BRWParams(0.37, 0.21)
    s = p.growth(d)
    table = count_paths(d, 8)
    for n in range(9):
        for X in itertools.product(range(-2, 3), repeat=d):
            lhs = sum(table.at(n, k, X) * p.alpha_bar**k * p.beta_bar ** (n - k) for k in range(n + 1)) / s**n
            assert lhs == pytest.approx(lazy_walk_step_prob(p, n, X), rel=1e-12, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(chi=st.floats(0.01, 10), delta=st.floats(0.01, 0.99), M=st.integers(0, 20), extra=st.integers(0, 30))
def test_truncation_domination(chi, delta, M, extra):
    N = math.ceil(M / delta) + extra
    if N == 0:
        return
    assert truncation_dominated(chi, delta, M, N)


def test_truncation_domination_fails_when_N_small():
    assert not truncation_dominated(1.0, 0.1, 5, 10)


def test_pure_death_mean():
    init = BRWState.single(1, 5, 50)
    totals, _, _, _, _ = run_brw_replicas(BRWParams(0, 0), init, 1.0, 400, 3, sample_times=[1.0])
    assert abs(totals[:, 0].mean() - 50 * math.exp(-1)) < 4 * totals[:, 0].std() / 20


def test_truncated_ceiling():
    for M in (0, 1, 3):
        init = BRWState.single(1, 40, 1)
        res = run_brw(BRWParams(2.0, 1.0, M=M), init, 6.0, 5, truncated=True, sample_times=np.arange(7.0))
        assert res.max_site_count_ever <= M + 1
        assert np.all(res.max_site_count <= M + 1)


def test_truncated_survival_for_large_M():
    from statsmodels.stats.proportion import proportion_confint

    init = BRWState.single(1, 150, 1)
    totals, _, leaked, _, _ = run_brw_replicas(BRWParams(0.9, 0.6, M=20), init, 20.0, 100, 2, truncated=True,
                                                sample_times=[20.0])
    alive = int((totals[:, 0] > 0).sum())
    assert proportion_confint(alive, 100, method="wilson")[0] > 0
    assert leaked.sum() == 0


def test_mean_field_matches_series():
    p = BRWParams(0.4, 0.3)
    init = BRWState.single(1, 12, 1)
    _, finals, leaked, _, _ = run_brw_replicas(p, init, 1.5, 10_000, 9)
    for X in (0, 1, 2):
        samples = finals[:, 12 + X]
        exact = expected_occupancy(p, 1.5, (X,), 40).value
        assert abs(samples.mean() - exact) < 3 * samples.std() / 100 + 1e-12


def test_leak_counter_and_warning():
    with pytest.warns(RuntimeWarning, match="too small"):
        res = run_brw(BRWParams(0.2, 1.0), BRWState.single(1, 1, 5), 5.0, 1)
    assert res.leaked >= 0
    assert leak_bound(BRWParams(0.2, 1.0), 1, 100, 1, 1.0) < 1e-12


def test_deterministic():
    init = BRWState.single(2, 15, 3)
    a = run_brw(BRWParams(0.5, 0.2), init, 3.0, 11, sample_times=[1.0, 3.0])
    b = run_brw(BRWParams(0.5, 0.2), init, 3.0, 11, sample_times=[1.0, 3.0])
    assert np.array_equal(a.totals, b.totals) and np.array_equal(a.final.counts, b.final.counts)
