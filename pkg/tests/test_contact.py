import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hostsym.contact import (
    ContactParams, ContactState, box_mask, center_host, geometric_times, run, run_coupled_pair, run_replicas,
    run_restricted, step, survival_probability,
)
from hostsym.graph import build_lattice


def test_params_validation():
    with pytest.raises(ValueError):
        ContactParams(-1, 1)
    assert ContactParams(0.5, 1.5).rate_per_symbiont == 3.0


def test_absorbing_state_is_noop(torus8):
    s = ContactState(np.zeros(torus8.n_hosts, dtype=np.int64), 1.5)
    out = step(torus8, 3, ContactParams(1, 1), s, 1)
    assert out.last_event == "absorbed" and out.time == 1.5 and out.total == 0


def test_single_symbiont_N1_never_births_within_host():
    g = build_lattice(1, 10, N=1)
    s = ContactState.single_host(g, 4, 1)
    for seed in range(300):
        out = step(g, 1, ContactParams(alpha=100.0, beta=0.0), s, seed)
        assert out.last_event in ("death", "suppressed")
        assert out.counts[4] <= 1


def test_full_host_within_host_birth_suppressed():
    g = build_lattice(1, 10, N=4)
    s = ContactState.single_host(g, 4)
    kinds = {step(g, 4, ContactParams(5.0, 0.0), s, seed).last_event for seed in range(200)}
    assert "birth" not in kinds


def test_step_event_frequencies():
    """One-step law: death 1/(1+a+b); births from an otherwise empty neighbourhood."""
    g = build_lattice(1, 10, N=2)
    s = ContactState.single_host(g, 4, 1)
    params = ContactParams(1.0, 2.0)
    n = 4000
    events = [step(g, 2, params, s, seed) for seed in range(n)]
    deaths = sum(e.last_event == "death" for e in events)
    # own-host birth accepted w.p. 1/2; neighbour birth always accepted
    births_own = sum(e.last_event == "birth" and e.counts[4] == 2 for e in events)
    births_nb = sum(e.last_event == "birth" and e.counts[4] == 1 for e in events)
    for k, p in ((deaths, 1 / 4), (births_own, 1 / 8), (births_nb, 1 / 2)):
        assert abs(k / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_holding_times_at_frozen_state(torus8):
    s = ContactState(np.array([3, 1] + [0] * (torus8.n_hosts - 2)), 0.0)
    params = ContactParams(0.7, 1.3)
    dts = np.array([step(torus8, 3, params, s, seed).time for seed in range(3000)])
    rate = 4 * 3.0
    # Kolmogorov-Smirnov against Exp(rate)
    assert stats.kstest(dts, "expon", args=(0, 1 / rate)).pvalue > 1e-3


def test_pure_death_mean_total(torus8):
    init = ContactState.full(torus8)
    _, _, _, trajs = run_replicas(torus8, 3, ContactParams(0, 0), init, 2.0, 400, 5, sample_times=[1.0])
    totals = np.array([t[0, 1] for t in trajs])
    expected = init.total * math.exp(-1.0)
    assert abs(totals.mean() - expected) < 4 * totals.std() / 20


def test_pure_death_dies_out(torus8):
    rep = run(torus8, 3, ContactParams(0, 0), ContactState.full(torus8), 100.0, 3)
    assert not rep.survived and rep.extinction_time < 100
    assert rep.final.total == 0


def test_subcritical_extinction_200_replicas():
    g = build_lattice(2, 20, N=5)
    init = ContactState.single_host(g, center_host(g))
    _, survived, ext, _ = run_replicas(g, 5, ContactParams(0.45, 0.45), init, 500.0, 200, 17)
    assert not survived.any() and ext.max() < 500


def test_supercritical_contact_process_survives():
    g = build_lattice(2, 30, N=1)
    init = np.zeros(g.n_hosts, dtype=np.int64)
    init[:10] = 1
    est = survival_probability(g, 1, ContactParams(0.0, 10.0), init, 100.0, 20, 4)
    assert est.estimate >= 0.5


def test_run_is_deterministic_and_consistent(torus8):
    init = ContactState.single_host(torus8, 5)
    a = run(torus8, 3, ContactParams(1, 2), init, 30.0, 99)
    b = run(torus8, 3, ContactParams(1, 2), init, 30.0, 99)
    assert np.array_equal(a.trajectory, b.trajectory) and np.array_equal(a.final.counts, b.final.counts)
    assert a.survived == (a.final.total > 0)
    assert a.survived == (a.extinction_time == 30.0)
    assert np.array_equal(a.trajectory[:, 0], geometric_times(30.0))
    assert init.counts[5] == 3  # input not mutated


def test_watched_hosts_and_trajectory_columns(torus8):
    init = ContactState.full(torus8)
    rep = run(torus8, 3, ContactParams(1, 1), init, 5.0, 2, sample_times=[0.0, 2.0, 5.0], watch=[0, 1, 2])
    assert rep.watched.shape == (3, 3)
    assert np.all(rep.watched[0] == 3)
    assert np.all(rep.trajectory[:, 1] >= rep.trajectory[:, 2])


def test_restricted_box_covering_torus_is_identical(torus8):
    init = ContactState.single_host(torus8, 10)
    a = run(torus8, 3, ContactParams(1, 2), init, 20.0, 8)
    b = run_restricted(torus8, 3, ContactParams(1, 2), init, 4, 20.0, 8)
    assert np.array_equal(a.trajectory, b.trajectory)
    assert np.array_equal(a.final.counts, b.final.counts) and a.events == b.events


def test_restricted_box_zero_is_single_host(torus8):
    init = ContactState.single_host(torus8, 10, 1)
    for seed in range(20):
        rep = run_restricted(torus8, 3, ContactParams(2, 5), init, 0, 10.0, seed, watch=np.arange(torus8.n_hosts))
        others = np.delete(rep.watched, 10, axis=1)
        assert others.max() == 0


def test_restricted_rejects_outside_support(torus8):
    init = np.zeros(torus8.n_hosts, dtype=np.int64)
    init[0] = init[torus8.host_at((4, 4))] = 1
    with pytest.raises(ValueError, match="box"):
        run_restricted(torus8, 3, ContactParams(1, 1), init, 1, 5.0, 0, center=0)


def test_box_mask_counts(torus8):
    assert box_mask(torus8, 0, 1).sum() == 9
    assert box_mask(torus8, 0, 4).sum() == 64


def test_invalid_init(torus8):
    with pytest.raises(ValueError):
        run(torus8, 3, ContactParams(1, 1), np.full(torus8.n_hosts, 4), 1.0, 0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), da=st.floats(0, 1), db=st.floats(0, 1), dN=st.integers(0, 2),
       a=st.floats(0, 2), b=st.floats(0, 2))
def test_coupled_pair_is_ordered(seed, da, db, dN, a, b):
    g = build_lattice(1, 12, N=4)
    rng = np.random.default_rng(seed)
    Ns, Nb = 2, 2 + dN
    small = rng.integers(0, Ns + 1, g.n_hosts)
    big = np.minimum(small + rng.integers(0, 2, g.n_hosts), Nb)
    times = np.linspace(0, 10, 11)
    cs, cb = run_coupled_pair(g, (ContactParams(a, b), Ns), (ContactParams(a + da, b + db), Nb), small, big,
                              10.0, times, seed)
    assert cs.shape == cb.shape == (11, g.n_hosts)
    assert np.all(cs <= cb)
    assert cs.max() <= Ns and cb.max() <= Nb


def test_coupled_pair_marginal_matches_direct_law():
    """The small process of the coupling has the same extinction law as a direct run."""
    g = build_lattice(1, 12, N=2)
    init = ContactState.single_host(g, 0).counts
    p = ContactParams(0.5, 1.0)
    coupled = [run_coupled_pair(g, (p, 2), (ContactParams(1.0, 2.0), 3), init, init, 3.0, [3.0], s)[0][0].sum() > 0
               for s in range(1500)]
    _, surv, _, _ = run_replicas(g, 2, p, init, 3.0, 1500, 1, sample_times=[3.0])
    a, b = np.mean(coupled), surv.mean()
    se = math.sqrt(a * (1 - a) / 1500 + b * (1 - b) / 1500)
    assert abs(a - b) < 4 * se


def test_coupled_pair_rejects_unordered():
    g = build_lattice(1, 6, N=2)
    z = np.zeros(g.n_hosts, dtype=np.int64)
    with pytest.raises(ValueError):
        run_coupled_pair(g, (ContactParams(2, 1), 2), (ContactParams(1, 1), 2), z, z, 1.0, [1.0], 0)


def test_survival_stderr_and_streams(torus8):
    init = ContactState.single_host(torus8, 0)
    est = survival_probability(torus8, 3, ContactParams(1.5, 2.0), init, 5.0, 64, 3)
    assert est.replicas == 64 and 0 <= est.estimate <= 1
    assert est.stderr == pytest.approx(math.sqrt(est.estimate * (1 - est.estimate) / 64))
    again = survival_probability(torus8, 3, ContactParams(1.5, 2.0), init, 5.0, 64, 3)
    assert again == est
    with pytest.raises(ValueError):
        survival_probability(torus8, 3, ContactParams(1, 1), init, 5.0, 0, 3)


def test_logistic_growth_single_host_mean():
    """box_n = 0 gives a birth-death chain on 0..N; compare P(alive at t) to the exact chain."""
    from scipy.linalg import expm

    g = build_lattice(1, 8, N=5)
    N, a = 5, 2.0
    Q = np.zeros((N + 1, N + 1))
    for k in range(1, N + 1):
        Q[k, k - 1] = k
        if k < N:
            Q[k, k + 1] = a * k * (N - k) / N
        Q[k, k] = -Q[k].sum()
    alive_exact = 1 - expm(2.0 * Q)[1, 0]
    init = ContactState.single_host(g, 3, 1)
    alive = [run_restricted(g, N, ContactParams(a, 3.0), init, 0, 2.0, s).survived for s in range(3000)]
    se = math.sqrt(alive_exact * (1 - alive_exact) / 3000)
    assert abs(np.mean(alive) - alive_exact) < 4 * se
