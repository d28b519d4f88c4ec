"""Single-species invasion model on the symbiont graph.

Slots within a host are exchangeable, so the state is the vector of host
occupancies ``counts[X]`` in ``0..N``.  Events are generated symbiont-first:
a uniformly chosen symbiont dies, or attempts a birth into a uniform slot of
its own host (rate ``alpha``), or into a uniform slot of a uniform adjacent
host (rate ``beta``); births onto occupied slots are suppressed.  Symbionts are
kept in a token list (one host index per symbiont) so that picking one
uniformly and removing it are both O(1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit, prange

from .graph import HostGraph
from .rng import as_kernel_seed, kernel_seeds

DEATH, BIRTH, SUPPRESSED, DISCARDED, ABSORBED = 0, 1, 2, 3, 4
_EVENT_NAMES = ("death", "birth", "suppressed", "discarded", "absorbed")


@dataclass(frozen=True)
class ContactParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("rates must be nonnegative")

    @property
    def rate_per_symbiont(self) -> float:
        return 1.0 + self.alpha + self.beta


@dataclass
class ContactState:
    counts: np.ndarray
    time: float = 0.0
    last_event: str = ""

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def occupied(self) -> int:
        return int(np.count_nonzero(self.counts))

    @property
    def absorbed(self) -> bool:
        return self.total == 0

    @classmethod
    def single_host(cls, g: HostGraph, host: int, k: int | None = None) -> "ContactState":
        counts = np.zeros(g.n_hosts, dtype=np.int64)
        counts[host] = g.N if k is None else k
        return cls(counts)

    @classmethod
    def full(cls, g: HostGraph, k: int | None = None) -> "ContactState":
        return cls(np.full(g.n_hosts, g.N if k is None else k, dtype=np.int64))


@dataclass
class RunReport:
    survived: bool
    extinction_time: float
    trajectory: np.ndarray  # rows (t, total, occupied_hosts)
    final: ContactState
    events: int = 0
    watched: np.ndarray | None = field(default=None, repr=False)  # (samples, watched hosts)


@dataclass(frozen=True)
class SurvivalEstimate:
    estimate: float
    stderr: float
    survived: int
    replicas: int


def geometric_times(t_end: float) -> np.ndarray:
    times = [0.0]
    t = 1.0
    while t < t_end:
        times.append(t)
        t *= 2
    times.append(float(t_end))
    return np.array(times)


def center_host(g: HostGraph) -> int:
    """Host closest (torus l2) to the centre of the box; ties to smallest index."""
    c = np.full(g.d, g.L // 2)
    diff = np.abs(g.hosts - c)
    diff = np.minimum(diff, g.L - diff)
    return int(np.argmin((diff**2).sum(axis=1)))


def box_mask(g: HostGraph, center: int, n: int) -> np.ndarray:
    diff = np.abs(g.hosts - g.hosts[center])
    diff = np.minimum(diff, g.L - diff)
    return diff.max(axis=1) <= n


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def _fill_owner(counts, owner):
    k = 0
    for h in range(counts.shape[0]):
        for _ in range(counts[h]):
            owner[k] = h
            k += 1
    return k


@njit(cache=True)
def _contact_event(indptr, indices, N, alpha, beta, counts, owner, st, inbox, restricted):
    # st = [total, occupied]
    total = st[0]
    if total == 0:
        return ABSORBED
    i = np.random.randint(0, total)
    X = owner[i]
    u = np.random.random() * (1.0 + alpha + beta)
    if u < 1.0:
        counts[X] -= 1
        if counts[X] == 0:
            st[1] -= 1
        owner[i] = owner[total - 1]
        st[0] = total - 1
        return DEATH
    if u < 1.0 + alpha:
        Y = X
    else:
        start = indptr[X]
        Y = indices[start + np.random.randint(0, indptr[X + 1] - start)]
        if restricted and not inbox[Y]:
            return DISCARDED
    if np.random.randint(0, N) >= counts[Y]:
        if counts[Y] == 0:
            st[1] += 1
        counts[Y] += 1
        owner[total] = Y
        st[0] = total + 1
        return BIRTH
    return SUPPRESSED


@njit(cache=True)
def _contact_run(indptr, indices, N, alpha, beta, counts, inbox, restricted, t_end, sample_times, watch, seed):
    np.random.seed(seed)
    H = counts.shape[0]
    owner = np.empty(H * N + 1, dtype=np.int64)
    st = np.zeros(2, dtype=np.int64)
    st[0] = _fill_owner(counts, owner)
    st[1] = np.count_nonzero(counts)
    S = sample_times.shape[0]
    traj = np.zeros((S, 3))
    watched = np.zeros((S, watch.shape[0]), dtype=np.int64)
    rate_sum = 1.0 + alpha + beta
    t = 0.0
    k = 0
    events = 0
    while st[0] > 0:
        t_next = t + np.random.exponential(1.0 / (st[0] * rate_sum))
        while k < S and sample_times[k] < t_next and sample_times[k] <= t_end:
            traj[k, 0] = sample_times[k]
            traj[k, 1] = st[0]
            traj[k, 2] = st[1]
            for w in range(watch.shape[0]):
                watched[k, w] = counts[watch[w]]
            k += 1
        if t_next > t_end:
            break
        t = t_next
        _contact_event(indptr, indices, N, alpha, beta, counts, owner, st, inbox, restricted)
        events += 1
    survived = st[0] > 0
    while k < S and sample_times[k] <= t_end:  # absorbed: state is frozen at zero
        traj[k, 0] = sample_times[k]
        k += 1
    ext = t_end if survived else t
    return survived, ext, traj[:k], watched[:k], events


@njit(cache=True, parallel=True)
def _contact_many(indptr, indices, N, alpha, beta, init, inbox, restricted, t_end, sample_times, seeds):
    R = seeds.shape[0]
    S = sample_times.shape[0]
    survived = np.zeros(R, dtype=np.bool_)
    ext = np.zeros(R)
    trajs = np.zeros((R, S, 3))
    nsamp = np.zeros(R, dtype=np.int64)
    nowatch = np.zeros(0, dtype=np.int64)
    for r in prange(R):
        counts = init.copy()
        s, e, tr, _, _ = _contact_run(
            indptr, indices, N, alpha, beta, counts, inbox, restricted, t_end, sample_times, nowatch, seeds[r]
        )
        survived[r] = s
        ext[r] = e
        nsamp[r] = tr.shape[0]
        trajs[r, : tr.shape[0]] = tr
    return survived, ext, trajs, nsamp


@njit(cache=True)
def _coupled_run(indptr, indices, Ns, Nb, a_s, b_s, a_b, b_b, small, big, t_end, sample_times, seed):
    """Uniformised joint construction of two ordered processes.

    Every event draws host X, particle rank k in 1..Nb, a mark u in
    [0, 1+a_b+b_b), a common target and a common acceptance uniform; each
    process applies the event iff the particle exists in it and the mark lies
    inside its own rate window.
    """
    np.random.seed(seed)
    H = small.shape[0]
    S = sample_times.shape[0]
    out_s = np.zeros((S, H), dtype=np.int64)
    out_b = np.zeros((S, H), dtype=np.int64)
    lam = H * Nb * (1.0 + a_b + b_b)
    t = 0.0
    k = 0
    while True:
        t_next = t + np.random.exponential(1.0 / lam)
        while k < S and sample_times[k] < t_next and sample_times[k] <= t_end:
            out_s[k] = small
            out_b[k] = big
            k += 1
        if t_next > t_end:
            break
        t = t_next
        X = np.random.randint(0, H)
        rank = np.random.randint(1, Nb + 1)
        u = np.random.random() * (1.0 + a_b + b_b)
        if u < 1.0:
            if rank <= small[X]:
                small[X] -= 1
            if rank <= big[X]:
                big[X] -= 1
            continue
        if u < 1.0 + a_b:
            Y = X
            act_s = rank <= small[X] and (u - 1.0) < a_s
        else:
            start = indptr[X]
            Y = indices[start + np.random.randint(0, indptr[X + 1] - start)]
            act_s = rank <= small[X] and (u - 1.0 - a_b) < b_s
        act_b = rank <= big[X]
        acc = np.random.random()
        if act_s and acc * Ns >= small[Y]:
            small[Y] += 1
        if act_b and acc * Nb >= big[Y]:
            big[Y] += 1
    return out_s[:k], out_b[:k]


# ---------------------------------------------------------------- API


def _inbox_all(g):
    return np.ones(g.n_hosts, dtype=np.bool_)


def step(g: HostGraph, N: int, params: ContactParams, state: ContactState, rng) -> ContactState:
    """Apply one event of the jump chain and advance the clock."""
    counts = np.array(state.counts, dtype=np.int64, copy=True)
    total = int(counts.sum())
    if total == 0:
        return replace(state, counts=counts, last_event=_EVENT_NAMES[ABSORBED])
    _seed(as_kernel_seed(rng))
    owner = np.empty(g.n_hosts * N + 1, dtype=np.int64)
    _fill_owner(counts, owner)
    st = np.array([total, np.count_nonzero(counts)], dtype=np.int64)
    dt = np.random.default_rng(as_kernel_seed(rng)).exponential(1.0 / (total * params.rate_per_symbiont))
    kind = _contact_event(g.indptr, g.indices, N, params.alpha, params.beta, counts, owner, st, _inbox_all(g), False)
    return ContactState(counts, state.time + dt, _EVENT_NAMES[kind])


def _run(g, N, params, init, t_end, rng, inbox, restricted, sample_times, watch):
    counts = np.array(init.counts if isinstance(init, ContactState) else init, dtype=np.int64, copy=True)
    if counts.shape != (g.n_hosts,) or counts.min() < 0 or counts.max() > N:
        raise ValueError("initial counts must be a per-host vector in 0..N")
    times = geometric_times(t_end) if sample_times is None else np.asarray(sample_times, dtype=float)
    watch = np.zeros(0, dtype=np.int64) if watch is None else np.asarray(watch, dtype=np.int64)
    survived, ext, traj, watched, events = _contact_run(
        g.indptr, g.indices, N, float(params.alpha), float(params.beta), counts, inbox, restricted,
        float(t_end), times, watch, as_kernel_seed(rng),
    )
    final = ContactState(counts, float(ext))
    return RunReport(bool(survived), float(ext), traj, final, int(events), watched if len(watch) else None)


def run(g: HostGraph, N: int, params: ContactParams, init, t_end: float, rng, sample_times=None, watch=None) -> RunReport:
    return _run(g, N, params, init, t_end, rng, _inbox_all(g), False, sample_times, watch)


def run_restricted(g: HostGraph, N: int, params: ContactParams, init, box_n: int, t_end: float, rng,
                   center: int | None = None, sample_times=None, watch=None) -> RunReport:
    """Like :func:`run`, but transmissions to hosts outside the box around ``center`` are lost."""
    counts = np.asarray(init.counts if isinstance(init, ContactState) else init)
    if center is None:
        center = int(np.flatnonzero(counts)[0]) if counts.any() else 0
    inbox = box_mask(g, center, box_n)
    if np.any(counts[~inbox] > 0):
        raise ValueError("initial configuration is not supported inside the box")
    return _run(g, N, params, counts, t_end, rng, inbox, True, sample_times, watch)


def run_replicas(g: HostGraph, N: int, params: ContactParams, init, t_end: float, replicas: int,
                 master_seed: int, sample_times=None, tag: str = "contact"):
    """Independent replicas on streams (master_seed, tag, r).

    Returns ``(seeds, survived, extinction_times, trajectories)`` where
    trajectories is a list of (samples, 3) arrays.
    """
    counts = np.array(init.counts if isinstance(init, ContactState) else init, dtype=np.int64)
    times = geometric_times(t_end) if sample_times is None else np.asarray(sample_times, dtype=float)
    seeds = kernel_seeds(master_seed, tag, replicas)
    survived, ext, trajs, nsamp = _contact_many(
        g.indptr, g.indices, N, float(params.alpha), float(params.beta), counts, _inbox_all(g), False,
        float(t_end), times, seeds,
    )
    return seeds, survived, ext, [trajs[r, : nsamp[r]] for r in range(replicas)]


def survival_probability(g: HostGraph, N: int, params: ContactParams, init, t_end: float, replicas: int,
                         master_seed: int) -> SurvivalEstimate:
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    _, survived, _, _ = run_replicas(g, N, params, init, t_end, replicas, master_seed, sample_times=[0.0])
    k = int(survived.sum())
    phat = k / replicas
    return SurvivalEstimate(phat, math.sqrt(phat * (1 - phat) / replicas), k, replicas)


def run_coupled_pair(g: HostGraph, small: tuple[ContactParams, int], big: tuple[ContactParams, int],
                     init_small, init_big, t_end: float, sample_times, seed):
    """Jointly construct two processes with ordered parameters and initial data.

    Requires ``alpha_s <= alpha_b``, ``beta_s <= beta_b``, ``N_s <= N_b`` and
    ``init_small <= init_big`` pointwise.  Returns the per-host counts of each
    process at ``sample_times``.
    """
    (ps, Ns), (pb, Nb) = small, big
    if ps.alpha > pb.alpha or ps.beta > pb.beta or Ns > Nb:
        raise ValueError("parameters are not ordered")
    a = np.array(init_small, dtype=np.int64, copy=True)
    b = np.array(init_big, dtype=np.int64, copy=True)
    if np.any(a > b) or a.max() > Ns or b.max() > Nb:
        raise ValueError("initial configurations are not ordered")
    return _coupled_run(
        g.indptr, g.indices, Ns, Nb, float(ps.alpha), float(ps.beta), float(pb.alpha), float(pb.beta),
        a, b, float(t_end), np.asarray(sample_times, dtype=float), as_kernel_seed(seed),
    )
