"""Dual processes: coalescing walks for the neutral model and branching-coalescing
walks for the threshold process, in fresh-randomness and log-replay modes.

In log-replay mode the dual walks the recorded arrows backwards from time T:
a lineage sitting at vertex v when v copies a source moves to the source; in
the threshold dual a lineage at v hit by a branching event is replaced by all
vertices of the adjacent hosts.  Lineages on the same vertex merge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.linalg import solve_banded

from .events import BRANCH, EventLog
from .graph import HostGraph
from .rng import as_kernel_seed, kernel_seeds
from .voter import VoterParams, VoterState, run_threshold, run_voter_replicas


@dataclass
class CoalescingRun:
    walkers: np.ndarray  # distinct vertices at dual time T
    sizes: np.ndarray  # rows (s, size) at every change


@dataclass
class BranchingRun:
    particles: np.ndarray
    sizes: np.ndarray
    capped: bool = False


@dataclass(frozen=True)
class DualityResult:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    z: float


@dataclass(frozen=True)
class MeetingStats:
    estimate: float  # P(separation before coalescence | meeting), pooled
    stderr: float
    meetings: int  # meetings with an outcome before T
    separated: int
    coalesced: int
    arrival_coincidences: int
    meeting_counts: np.ndarray  # J per replica

    @staticmethod
    def closed_form(N: int, alpha: float, beta: float) -> float:
        return N * beta / (alpha + N * beta)


@dataclass(frozen=True)
class PseudoDualResult:
    passed: bool
    premise: bool
    forward_value: int
    dual_size: int


@dataclass(frozen=True)
class HitBallResult:
    miss: float
    stderr: float
    T: float
    replicas: int


# ---------------------------------------------------------------- coalescing walks


@njit(cache=True)
def _coalescing_run(indptr, indices, N, p_vert, start, T, seed, occ):
    np.random.seed(seed)
    pos = start.copy()
    m = pos.shape[0]
    for i in range(m):
        occ[pos[i]] = i
    sizes = np.empty((m + 1, 2))
    ns = 0
    sizes[ns, 0] = 0.0
    sizes[ns, 1] = m
    ns += 1
    s = 0.0
    while True:
        s += np.random.exponential(1.0 / m)
        if s > T:
            break
        i = np.random.randint(0, m)
        X = pos[i] // N
        if np.random.random() < p_vert:
            y = X * N + np.random.randint(0, N)
        else:
            start_ = indptr[X]
            Y = indices[start_ + np.random.randint(0, indptr[X + 1] - start_)]
            y = Y * N + np.random.randint(0, N)
        if y == pos[i]:
            continue
        occ[pos[i]] = -1
        if occ[y] >= 0:
            last = pos[m - 1]
            if i != m - 1:
                pos[i] = last
                occ[last] = i
            m -= 1
            sizes[ns, 0] = s
            sizes[ns, 1] = m
            ns += 1
        else:
            pos[i] = y
            occ[y] = i
    for i in range(m):
        occ[pos[i]] = -1
    return pos[:m].copy(), sizes[:ns].copy()


@njit(cache=True, parallel=True)
def _coalescing_sizes(indptr, indices, N, p_vert, start, T, seeds, V):
    R = seeds.shape[0]
    out = np.zeros(R, dtype=np.int64)
    for r in prange(R):
        occ = np.full(V, -1, dtype=np.int64)
        pos, _ = _coalescing_run(indptr, indices, N, p_vert, start, T, seeds[r], occ)
        out[r] = pos.shape[0]
    return out


@njit(cache=True)
def _replay_lineages(ev_v, ev_t, ev_a, lineages, T):
    """Follow copy arrows backwards from time T; returns every lineage's position at time 0."""
    pos = lineages.copy()
    for e in range(ev_v.shape[0] - 1, -1, -1):
        if ev_t[e] > T:
            continue
        v = ev_v[e]
        for i in range(pos.shape[0]):
            if pos[i] == v:
                pos[i] = ev_a[e]
    return pos


def _validate_start(g, B):
    B = np.unique(np.asarray(B, dtype=np.int64))
    if len(B) == 0:
        raise ValueError("starting set must be nonempty")
    if B.min() < 0 or B.max() >= g.n_vertices:
        raise ValueError("starting vertex outside the graph")
    return B


def run_coalescing_dual(g: HostGraph, N: int, alpha: float, beta: float, B, T: float, rng=None,
                        log: EventLog | None = None) -> CoalescingRun:
    """Coalescing walks from B run for dual time T, from fresh randomness or a recorded log."""
    B = _validate_start(g, B)
    if log is not None:
        log.validate(g)
        if np.any(log.records["kind"] == BRANCH):
            raise ValueError("neutral dual cannot replay branching events")
        pos = ancestors(log, B, T)
        return CoalescingRun(np.unique(pos), np.array([[T, len(np.unique(pos))]]))
    if alpha + beta <= 0:
        raise ValueError("alpha + beta must be > 0")
    occ = np.full(g.n_vertices, -1, dtype=np.int64)
    pos, sizes = _coalescing_run(g.indptr, g.indices, N, alpha / (alpha + beta), B, float(T), as_kernel_seed(rng), occ)
    return CoalescingRun(np.sort(pos), sizes)


def ancestors(log: EventLog, lineages, T: float) -> np.ndarray:
    """Position at time 0 of the lineage of each vertex in ``lineages`` traced back from T."""
    r = log.records
    copy = r["kind"] != BRANCH
    return _replay_lineages(
        r["vertex"][copy].astype(np.int64), r["time"][copy], r["aux"][copy].astype(np.int64),
        np.asarray(lineages, dtype=np.int64), float(T),
    )


def duality_check(g: HostGraph, N: int, alpha: float, beta: float, theta: float, B, t: float, replicas: int,
                  master_seed: int) -> DualityResult:
    """Two-sided Monte Carlo of P(no type 1 on B at time t) = E (1 - theta)^|dual|."""
    B = _validate_start(g, B)
    _, _, _, watched = run_voter_replicas(
        g, N, VoterParams.neutral(alpha, beta), theta, t, replicas, master_seed, watch=B, tag="duality-forward"
    )
    hits = np.all(watched == 2, axis=1)
    lhs = hits.mean()
    lhs_se = math.sqrt(lhs * (1 - lhs) / replicas)
    sizes = _coalescing_sizes(
        g.indptr, g.indices, N, alpha / (alpha + beta), B, float(t),
        kernel_seeds(master_seed, "duality-dual", replicas), g.n_vertices,
    )
    w = (1.0 - theta) ** sizes
    rhs = w.mean()
    rhs_se = w.std(ddof=1) / math.sqrt(replicas) if replicas > 1 else 0.0
    se = math.hypot(lhs_se, rhs_se)
    z = 0.0 if se == 0 else (lhs - rhs) / se
    return DualityResult(float(lhs), lhs_se, float(rhs), float(rhs_se), float(z))


# ---------------------------------------------------------------- meetings


@njit(cache=True)
def _meeting_run(indptr, indices, N, p_vert, x, y, T, seed, out):
    """Two independent walks; out = [meetings, separated, coalesced, arrivals]."""
    np.random.seed(seed)
    pos = np.array([x, y], dtype=np.int64)
    meeting = pos[0] // N == pos[1] // N
    if meeting:
        out[0] += 1
    s = 0.0
    while True:
        s += np.random.exponential(0.5)
        if s > T:
            break
        i = np.random.randint(0, 2)
        X = pos[i] // N
        if np.random.random() < p_vert:
            new = X * N + np.random.randint(0, N)
            if meeting and new == pos[1 - i]:
                out[2] += 1
                return
            pos[i] = new
        else:
            start = indptr[X]
            Y = indices[start + np.random.randint(0, indptr[X + 1] - start)]
            new = Y * N + np.random.randint(0, N)
            pos[i] = new
            if meeting:
                out[1] += 1
                meeting = False
            if Y == pos[1 - i] // N:
                meeting = True
                out[0] += 1
                if new == pos[1 - i]:
                    out[3] += 1


@njit(cache=True, parallel=True)
def _meeting_many(indptr, indices, N, p_vert, x, y, T, seeds):
    R = seeds.shape[0]
    out = np.zeros((R, 4), dtype=np.int64)
    for r in prange(R):
        row = np.zeros(4, dtype=np.int64)
        _meeting_run(indptr, indices, N, p_vert, x, y, T, seeds[r], row)
        out[r] = row
    return out


def meeting_separation_stats(g: HostGraph, N: int, alpha: float, beta: float, x: int, y: int, T: float,
                             replicas: int, master_seed: int) -> MeetingStats:
    """Pooled frequency with which a host-sharing episode ends by separation rather than coalescence.

    Coalescence within a meeting is a vertical jump onto the partner's vertex.
    Horizontal arrivals onto the partner's exact vertex are counted separately
    and do not end the meeting.
    """
    if x == y:
        raise ValueError("need x != y")
    if alpha + beta <= 0:
        raise ValueError("alpha + beta must be > 0")
    rows = _meeting_many(
        g.indptr, g.indices, N, alpha / (alpha + beta), int(x), int(y), float(T),
        kernel_seeds(master_seed, "meetings", replicas),
    )
    sep, coal = int(rows[:, 1].sum()), int(rows[:, 2].sum())
    resolved = sep + coal
    est = sep / resolved if resolved else float("nan")
    se = math.sqrt(est * (1 - est) / resolved) if resolved else float("nan")
    return MeetingStats(est, se, resolved, sep, coal, int(rows[:, 3].sum()), rows[:, 0].copy())


# ---------------------------------------------------------------- branching-coalescing walks


@njit(cache=True)
def _bc_add(pos, occ, m, y):
    if occ[y] < 0:
        pos[m] = y
        occ[y] = m
        return m + 1
    return m


@njit(cache=True)
def _bc_remove(pos, occ, m, i):
    occ[pos[i]] = -1
    last = pos[m - 1]
    if i != m - 1:
        pos[i] = last
        occ[last] = i
    return m - 1


@njit(cache=True)
def _bc_run(indptr, indices, N, p_jump, x, T, seed, occ, max_events):
    np.random.seed(seed)
    V = occ.shape[0]
    pos = np.empty(V, dtype=np.int64)
    m = _bc_add(pos, occ, 0, x)
    s = 0.0
    events = 0
    capped = False
    while True:
        s += np.random.exponential(1.0 / m)
        if s > T:
            break
        if events >= max_events:
            capped = True
            break
        events += 1
        i = np.random.randint(0, m)
        X = pos[i] // N
        start = indptr[X]
        deg = indptr[X + 1] - start
        if np.random.random() < p_jump:
            y = indices[start + np.random.randint(0, deg)] * N + np.random.randint(0, N)
            m = _bc_remove(pos, occ, m, i)
            m = _bc_add(pos, occ, m, y)
        else:
            m = _bc_remove(pos, occ, m, i)
            for j in range(start, start + deg):
                Y = indices[j]
                for k in range(N):
                    m = _bc_add(pos, occ, m, Y * N + k)
    out = pos[:m].copy()
    for i in range(m):
        occ[pos[i]] = -1
    return out, capped


@njit(cache=True)
def _bc_replay(indptr, indices, N, ev_v, ev_t, ev_k, ev_a, x, T, occ):
    V = occ.shape[0]
    pos = np.empty(V, dtype=np.int64)
    m = _bc_add(pos, occ, 0, x)
    for e in range(ev_v.shape[0] - 1, -1, -1):
        if ev_t[e] > T:
            continue
        v = ev_v[e]
        i = occ[v]
        if i < 0:
            continue
        m = _bc_remove(pos, occ, m, i)
        if ev_k[e] == 2:
            X = v // N
            for j in range(indptr[X], indptr[X + 1]):
                Y = indices[j]
                for k in range(N):
                    m = _bc_add(pos, occ, m, Y * N + k)
        else:
            m = _bc_add(pos, occ, m, ev_a[e])
    out = pos[:m].copy()
    for i in range(m):
        occ[pos[i]] = -1
    return out


@njit(cache=True, parallel=True)
def _bc_many(indptr, indices, N, p_jump, x, T, seeds, V, ball, max_events):
    R = seeds.shape[0]
    miss = np.zeros(R, dtype=np.bool_)
    capped = np.zeros(R, dtype=np.bool_)
    for r in prange(R):
        occ = np.full(V, -1, dtype=np.int64)
        pos, cp = _bc_run(indptr, indices, N, p_jump, x, T, seeds[r], occ, max_events)
        hit = False
        for i in range(pos.shape[0]):
            if ball[pos[i] // N]:
                hit = True
                break
        miss[r] = not hit
        capped[r] = cp
    return miss, capped


def run_branching_coalescing(g: HostGraph, N: int, p_jump: float, x: int, T: float, rng=None,
                             log: EventLog | None = None, max_events: int = 50_000_000) -> BranchingRun:
    """Dual of the threshold process started from the single vertex x at dual time 0."""
    if not 0.0 <= p_jump <= 1.0:
        raise ValueError("p_jump must lie in [0, 1]")
    occ = np.full(g.n_vertices, -1, dtype=np.int64)
    if log is not None:
        log.validate(g)
        r = log.records
        pos = _bc_replay(
            g.indptr, g.indices, N, r["vertex"].astype(np.int64), r["time"], r["kind"].astype(np.int64),
            r["aux"].astype(np.int64), int(x), float(T), occ,
        )
        return BranchingRun(np.sort(pos), np.array([[T, len(pos)]]))
    pos, capped = _bc_run(g.indptr, g.indices, N, float(p_jump), int(x), float(T), as_kernel_seed(rng), occ, max_events)
    return BranchingRun(np.sort(pos), np.array([[T, len(pos)]]), bool(capped))


def pseudo_dual_verify(g: HostGraph, init: VoterState, final: VoterState, log: EventLog, x: int,
                       T: float | None = None) -> PseudoDualResult:
    """If some vertex of the replayed dual starts as type 1, x must be type 1 at time T."""
    T = log.t_end if T is None else T
    dual = run_branching_coalescing(g, g.N, 0.0, x, T, log=log).particles
    premise = bool(np.any(init.types[dual] == 1))
    value = int(final.types[x])
    return PseudoDualResult((not premise) or value == 1, premise, value, len(dual))


def pseudo_dual_check(g: HostGraph, N: int, beta2: float, kappa: float, init: VoterState, x: int, T: float,
                      rng) -> PseudoDualResult:
    g = g.with_N(N)
    run = run_threshold(g, N, beta2, kappa, init, T, rng)
    return pseudo_dual_verify(g, init, run.state, run.log, x, T)


# ---------------------------------------------------------------- ball hitting


def ball_mask(g: HostGraph, center: int, K: int) -> np.ndarray:
    """Hosts in the open box center + (-K, K)^d (torus distance)."""
    diff = np.abs(g.hosts - g.hosts[center])
    diff = np.minimum(diff, g.L - diff)
    return diff.max(axis=1) < K


def dual_hit_ball(g: HostGraph, N: int, p_jump: float, x: int, center: int, K: int, replicas: int,
                  master_seed: int, max_events: int = 50_000_000) -> HitBallResult:
    """Monte Carlo of P(dual from x run for K^2 misses the ball around ``center``)."""
    if not ball_mask(g, center, 3 * K)[x // N]:
        raise ValueError("x must lie within B(center, 3K)")
    T = float(K * K)
    miss, capped = _bc_many(
        g.indptr, g.indices, N, float(p_jump), int(x), T, kernel_seeds(master_seed, "hit-ball", replicas),
        g.n_vertices, ball_mask(g, center, K), max_events,
    )
    if capped.any():
        raise RuntimeError("event cap reached; increase max_events")
    est = float(miss.mean())
    return HitBallResult(est, math.sqrt(est * (1 - est) / replicas), T, replicas)


def reflected_walk_rates(d: int, p_jump: float) -> tuple[float, float]:
    """Right and left rates of the walk dominating a coordinate's distance to the ball centre."""
    return p_jump / (2 * d), p_jump / (2 * d) + (1 - p_jump) / d


def return_probability_exact(r: float, l: float, k: int, depth: int = 400) -> float:
    """P(walk jumping right at rate l, left at rate r, ever hits 0 | start at k) by a first-step solve.

    States 1 .. k + depth, with 0 absorbing (value 1) and k + depth + 1 absorbing (value 0).
    """
    if k == 0:
        return 1.0
    n = k + depth
    up, down = l / (l + r), r / (l + r)
    ab = np.zeros((3, n))
    ab[0, 1:] = -up  # superdiagonal
    ab[1, :] = 1.0
    ab[2, :-1] = -down  # subdiagonal
    rhs = np.zeros(n)
    rhs[0] = down
    h = solve_banded((1, 1), ab, rhs)
    return float(h[k - 1])


@njit(cache=True)
def _return_mc(up, k, ceiling, replicas, seed):
    np.random.seed(seed)
    hits = 0
    for _ in range(replicas):
        z = k
        while 0 < z < ceiling:
            z += 1 if np.random.random() < up else -1
        if z == 0:
            hits += 1
    return hits


def return_probability_mc(r: float, l: float, k: int, replicas: int, rng, depth: int = 60) -> tuple[float, float]:
    hits = _return_mc(l / (l + r), int(k), int(k + depth), int(replicas), as_kernel_seed(rng))
    est = hits / replicas
    return est, math.sqrt(est * (1 - est) / replicas)


@njit(cache=True)
def _reflected_final(r, l, z0, T, replicas, seed):
    np.random.seed(seed)
    out = np.empty(replicas, dtype=np.int64)
    for i in range(replicas):
        z = z0
        s = 0.0
        while True:
            s += np.random.exponential(1.0 / (r + l))
            if s > T:
                break
            if np.random.random() < r / (r + l):
                z += 1
            elif z > 0:
                z -= 1
        out[i] = z
    return out


def reflected_walk_final(r: float, l: float, z0: int, T: float, replicas: int, rng) -> np.ndarray:
    """Positions at time T of the walk reflected at 0 (right rate r, left rate l)."""
    return _reflected_final(float(r), float(l), int(z0), float(T), int(replicas), as_kernel_seed(rng))
