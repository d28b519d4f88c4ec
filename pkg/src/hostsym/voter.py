"""Two-type competition on the symbiont graph and its threshold variant.

A vertex resamples its type at rate 1: it becomes type 1 with probability

    (a1 f1 + b1 g1) / (a1 f1 + a2 f2 + b1 g1 + b2 g2)

where ``f_i`` is the fraction of type i among the N slots of its own host and
``g_i`` the fraction among the N * deg slots of the adjacent hosts.  Only the
per-host type-1 counts matter, so kernels keep them alongside the per-vertex
types.

The selection diagnostics (per-host ``p``/``q`` quantities, drift bounds and
site classification) are only defined on the full lattice and refuse other
graphs.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit, prange

from .events import BRANCH, HORIZONTAL_COPY, VERTICAL_COPY, EventLog
from .graph import HostGraph
from .rng import as_generator, as_kernel_seed, kernel_seeds

TYPE1, TYPE2 = 1, 2
STOP_TIME, STOP_TYPE1_EXTINCT, STOP_TARGET, STOP_TYPE2_EXTINCT = 0, 1, 2, 3
STOP_NAMES = ("t_end", "type1_extinct", "target_reached", "type2_extinct")


@dataclass(frozen=True)
class VoterParams:
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.beta1, self.beta2) < 0:
            raise ValueError("rates must be nonnegative")
        if self.beta1 <= 0 and self.beta2 <= 0:
            raise ValueError("degenerate parameters: need beta1 > 0 or beta2 > 0")

    @classmethod
    def neutral(cls, alpha: float, beta: float) -> "VoterParams":
        return cls(alpha, alpha, beta, beta)

    @property
    def is_neutral(self) -> bool:
        return self.alpha1 == self.alpha2 and self.beta1 == self.beta2

    def exact(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return tuple(Fraction(v) for v in (self.alpha1, self.alpha2, self.beta1, self.beta2))


@dataclass
class VoterState:
    types: np.ndarray  # int8 per vertex, values 1 or 2
    time: float = 0.0

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.types == TYPE1))

    def host_counts(self, N: int) -> np.ndarray:
        return (self.types == TYPE1).reshape(-1, N).sum(axis=1).astype(np.int64)

    @classmethod
    def product(cls, g: HostGraph, theta: float, rng) -> "VoterState":
        """Independent coin per vertex: type 1 with probability theta."""
        u = as_generator(rng).random(g.n_vertices)
        return cls(np.where(u < theta, TYPE1, TYPE2).astype(np.int8))

    @classmethod
    def uniform(cls, g: HostGraph, kind: int) -> "VoterState":
        return cls(np.full(g.n_vertices, kind, dtype=np.int8))


@dataclass(frozen=True)
class LocalFreqs:
    f1: Fraction
    f2: Fraction
    g1: Fraction
    g2: Fraction


@dataclass(frozen=True)
class SelectionDiagnostics:
    qminus: Fraction
    qplus: Fraction
    c: Fraction


@dataclass
class VoterRun:
    state: VoterState
    trajectory: np.ndarray  # rows (t, n1, disagreement)
    pairs_sampled: int
    stop: str


@dataclass
class ThresholdRun:
    state: VoterState
    trajectory: np.ndarray  # rows (t, n1)
    log: EventLog


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _host_counts(types, N):
    H = types.shape[0] // N
    hc = np.zeros(H, dtype=np.int64)
    for v in range(types.shape[0]):
        if types[v] == 1:
            hc[v // N] += 1
    return hc


@njit(cache=True)
def _disagreement(indptr, indices, hc, N):
    """Mean of 1{type(x) != type(y)} over ordered vertex pairs in adjacent hosts."""
    num = 0.0
    edges = 0
    for X in range(hc.shape[0]):
        for j in range(indptr[X], indptr[X + 1]):
            Y = indices[j]
            num += hc[X] * (N - hc[Y]) + (N - hc[X]) * hc[Y]
            edges += 1
    return num / (N * N * edges), edges * N * N


@njit(cache=True)
def _voter_run(indptr, indices, N, a1, a2, b1, b2, types, theta, t_end, sample_times, stop_high, seed):
    np.random.seed(seed)
    V = types.shape[0]
    if theta >= 0.0:
        for v in range(V):
            types[v] = 1 if np.random.random() < theta else 2
    hc = _host_counts(types, N)
    n1 = hc.sum()
    S = sample_times.shape[0]
    traj = np.zeros((S, 3))
    t = 0.0
    k = 0
    reason = 0
    while True:
        if n1 == 0 or n1 == V:
            t_next = np.inf
        else:
            t_next = t + np.random.exponential(1.0 / V)
        while k < S and sample_times[k] < t_next and sample_times[k] <= t_end:
            traj[k, 0] = sample_times[k]
            traj[k, 1] = n1
            traj[k, 2] = _disagreement(indptr, indices, hc, N)[0]
            k += 1
        if t_next > t_end:
            if n1 == 0:
                reason = 1
            elif n1 == V:
                reason = 3
            break
        t = t_next
        v = np.random.randint(0, V)
        X = v // N
        s = 0
        for j in range(indptr[X], indptr[X + 1]):
            s += hc[indices[j]]
        f1 = hc[X] / N
        g1 = s / (N * (indptr[X + 1] - indptr[X]))
        num = a1 * f1 + b1 * g1
        den = num + a2 * (1.0 - f1) + b2 * (1.0 - g1)
        new = 1 if np.random.random() * den < num else 2
        if new != types[v]:
            if new == 1:
                hc[X] += 1
                n1 += 1
            else:
                hc[X] -= 1
                n1 -= 1
            types[v] = new
        if stop_high > 0 and n1 >= stop_high:
            reason = 2
            break
    return traj[:k], t, reason


@njit(cache=True, parallel=True)
def _voter_many(indptr, indices, N, a1, a2, b1, b2, init, theta, t_end, stop_high, watch, seeds):
    R = seeds.shape[0]
    n1 = np.zeros(R, dtype=np.int64)
    reason = np.zeros(R, dtype=np.int64)
    tstop = np.zeros(R)
    watched = np.zeros((R, watch.shape[0]), dtype=np.int8)
    nosamples = np.zeros(0)
    for r in prange(R):
        types = init.copy()
        _, t, why = _voter_run(indptr, indices, N, a1, a2, b1, b2, types, theta, t_end, nosamples, stop_high, seeds[r])
        n1[r] = np.count_nonzero(types == 1)
        reason[r] = why
        tstop[r] = t
        for w in range(watch.shape[0]):
            watched[r, w] = types[watch[w]]
    return n1, reason, tstop, watched


@njit(cache=True)
def _logged_run(indptr, indices, N, mode, prob, types, t_end, sample_times, cap, seed):
    """Harris construction with full event recording.

    mode 0 (neutral): w.p. ``prob`` copy a uniform slot of the own host, else a
    uniform slot of a uniform adjacent host.  mode 1 (threshold): w.p. ``prob``
    copy a uniform adjacent-host slot, else become 1 iff some adjacent-host
    slot is 1.
    """
    np.random.seed(seed)
    V = types.shape[0]
    hc = _host_counts(types, N)
    n1 = hc.sum()
    ev_v = np.empty(cap, dtype=np.uint32)
    ev_t = np.empty(cap)
    ev_k = np.empty(cap, dtype=np.uint8)
    ev_a = np.empty(cap, dtype=np.uint32)
    S = sample_times.shape[0]
    traj = np.zeros((S, 2))
    t = 0.0
    k = 0
    m = 0
    overflow = False
    while True:
        t_next = t + np.random.exponential(1.0 / V)
        while k < S and sample_times[k] < t_next and sample_times[k] <= t_end:
            traj[k, 0] = sample_times[k]
            traj[k, 1] = n1
            k += 1
        if t_next > t_end:
            break
        if m >= cap:
            overflow = True
            break
        t = t_next
        v = np.random.randint(0, V)
        X = v // N
        u = np.random.random()
        start = indptr[X]
        deg = indptr[X + 1] - start
        if mode == 0:
            if u < prob:
                kind = 0
                src = X * N + np.random.randint(0, N)
            else:
                kind = 1
                src = indices[start + np.random.randint(0, deg)] * N + np.random.randint(0, N)
            new = types[src]
        else:
            if u < prob:
                kind = 1
                src = indices[start + np.random.randint(0, deg)] * N + np.random.randint(0, N)
                new = types[src]
            else:
                kind = 2
                src = 0
                s = 0
                for j in range(start, start + deg):
                    s += hc[indices[j]]
                new = 1 if s > 0 else 2
        ev_v[m] = v
        ev_t[m] = t
        ev_k[m] = kind
        ev_a[m] = src
        m += 1
        if new != types[v]:
            if new == 1:
                hc[X] += 1
                n1 += 1
            else:
                hc[X] -= 1
                n1 -= 1
            types[v] = new
    return traj[:k], ev_v[:m], ev_t[:m], ev_k[:m], ev_a[:m], overflow


# ---------------------------------------------------------------- simulation API


def local_freqs(g: HostGraph, N: int, state: VoterState, x: int) -> LocalFreqs:
    X = x // N
    own = int(np.count_nonzero(state.types[X * N : (X + 1) * N] == TYPE1))
    nb = g.neighbors(X)
    other = sum(int(np.count_nonzero(state.types[Y * N : (Y + 1) * N] == TYPE1)) for Y in nb)
    f1 = Fraction(own, N)
    g1 = Fraction(other, N * len(nb))
    return LocalFreqs(f1, 1 - f1, g1, 1 - g1)


def flip_probability(params: VoterParams, fr: LocalFreqs) -> Fraction:
    a1, a2, b1, b2 = params.exact()
    num = a1 * fr.f1 + b1 * fr.g1
    den = num + a2 * fr.f2 + b2 * fr.g2
    if den == 0:
        raise ValueError("degenerate parameters")
    return num / den


def flip(g: HostGraph, N: int, params: VoterParams, state: VoterState, x: int, rng) -> VoterState:
    """Resample the type of vertex x once."""
    prob = flip_probability(params, local_freqs(g, N, state, x))
    types = state.types.copy()
    types[x] = TYPE1 if as_generator(rng).random() < prob else TYPE2
    return VoterState(types, state.time)


def _check_theta(theta):
    if not 0.0 <= theta <= 1.0:
        raise ValueError("initial density must lie in [0, 1]")


def run_voter(g: HostGraph, N: int, params: VoterParams, theta: float | None, t_end: float, rng,
              sample_times=None, init: VoterState | None = None, stop_at: int = 0) -> VoterRun:
    """Simulate until ``t_end``, consensus, or ``n1 >= stop_at`` when ``stop_at > 0``.

    Either ``theta`` (product initial law drawn inside the kernel) or ``init`` must be given.
    """
    if init is None:
        if theta is None:
            raise ValueError("need theta or init")
        _check_theta(theta)
        types = np.zeros(g.n_vertices, dtype=np.int8)
        th = float(theta)
    else:
        types = np.array(init.types, dtype=np.int8, copy=True)
        th = -1.0
    times = np.array([0.0, t_end]) if sample_times is None else np.asarray(sample_times, dtype=float)
    traj, t, reason = _voter_run(
        g.indptr, g.indices, N, float(params.alpha1), float(params.alpha2), float(params.beta1),
        float(params.beta2), types, th, float(t_end), times, int(stop_at), as_kernel_seed(rng),
    )
    pairs = int(g.indptr[-1]) * N * N
    final_t = t if reason == STOP_TARGET else float(t_end)
    return VoterRun(VoterState(types, final_t), traj, pairs, STOP_NAMES[reason])


def run_voter_replicas(g: HostGraph, N: int, params: VoterParams, theta: float | None, t_end: float,
                       replicas: int, master_seed: int, init: VoterState | None = None, stop_at: int = 0,
                       watch=None, tag: str = "voter"):
    """Independent replicas on streams (master_seed, tag, r).

    Returns ``(final n1, stop reason codes, stop times, watched types (R, |watch|))``.
    """
    if init is None:
        _check_theta(theta)
        types, th = np.zeros(g.n_vertices, dtype=np.int8), float(theta)
    else:
        types, th = np.asarray(init.types, dtype=np.int8), -1.0
    watch = np.zeros(0, dtype=np.int64) if watch is None else np.asarray(watch, dtype=np.int64)
    return _voter_many(
        g.indptr, g.indices, N, float(params.alpha1), float(params.alpha2), float(params.beta1),
        float(params.beta2), types, th, float(t_end), int(stop_at), watch, kernel_seeds(master_seed, tag, replicas),
    )


def _logged(g, N, mode, prob, init, t_end, rng, sample_times):
    types = np.array(init.types, dtype=np.int8, copy=True)
    times = np.array([0.0, t_end]) if sample_times is None else np.asarray(sample_times, dtype=float)
    V = g.n_vertices
    cap = int(V * t_end + 8 * np.sqrt(V * t_end + 1) + 64)
    seed = as_kernel_seed(rng)
    while True:
        work = types.copy()
        traj, ev_v, ev_t, ev_k, ev_a, overflow = _logged_run(
            g.indptr, g.indices, N, mode, float(prob), work, float(t_end), times, cap, seed
        )
        if not overflow:
            break
        cap *= 2
    log = EventLog.from_arrays(ev_v, ev_t, ev_k, ev_a, V, float(t_end))
    return ThresholdRun(VoterState(work, float(t_end)), traj, log)


def run_neutral_logged(g: HostGraph, N: int, alpha: float, beta: float, init: VoterState, t_end: float, rng,
                       sample_times=None) -> ThresholdRun:
    """Neutral dynamics via copy arrows, with every arrow recorded."""
    if alpha < 0 or beta <= 0:
        raise ValueError("need alpha >= 0 and beta > 0")
    return _logged(g, N, 0, alpha / (alpha + beta), init, t_end, rng, sample_times)


def threshold_jump_probability(d: int, N: int, beta2: float, kappa: float) -> float:
    gamma = kappa / (2 * d * N)
    return beta2 / (beta2 + gamma)


def run_threshold(g: HostGraph, N: int, beta2: float, kappa: float, init: VoterState, t_end: float, rng,
                  sample_times=None) -> ThresholdRun:
    """Threshold process: copy a uniform adjacent-host slot w.p. p, else branch."""
    require_full_lattice(g)
    if kappa <= 0:
        raise ValueError("kappa = beta1 - beta2 must be > 0")
    if beta2 < 0:
        raise ValueError("beta2 must be >= 0")
    return _logged(g, N, 1, threshold_jump_probability(g.d, N, beta2, kappa), init, t_end, rng, sample_times)


# ---------------------------------------------------------------- selection diagnostics


def require_full_lattice(g: HostGraph) -> None:
    if not g.is_full_lattice or np.any(g.degree != 2 * g.d):
        raise ValueError("selection analysis requires the full lattice (p = 1, L >= 3)")


def _pq_parts(g, N, params, xi, X):
    a1, a2, b1, b2 = params.exact()
    d2 = 2 * g.d
    own = int(xi[X])
    nb = int(sum(int(xi[Y]) for Y in g.neighbors(X)))
    num = d2 * a1 * own + b1 * nb
    den_p = num + d2 * a2 * (N - own) + b2 * (d2 * N - nb)
    den_q = d2 * N * (a1 + b1)
    return num, den_p, den_q


def pt_qt(g: HostGraph, N: int, params: VoterParams, xi, X: int) -> tuple[Fraction, Fraction, bool]:
    """Exact ``(p, q, flagged)`` at host X; ``flagged`` marks the zero-denominator convention p = 0."""
    require_full_lattice(g)
    num, den_p, den_q = _pq_parts(g, N, params, xi, X)
    if den_q == 0:
        raise ValueError("alpha1 + beta1 must be > 0")
    if den_p == 0:
        return Fraction(0), num / den_q, True
    return num / den_p, num / den_q, False


def pt_qt_all(g: HostGraph, N: int, params: VoterParams, xi) -> tuple[list, list]:
    require_full_lattice(g)
    ps, qs = [], []
    for X in range(g.n_hosts):
        num, den_p, den_q = _pq_parts(g, N, params, xi, X)
        ps.append(Fraction(0) if den_p == 0 else num / den_p)
        qs.append(num / den_q)
    return ps, qs


def pt_qt_float(g: HostGraph, N: int, params: VoterParams, xi) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised floating-point p and q at every host."""
    require_full_lattice(g)
    xi = np.asarray(xi, dtype=float)
    d2 = 2 * g.d
    nb = np.add.reduceat(xi[g.indices], g.indptr[:-1])
    num = d2 * params.alpha1 * xi + params.beta1 * nb
    den_p = num + d2 * params.alpha2 * (N - xi) + params.beta2 * (d2 * N - nb)
    p = np.divide(num, den_p, out=np.zeros_like(num), where=den_p > 0)
    return p, num / (d2 * N * (params.alpha1 + params.beta1))


def q_bounds(d: int, N: int, params: VoterParams) -> SelectionDiagnostics:
    a1, _, b1, b2 = params.exact()
    if a1 + b1 <= 0:
        raise ValueError("alpha1 + beta1 must be > 0")
    den = 2 * d * N * (a1 + b1)
    values = {(2 * d * a1 * a + b1 * b) / den for a in range(N + 1) for b in range(2 * d * N + 1)}
    inside = [q for q in values if 0 < q < 1]
    if not inside:
        raise ValueError("no q value in (0, 1)")
    return SelectionDiagnostics(min(inside), max(inside), (b1 - b2) / den)


def frequency_identity_check(g: HostGraph, N: int, params: VoterParams, xi, exact: bool = False) -> float:
    """|sum(xi)/N - sum(q)|; exact rationals when ``exact`` is set."""
    if exact:
        _, qs = pt_qt_all(g, N, params, xi)
        return float(abs(Fraction(int(np.sum(xi)), N) - sum(qs)))
    _, q = pt_qt_float(g, N, params, xi)
    return float(abs(np.sum(xi) / N - q.sum()))


@dataclass(frozen=True)
class SiteClasses:
    bad: np.ndarray
    good: np.ndarray


def classify_sites(g: HostGraph, N: int, xi, params: VoterParams | None = None) -> SiteClasses:
    """Bad: q in (0,1) and every neighbour full.  Good: q in (0,1) and some neighbour not full.

    Without ``params`` (or when alpha1, beta1 > 0) q lies in (0,1) unless the host and
    all its neighbours are simultaneously empty or simultaneously full.  With
    ``params`` given, q is evaluated exactly, which matters when alpha1 or beta1 is 0.
    """
    require_full_lattice(g)
    xi = np.asarray(xi)
    nb_min = np.minimum.reduceat(xi[g.indices], g.indptr[:-1])
    if params is None or (params.alpha1 > 0 and params.beta1 > 0):
        nb_max = np.maximum.reduceat(xi[g.indices], g.indptr[:-1])
        all_zero = (xi == 0) & (nb_max == 0)
        all_full = (xi == N) & (nb_min == N)
        mixed = ~(all_zero | all_full)
    else:
        _, qs = pt_qt_all(g, N, params, xi)
        mixed = np.array([0 < q < 1 for q in qs], dtype=bool)
    nb_full = nb_min == N
    bad, good = np.flatnonzero(mixed & nb_full), np.flatnonzero(mixed & ~nb_full)
    if len(bad) > len(good):
        raise AssertionError("more bad sites than good sites")
    return SiteClasses(bad, good)


@dataclass(frozen=True)
class DriftReport:
    p_ge_q: bool
    good_ge_scaled_q: bool
    pair_bound: bool
    chained: bool
    up_rate: Fraction
    down_rate: Fraction
    factor: Fraction


def drift_check(g: HostGraph, N: int, params: VoterParams, xi) -> DriftReport:
    """Exact check of the pointwise, pairwise and summed drift inequalities for one configuration.

    The summed (chained) inequality needs alpha1 > 0: with alpha1 = 0 a type-1
    host whose neighbours hold no type 1 has p = 0 and loses symbionts at full rate.
    """
    if params.alpha1 < params.alpha2 or params.beta1 <= params.beta2:
        raise ValueError("need alpha1 >= alpha2 and beta1 > beta2")
    ps, qs = pt_qt_all(g, N, params, xi)
    diag = q_bounds(g.d, N, params)
    classes = classify_sites(g, N, xi, params)
    scale = 1 / (1 - diag.c)
    p_ge_q = all(p >= q for p, q in zip(ps, qs))
    good_ok = all(ps[X] >= qs[X] * scale for X in classes.good)
    # q- q(X1) <= q+ q(X2) for every pair with q in (0, 1); extremes suffice
    inside = [q for q in qs if 0 < q < 1]
    pair_ok = not inside or diag.qminus * max(inside) <= diag.qplus * min(inside)
    up = sum(((N - int(xi[X])) * ps[X] for X in range(g.n_hosts)), Fraction(0))
    down = sum((int(xi[X]) * (1 - ps[X]) for X in range(g.n_hosts)), Fraction(0))
    factor = (diag.qminus * scale + diag.qplus) / (diag.qminus + diag.qplus)
    return DriftReport(p_ge_q, good_ok, pair_ok, up >= factor * down, up, down, factor)


def gambler_bound(d: int, N: int, params: VoterParams, K: int) -> float:
    """Lower bound on the probability that type 1 started from K symbionts never dies out."""
    if params.alpha1 < params.alpha2 or params.beta1 <= params.beta2:
        raise ValueError("need alpha1 >= alpha2 and beta1 > beta2")
    diag = q_bounds(d, N, params)
    if diag.c >= 1:
        raise ValueError("drift constant c must be < 1")
    ratio = (diag.qminus + diag.qplus) / (diag.qminus / (1 - diag.c) + diag.qplus)
    return 1.0 - float(ratio) ** K


def threshold_domination_holds(d: int, N: int, alpha1, beta1, beta2) -> bool:
    """Whether, with alpha2 = 0, every local configuration flips to 1 at least as fast as in the threshold process."""
    a1, b1, b2 = Fraction(alpha1), Fraction(beta1), Fraction(beta2)
    kappa = b1 - b2
    if kappa <= 0:
        raise ValueError("need beta1 > beta2")
    gamma = kappa / (2 * d * N)
    for a in range(N + 1):
        f1 = Fraction(a, N)
        for b in range(2 * d * N + 1):
            g1 = Fraction(b, 2 * d * N)
            num = a1 * f1 + b1 * g1
            den = num + b2 * (1 - g1)
            lhs = num / den if den else Fraction(0)
            rhs = (b2 * g1 + gamma) / (b2 + gamma) if b else Fraction(0)
            if lhs < rhs:
                return False
    return True
