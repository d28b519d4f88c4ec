"""Branching random walks on Z^d, their path-count expectation series and the lazy walk.

Each particle dies at rate 1, gives birth on its own site at rate
``alpha_bar`` and on each of the 2d neighbours at rate ``beta_bar``.  The
truncated walk only allows a birth onto a site currently holding at most
``M`` particles, which caps site counts at ``M + 1``.

Simulation happens on a finite box ``[-R, R]^d`` with absorbing boundary;
births that would land outside are counted as leaked mass.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit, prange
from scipy.special import gammainc, gammaln
from scipy.stats import poisson

from .rng import as_kernel_seed, kernel_seeds

# refuse path-count tables with more entries than this
MAX_TABLE_ENTRIES = 50_000_000


@dataclass(frozen=True)
class BRWParams:
    alpha_bar: float
    beta_bar: float
    delta: float = 0.0
    M: int | None = None

    def __post_init__(self):
        if self.alpha_bar < 0 or self.beta_bar < 0:
            raise ValueError("rates must be nonnegative")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must lie in [0, 1)")
        if self.M is not None and self.M < 0:
            raise ValueError("M must be >= 0")

    @classmethod
    def from_contact(cls, alpha: float, beta: float, d: int, delta: float = 0.0, M: int | None = None) -> "BRWParams":
        """Thinned rates dominated by the invasion model when N >= M / delta."""
        return cls((1 - delta) * alpha, (1 - delta) * beta / (2 * d), delta, M)

    def growth(self, d: int) -> float:
        """Offspring rate per particle, alpha_bar + 2d beta_bar."""
        return self.alpha_bar + 2 * d * self.beta_bar


@dataclass
class BRWState:
    counts: np.ndarray  # box of shape (2R+1,)*d, origin at the centre
    time: float = 0.0

    @property
    def radius(self) -> int:
        return self.counts.shape[0] // 2

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def single(cls, d: int, radius: int, k: int = 1) -> "BRWState":
        counts = np.zeros((2 * radius + 1,) * d, dtype=np.int64)
        counts[(radius,) * d] = k
        return cls(counts)


@dataclass
class BRWRun:
    times: np.ndarray
    totals: np.ndarray
    max_site_count: np.ndarray  # at each sample time
    max_site_count_ever: int
    leaked: int
    final: BRWState
    capped: bool = False


class SeriesValue(NamedTuple):
    value: float
    tail: float
    n_max: int


# ---------------------------------------------------------------- simulation


@njit(cache=True)
def _brw_run(counts_flat, W, d, a_bar, b_bar, truncated, M, t_end, sample_times, cap, seed):
    np.random.seed(seed)
    stride = np.empty(d, dtype=np.int64)
    s = 1
    for a in range(d - 1, -1, -1):
        stride[a] = s
        s *= W
    owner = np.empty(cap, dtype=np.int64)
    total = 0
    maxc = 0
    for i in range(counts_flat.shape[0]):
        c = counts_flat[i]
        if c > maxc:
            maxc = c
        for _ in range(c):
            owner[total] = i
            total += 1
    S = sample_times.shape[0]
    tot_out = np.zeros(S, dtype=np.int64)
    max_out = np.zeros(S, dtype=np.int64)
    rate_sum = 1.0 + a_bar + 2 * d * b_bar
    t = 0.0
    k = 0
    leaked = 0
    capped = False
    while True:
        if total > 0:
            t_next = t + np.random.exponential(1.0 / (total * rate_sum))
        else:
            t_next = np.inf
        while k < S and sample_times[k] < t_next and sample_times[k] <= t_end:
            tot_out[k] = total
            max_out[k] = counts_flat.max()
            k += 1
        if t_next > t_end:
            break
        t = t_next
        i = np.random.randint(0, total)
        x = owner[i]
        u = np.random.random() * rate_sum
        if u < 1.0:
            counts_flat[x] -= 1
            owner[i] = owner[total - 1]
            total -= 1
            continue
        if u < 1.0 + a_bar:
            y = x
        else:
            r = np.random.randint(0, 2 * d)
            axis = r // 2
            step = 1 if r % 2 == 0 else -1
            c = (x // stride[axis]) % W + step
            if c < 0 or c >= W:
                leaked += 1
                continue
            y = x + step * stride[axis]
        if truncated and counts_flat[y] > M:
            continue
        if total >= cap:
            capped = True
            break
        counts_flat[y] += 1
        owner[total] = y
        total += 1
        if counts_flat[y] > maxc:
            maxc = counts_flat[y]
    return tot_out[:k], max_out[:k], maxc, leaked, capped, t


@njit(cache=True, parallel=True)
def _brw_many(init_flat, W, d, a_bar, b_bar, truncated, M, t_end, sample_times, cap, seeds):
    R = seeds.shape[0]
    S = sample_times.shape[0]
    totals = np.zeros((R, S), dtype=np.int64)
    finals = np.zeros((R, init_flat.shape[0]), dtype=np.int64)
    leaked = np.zeros(R, dtype=np.int64)
    maxc = np.zeros(R, dtype=np.int64)
    capped = np.zeros(R, dtype=np.bool_)
    for r in prange(R):
        counts = init_flat.copy()
        tot, _, mc, lk, cp, _ = _brw_run(counts, W, d, a_bar, b_bar, truncated, M, t_end, sample_times, cap, seeds[r])
        totals[r, : tot.shape[0]] = tot
        finals[r] = counts
        leaked[r] = lk
        maxc[r] = mc
        capped[r] = cp
    return totals, finals, leaked, maxc, capped


def leak_bound(params: BRWParams, d: int, radius: int, mass: int, t: float) -> float:
    """Upper bound on the expected number of particles ever leaving the box."""
    s = params.growth(d)
    return mass * math.exp(max(s - 1.0, 0.0) * t) * float(poisson.sf(radius, 2 * d * params.beta_bar * t))


def _prepare(params, init, truncated, t_end):
    counts = np.array(init.counts if isinstance(init, BRWState) else init, dtype=np.int64, copy=True)
    d = counts.ndim
    W = counts.shape[0]
    if any(w != W for w in counts.shape) or W % 2 == 0:
        raise ValueError("box must be a cube of odd side")
    if truncated and params.M is None:
        raise ValueError("truncated walk needs M")
    nz = np.argwhere(counts > 0)
    r_eff = W // 2 - (int(np.abs(nz - W // 2).max()) if len(nz) else 0)
    if leak_bound(params, d, r_eff, int(counts.sum()), t_end) > 1e-2:
        warnings.warn("box may be too small: expected leaked mass exceeds 1e-2", RuntimeWarning, stacklevel=3)
    return counts, d, W


def run_brw(params: BRWParams, init, t_end: float, rng, truncated: bool = False, sample_times=None,
            cap: int = 2_000_000) -> BRWRun:
    counts, d, W = _prepare(params, init, truncated, t_end)
    times = np.array([0.0, t_end]) if sample_times is None else np.asarray(sample_times, dtype=float)
    flat = counts.ravel()
    M = -1 if params.M is None else int(params.M)
    tot, mx, maxc, leaked, capped, t_last = _brw_run(
        flat, W, d, float(params.alpha_bar), float(params.beta_bar), truncated, M, float(t_end), times, cap,
        as_kernel_seed(rng),
    )
    if capped:
        warnings.warn("particle cap reached; run stopped early", RuntimeWarning, stacklevel=2)
    final = BRWState(flat.reshape(counts.shape), float(t_end))
    return BRWRun(times[: len(tot)], tot, mx, int(maxc), int(leaked), final, bool(capped))


def run_brw_replicas(params: BRWParams, init, t_end: float, replicas: int, master_seed: int,
                     truncated: bool = False, sample_times=None, cap: int = 2_000_000):
    """Replica r uses stream (master_seed, 'brw', r).

    Returns ``(totals (R, S), final counts (R, box), leaked (R,), max site count (R,), capped (R,))``.
    """
    counts, d, W = _prepare(params, init, truncated, t_end)
    times = np.array([0.0, t_end]) if sample_times is None else np.asarray(sample_times, dtype=float)
    M = -1 if params.M is None else int(params.M)
    totals, finals, leaked, maxc, capped = _brw_many(
        counts.ravel(), W, d, float(params.alpha_bar), float(params.beta_bar), truncated, M, float(t_end),
        times, cap, kernel_seeds(master_seed, "brw", replicas),
    )
    return totals, finals.reshape((replicas,) + counts.shape), leaked, maxc, capped


# ---------------------------------------------------------------- path counts


@dataclass(frozen=True)
class PathCountTable:
    """``mu[n][k]`` is a box of shape (2R+1,)*d: paths 0 -> X of length n with k holds."""

    d: int
    n_max: int
    radius: int
    mu: list

    def at(self, n: int, k: int, X) -> int:
        if k > n or n > self.n_max:
            return 0
        idx = tuple(int(x) + self.radius for x in X)
        if any(i < 0 or i > 2 * self.radius for i in idx):
            return 0
        return int(self.mu[n][(k,) + idx])

    def total(self, n: int) -> int:
        return int(sum(int(v) for v in self.mu[n].ravel()))


def _path_dtype(d: int, n_max: int):
    return np.int64 if (2 * d + 1) ** n_max < 2**62 else object


def _shift(a: np.ndarray, axis: int, step: int) -> np.ndarray:
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if step > 0:
        src[axis], dst[axis] = slice(None, -step), slice(step, None)
    else:
        src[axis], dst[axis] = slice(-step, None), slice(None, step)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _path_layers(d: int, n_max: int, radius: int):
    """Yield ``mu[n]`` for n = 0..n_max on a box of the given radius (no wrap)."""
    W = 2 * radius + 1
    if (n_max + 1) * W**d > MAX_TABLE_ENTRIES:
        raise ValueError("path-count table too large; reduce n_max or d")
    dtype = _path_dtype(d, n_max)
    cur = np.zeros((1,) + (W,) * d, dtype=dtype)
    cur[(0,) + (radius,) * d] = 1
    yield cur
    for n in range(1, n_max + 1):
        nxt = np.zeros((n + 1,) + (W,) * d, dtype=dtype)
        nxt[1:] += cur  # hold
        for axis in range(1, d + 1):
            for step in (-1, 1):
                nxt[:n] += _shift(cur, axis, step)
        cur = nxt
        yield cur


def count_paths(d: int, n_max: int, box: int | None = None) -> PathCountTable:
    """Exact counts of lazy nearest-neighbour paths from the origin, by loops and endpoint."""
    if d < 1 or n_max < 0:
        raise ValueError("need d >= 1 and n_max >= 0")
    radius = n_max if box is None else max(box, n_max)
    layers = list(_path_layers(d, n_max, radius))
    if box is not None and box < radius:
        cut = (slice(None),) + (slice(radius - box, radius + box + 1),) * d
        layers = [m[cut] for m in layers]
        radius = box
    return PathCountTable(d, n_max, radius, layers)


def series_tail(params: BRWParams, d: int, t: float, n_max: int) -> float:
    """Exact bound on the omitted terms: e^{(s-1)t} P(Poisson(st) > n_max)."""
    s = params.growth(d)
    if s == 0:
        return 0.0
    return math.exp((s - 1.0) * t) * float(gammainc(n_max + 1, s * t))


def expected_occupancy(params: BRWParams, t: float, X, n_max: int, tol: float = 1e-9) -> SeriesValue:
    """Mean number of particles at X at time t, starting from one particle at 0."""
    X = tuple(int(x) for x in X)
    d = len(X)
    tail = series_tail(params, d, t, n_max)
    if tail > tol:
        raise ValueError(f"increase n_max: tail bound {tail:.3g} exceeds {tol:.3g}")
    reach = sum(abs(x) for x in X)
    if reach > n_max:
        return SeriesValue(0.0, tail, n_max)
    radius = n_max  # no path of length <= n_max leaves this box
    idx = tuple(x + radius for x in X)
    a, b = params.alpha_bar, params.beta_bar
    value = 0.0
    for n, layer in enumerate(_path_layers(d, n_max, radius)):
        if n < reach:
            continue
        counts = layer[(slice(None),) + idx]
        weight = sum(float(int(counts[k])) * a**k * b ** (n - k) for k in range(n + 1) if counts[k])
        if weight == 0.0 or t == 0.0:
            if t == 0.0 and n == 0:
                value += weight
            continue
        value += weight * math.exp(n * math.log(t) - gammaln(n + 1) - t)
    return SeriesValue(value, tail, n_max)


def lazy_walk_step_prob(params: BRWParams, n: int, X) -> float:
    """P(U_n = X) for the walk holding w.p. alpha_bar/s and moving to each neighbour w.p. beta_bar/s."""
    X = tuple(int(x) for x in X)
    d = len(X)
    s = params.growth(d)
    if s == 0:
        raise ValueError("walk undefined when alpha_bar + 2d beta_bar = 0")
    if sum(abs(x) for x in X) > n:
        return 0.0
    W = 2 * n + 1
    p = np.zeros((W,) * d)
    p[(n,) * d] = 1.0
    hold, move = params.alpha_bar / s, params.beta_bar / s
    for _ in range(n):
        q = hold * p
        for axis in range(d):
            for step in (-1, 1):
                q += move * _shift(p, axis, step)
        p = q
    return float(p[tuple(x + n for x in X)])


def truncation_dominated(chi: float, delta: float, M: int, N: int) -> bool:
    """Whether chi (1 - j/N) >= chi (1 - delta) 1{j <= M} for every occupancy j in 0..N."""
    return all(chi * (1 - j / N) >= chi * (1 - delta) * (j <= M) - 1e-15 for j in range(N + 1))
