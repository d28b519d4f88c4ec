"""Random walks on the host graph: exact heat kernels, collision counts and the
two-walk chain.

The continuous-time walk jumps at rate 1 to a uniform neighbour, so its
transition kernel is ``exp(t (J - I))`` with ``J = D^-1 A`` and is reversible
with respect to the degree.  The lazy walk has matrix ``(I + J) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit, prange
from scipy.integrate import simpson
from scipy.special import gammaln
from scipy.stats import binom, poisson

from .graph import HostGraph
from .rng import as_kernel_seed, kernel_seeds

CONTINUOUS, LAZY = "continuous", "lazy"


@dataclass(frozen=True)
class WalkKernel:
    g: HostGraph
    mode: str
    jump: sp.csr_matrix  # D^-1 A

    @classmethod
    def build(cls, g: HostGraph, mode: str = LAZY) -> "WalkKernel":
        if mode not in (CONTINUOUS, LAZY):
            raise ValueError(f"unknown walk mode {mode!r}")
        H = g.n_hosts
        rows = np.repeat(np.arange(H), g.degree)
        vals = 1.0 / g.degree[rows]
        return cls(g, mode, sp.csr_matrix((vals, (rows, g.indices)), shape=(H, H)))

    @property
    def matrix(self) -> sp.csr_matrix:
        """Lazy step matrix, or the generator J - I in continuous mode."""
        eye = sp.identity(self.g.n_hosts, format="csr")
        return (0.5 * (eye + self.jump)).tocsr() if self.mode == LAZY else (self.jump - eye).tocsr()

    def site(self, A) -> int:
        if np.ndim(A) == 0:
            a = int(A)
            if not 0 <= a < self.g.n_hosts:
                raise ValueError("site not in the giant cluster")
            return a
        h = self.g.host_at(A)
        if h < 0:
            raise ValueError("site not in the giant cluster")
        return h


@dataclass(frozen=True)
class CollisionEstimate:
    horizons: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    replicas: int


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    second_moment: float
    paley_zygmund: float
    stderr: float
    replicas: int


def _check_rows(v: np.ndarray, tol: float = 1e-12) -> None:
    if abs(v.sum() - 1.0) > tol:
        raise FloatingPointError(f"probability mass drifted to {v.sum()!r}")


def _uniformize(v: np.ndarray, jump_T: sp.csr_matrix, t: float, tol: float = 1e-14) -> np.ndarray:
    """v exp(t (J - I)) for a row vector v, with Poisson weights truncated at tail < tol."""
    if t == 0:
        return v.copy()
    n_max = int(poisson.isf(tol, t)) + 2
    logw = -t + np.arange(n_max + 1) * math.log(t) - gammaln(np.arange(n_max + 1) + 1)
    out = math.exp(logw[0]) * v
    term = v
    for n in range(1, n_max + 1):
        term = jump_T @ term
        out = out + math.exp(logw[n]) * term
    return out


def heat_kernel(kernel: WalkKernel, A, steps_or_time) -> np.ndarray:
    """Distribution over hosts after ``steps`` lazy steps or continuous time ``t`` from A."""
    a = kernel.site(A)
    v = np.zeros(kernel.g.n_hosts)
    v[a] = 1.0
    jump_T = kernel.jump.T.tocsr()
    if kernel.mode == LAZY:
        n = int(steps_or_time)
        if n < 0:
            raise ValueError("steps must be >= 0")
        for _ in range(n):
            v = 0.5 * (v + jump_T @ v)
            _check_rows(v)
        return v
    t = float(steps_or_time)
    if t < 0:
        raise ValueError("time must be >= 0")
    v = _uniformize(v, jump_T, t)
    _check_rows(v)
    return v


def lazy_kernel_rows(kernel: WalkKernel, A, n: int) -> np.ndarray:
    """Array of shape (n+1, hosts): q_j(A, .) for j = 0..n."""
    a = kernel.site(A)
    jump_T = kernel.jump.T.tocsr()
    out = np.zeros((n + 1, kernel.g.n_hosts))
    out[0, a] = 1.0
    for j in range(1, n + 1):
        out[j] = 0.5 * (out[j - 1] + jump_T @ out[j - 1])
    return out


def detailed_balance_residual(kernel: WalkKernel, A, B, steps_or_time) -> float:
    """|deg(A) k(A,B) - deg(B) k(B,A)|."""
    a, b = kernel.site(A), kernel.site(B)
    deg = kernel.g.degree
    kab = heat_kernel(kernel, a, steps_or_time)[b]
    kba = heat_kernel(kernel, b, steps_or_time)[a]
    return float(abs(deg[a] * kab - deg[b] * kba))


def degree_bound_check(kernel: WalkKernel, A, B, t, rtol: float = 1e-12) -> bool:
    """(2d)^-1 k(B,A) <= k(A,B) <= 2d k(B,A), up to relative rounding."""
    a, b = kernel.site(A), kernel.site(B)
    kab = heat_kernel(kernel, a, t)[b]
    kba = heat_kernel(kernel, b, t)[a]
    d2 = 2 * kernel.g.d
    slack = rtol * max(kab, kba)
    return bool(kba / d2 <= kab + slack and kab <= d2 * kba + slack)


# ---------------------------------------------------------------- collisions


@njit(cache=True)
def _collide(indptr, indices, A, B, horizons, seed):
    np.random.seed(seed)
    x, y = A, B
    count = 1 if A == B else 0
    H = horizons.shape[0]
    out = np.zeros(H, dtype=np.int64)
    t = 0.0
    k = 0
    while True:
        t += np.random.exponential(0.5)
        while k < H and horizons[k] < t:
            out[k] = count
            k += 1
        if k >= H:
            break
        if np.random.random() < 0.5:
            s = indptr[x]
            x = indices[s + np.random.randint(0, indptr[x + 1] - s)]
        else:
            s = indptr[y]
            y = indices[s + np.random.randint(0, indptr[y + 1] - s)]
        if x == y:
            count += 1
    return out


@njit(cache=True, parallel=True)
def _collide_many(indptr, indices, A, B, horizons, seeds):
    R = seeds.shape[0]
    out = np.zeros((R, horizons.shape[0]), dtype=np.int64)
    for r in prange(R):
        out[r] = _collide(indptr, indices, A, B, horizons, seeds[r])
    return out


def collision_counts(g: HostGraph, A: int, B: int, horizons, replicas: int, master_seed: int) -> np.ndarray:
    """Per-replica collision counts (R, len(horizons)) of two independent rate-1 walks.

    A collision is a jump after which both walks sit on the same host; starting
    together counts as one collision at time 0.
    """
    horizons = np.sort(np.atleast_1d(np.asarray(horizons, dtype=float)))
    return _collide_many(g.indptr, g.indices, int(A), int(B), horizons, kernel_seeds(master_seed, "collide", replicas))


def collision_count(g: HostGraph, A: int, B: int, T, replicas: int, master_seed: int) -> CollisionEstimate:
    horizons = np.sort(np.atleast_1d(np.asarray(T, dtype=float)))
    counts = collision_counts(g, A, B, horizons, replicas, master_seed)
    se = counts.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.zeros(len(horizons))
    return CollisionEstimate(horizons, counts.mean(axis=0), se, replicas)


def expected_collisions_exact(kernel: WalkKernel, A, B, T: float, dt: float = 0.1) -> float:
    """2 int_0^T sum_X p_t(A,X) p_t(B,X) dt + P(X_T = Y_T), by Simpson quadrature.

    The boundary term comes from counting collisions right after jumps.
    """
    if kernel.mode != CONTINUOUS:
        raise ValueError("needs the continuous-time kernel")
    a, b = kernel.site(A), kernel.site(B)
    jump_T = kernel.jump.T.tocsr()
    steps = max(2, int(round(T / dt)))
    h = T / steps
    pa = np.zeros(kernel.g.n_hosts)
    pb = np.zeros(kernel.g.n_hosts)
    pa[a] = pb[b] = 1.0
    f = np.empty(steps + 1)
    f[0] = pa @ pb
    for i in range(1, steps + 1):
        pa = _uniformize(pa, jump_T, h)
        pb = _uniformize(pb, jump_T, h)
        f[i] = pa @ pb
    return float(2 * simpson(f, dx=h) + f[-1])


# ---------------------------------------------------------------- two-walk chain and moments


def _lazy_move(g, x, rng):
    if rng.random() < 0.5:
        return x
    nb = g.neighbors(x)
    return int(nb[rng.integers(len(nb))])


def two_walk_chain_step(g: HostGraph, W: tuple[int, int], rng) -> tuple[int, int]:
    """Pick one coordinate with probability 1/2 and move it by one lazy step."""
    x, y = W
    if rng.random() < 0.5:
        return _lazy_move(g, x, rng), y
    return x, _lazy_move(g, y, rng)


def F_and_Frho(kernel: WalkKernel, A, B, X, n: int, rho: float) -> tuple[float, float, float]:
    """Binomially mixed products of lazy kernels over all splits j and over the window [rho n, (1-rho) n]."""
    if not 0 < rho < 0.5:
        raise ValueError("rho must lie in (0, 1/2)")
    if kernel.mode != LAZY:
        raise ValueError("needs the lazy kernel")
    x = kernel.site(X)
    qa = lazy_kernel_rows(kernel, A, n)[:, x]
    qb = lazy_kernel_rows(kernel, B, n)[:, x]
    j = np.arange(n + 1)
    terms = binom.pmf(j, n, 0.5) * qa * qb[::-1]
    lo, hi = math.floor(rho * n), math.floor((1 - rho) * n)
    return float(terms.sum()), float(terms[lo : hi + 1].sum()), 2 * math.exp(-2 * n * (0.5 - rho) ** 2)


@njit(cache=True)
def _window_collisions(indptr, indices, hosts, L, A, B, k, seed):
    np.random.seed(seed)
    d = hosts.shape[1]
    x, y = A, B
    count = 0
    for n in range(1, k * k + 1):
        if np.random.random() < 0.5:
            if np.random.random() < 0.5:
                s = indptr[x]
                x = indices[s + np.random.randint(0, indptr[x + 1] - s)]
        else:
            if np.random.random() < 0.5:
                s = indptr[y]
                y = indices[s + np.random.randint(0, indptr[y + 1] - s)]
        if n >= k and x == y:
            da = 0.0
            db = 0.0
            for i in range(d):
                u = abs(hosts[x, i] - hosts[A, i])
                u = min(u, L - u)
                da += u * u
                w = abs(hosts[x, i] - hosts[B, i])
                w = min(w, L - w)
                db += w * w
            if da < n and db < n:
                count += 1
    return count


@njit(cache=True, parallel=True)
def _window_many(indptr, indices, hosts, L, A, B, k, seeds):
    out = np.zeros(seeds.shape[0], dtype=np.int64)
    for r in prange(seeds.shape[0]):
        out[r] = _window_collisions(indptr, indices, hosts, L, A, B, k, seeds[r])
    return out


def window_collisions(g: HostGraph, A: int, B: int, k: int, replicas: int, master_seed: int) -> np.ndarray:
    """Per-replica number of steps n in [k, k^2] at which the two-walk chain sits on one host within distance sqrt(n) of A and B."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return _window_many(g.indptr, g.indices, g.hosts, g.L, int(A), int(B), int(k),
                        kernel_seeds(master_seed, f"window-{k}", replicas))


def collision_moments(g: HostGraph, A: int, B: int, k: int, replicas: int, master_seed: int) -> MomentEstimate:
    c = window_collisions(g, A, B, k, replicas, master_seed).astype(float)
    m1, m2 = c.mean(), (c**2).mean()
    pz = m1**2 / (4 * m2) if m2 > 0 else 0.0
    return MomentEstimate(float(m1), float(m2), float(pz), float(c.std(ddof=1) / math.sqrt(replicas)), replicas)


def envelope_fit(kernel: WalkKernel, A, n: int, min_prob: float = 1e-300) -> tuple[float, float]:
    """Least-squares slope and intercept of log q_n(A, B) against |A - B|^2 / n over reachable B.

    A diagnostic for Gaussian-type decay; it makes no claim about constants.
    """
    if kernel.mode != LAZY:
        raise ValueError("needs the lazy kernel")
    a = kernel.site(A)
    q = heat_kernel(kernel, a, n)
    g = kernel.g
    diff = np.abs(g.hosts - g.hosts[a])
    diff = np.minimum(diff, g.L - diff)
    r2 = (diff**2).sum(axis=1) / n
    mask = q > min_prob
    slope, intercept = np.polyfit(r2[mask], np.log(q[mask]), 1)
    return float(slope), float(intercept)
