"""Oriented site percolation and good-site fields read off invasion runs.

Sites are ``(z, m)`` with ``z + m`` even; ``(z, m)`` has children
``(z - 1, m + 1)`` and ``(z + 1, m + 1)``.  Arrays are indexed ``[m, z]``
with ``z`` in ``0 .. width - 1``; entries of the wrong parity are always False.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .contact import ContactParams, ContactState, run
from .graph import HostGraph
from .rng import RngStream, as_generator


@dataclass(frozen=True)
class OrientedLattice:
    width: int
    height: int
    wet: np.ndarray  # bool (height+1, width)

    @property
    def survived(self) -> bool:
        return bool(self.wet[-1].any())

    def density_by_level(self) -> np.ndarray:
        return self.wet.sum(axis=1) / parity_mask(self.width, self.height).sum(axis=1)


@dataclass(frozen=True)
class GoodSiteField:
    good: np.ndarray  # bool (levels, path length)
    n: float
    K: int


@dataclass(frozen=True)
class ChildBound:
    estimate: float
    ci_low: float
    ci_high: float
    successes: int
    trials: int


def parity_mask(width: int, height: int) -> np.ndarray:
    m = np.arange(height + 1)[:, None]
    z = np.arange(width)[None, :]
    return (z + m) % 2 == 0


def run_oriented(width: int, height: int, q: float, rng) -> OrientedLattice:
    """Independent oriented site percolation with every even site of row 0 wet.

    Site (z, m) is open when its uniform is below q, so runs sharing a seed are monotone in q.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if width < 1 or height < 0:
        raise ValueError("need width >= 1 and height >= 0")
    u = as_generator(rng).random((height + 1, width))
    par = parity_mask(width, height)
    wet = np.zeros((height + 1, width), dtype=bool)
    wet[0] = par[0]
    for m in range(1, height + 1):
        prev = wet[m - 1]
        fed = np.zeros(width, dtype=bool)
        fed[1:] |= prev[:-1]
        fed[:-1] |= prev[1:]
        wet[m] = fed & (u[m] < q) & par[m]
    return OrientedLattice(width, height, wet)


def extract_good_sites(samples: np.ndarray, times: np.ndarray, n: float, levels: int, K: int) -> GoodSiteField:
    """Flag (z, m) good when the host at path position z holds at least K symbionts at time m n.

    ``samples[i, z]`` is the count of the host at path position z at ``times[i]``.
    """
    samples = np.asarray(samples)
    times = np.asarray(times, dtype=float)
    rows = []
    for m in range(levels + 1):
        hit = np.flatnonzero(np.isclose(times, m * n, rtol=0, atol=1e-9))
        if len(hit) == 0:
            raise ValueError(f"missing sample at time {m * n}")
        rows.append(samples[hit[0]])
    occ = np.array(rows)
    good = (occ >= K) & parity_mask(occ.shape[1], levels)
    return GoodSiteField(good, float(n), int(K))


def child_bound(fields) -> ChildBound:
    """Frequency with which both children of a good site are good, pooled over fields."""
    succ = trials = 0
    for f in fields:
        g = f.good
        parent = g[:-1, 1:-1]
        both = g[1:, :-2] & g[1:, 2:]
        trials += int(parent.sum())
        succ += int((parent & both).sum())
    if trials == 0:
        return ChildBound(float("nan"), 0.0, 1.0, 0, 0)
    lo, hi = proportion_confint(succ, trials, alpha=0.05, method="wilson")
    return ChildBound(succ / trials, float(lo), float(hi), succ, trials)


def default_threshold(N: int) -> int:
    return max(1, math.isqrt(N))


def path_hosts(g: HostGraph, sites) -> np.ndarray:
    hosts = np.array([g.host_at(s) for s in sites], dtype=np.int64)
    if np.any(hosts < 0):
        raise ValueError("path leaves the giant cluster")
    return hosts


def good_fields_from_runs(g: HostGraph, N: int, params: ContactParams, hosts, n: float, levels: int, runs: int,
                          master_seed: int, K: int | None = None, start: int | None = None) -> list[GoodSiteField]:
    """Invasion runs started from one full host on the path, sampled at times m n along the path."""
    K = default_threshold(N) if K is None else K
    hosts = np.asarray(hosts, dtype=np.int64)
    start = hosts[len(hosts) // 2] if start is None else start
    times = np.arange(levels + 1) * float(n)
    fields = []
    for r in range(runs):
        init = ContactState.single_host(g, int(start), N)
        rep = run(g, N, params, init, float(levels * n), RngStream(master_seed, "blocks", r).kernel_seed(),
                  sample_times=times, watch=hosts)
        watched = np.zeros((len(times), len(hosts)), dtype=np.int64)
        if rep.watched is not None:
            watched[: len(rep.watched)] = rep.watched
        fields.append(extract_good_sites(watched, times, n, levels, K))
    return fields


def scan_block_time(g: HostGraph, N: int, params: ContactParams, hosts, ns, levels: int, runs: int,
                    master_seed: int, K: int | None = None) -> dict:
    """Child bound for each candidate block time n; the best is the one with the largest lower CI."""
    return {n: child_bound(good_fields_from_runs(g, N, params, hosts, n, levels, runs, master_seed, K)) for n in ns}
