"""The symbiont graph: N slots attached to every site of the giant cluster.

Vertex ``x = (X, i)`` is encoded as ``X * N + i`` so that the host of a vertex
is ``x // N``.  Host adjacency is stored in CSR form; vertex-level edges are
never materialised.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .percolation import ClusterLabels, LatticeSpec, label_clusters, sample_sites


@dataclass(frozen=True)
class GraphSpec:
    N: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")


class VertexId(NamedTuple):
    host: int
    slot: int

    def index(self, N: int) -> int:
        return self.host * N + self.slot

    @classmethod
    def from_index(cls, v: int, N: int) -> "VertexId":
        return cls(v // N, v % N)


@dataclass(frozen=True)
class HostGraph:
    hosts: np.ndarray  # (H, d) lattice coordinates, lexicographic
    indptr: np.ndarray
    indices: np.ndarray
    degree: np.ndarray
    N: int
    L: int
    site_host: np.ndarray  # lattice-shaped: host index or -1

    @property
    def n_hosts(self) -> int:
        return len(self.hosts)

    @property
    def n_vertices(self) -> int:
        return self.n_hosts * self.N

    @property
    def d(self) -> int:
        return self.hosts.shape[1]

    @property
    def is_full_lattice(self) -> bool:
        return self.n_hosts == self.L**self.d

    def neighbors(self, host: int) -> np.ndarray:
        return self.indices[self.indptr[host] : self.indptr[host + 1]]

    def host_of(self, v: int) -> int:
        return v // self.N

    def host_at(self, coords) -> int:
        return int(self.site_host[tuple(int(c) % self.L for c in coords)])

    def with_N(self, N: int) -> "HostGraph":
        return HostGraph(self.hosts, self.indptr, self.indices, self.degree, N, self.L, self.site_host)

    def torus_distance(self, a: int, b: int) -> np.ndarray:
        """Per-axis torus displacement |a - b| between two hosts."""
        diff = np.abs(self.hosts[a] - self.hosts[b])
        return np.minimum(diff, self.L - diff)


def build(labels: ClusterLabels, spec: GraphSpec | int = 1) -> HostGraph:
    N = spec.N if isinstance(spec, GraphSpec) else GraphSpec(int(spec)).N
    mask = labels.giant_mask
    if not mask.any():
        raise ValueError("empty giant cluster")
    lat = labels.field.spec
    hosts = np.argwhere(mask)
    H = len(hosts)
    if H < 2:
        raise ValueError("giant cluster has a single site; transmission is undefined")
    site_host = np.full(mask.shape, -1, dtype=np.int64)
    site_host[tuple(hosts.T)] = np.arange(H)

    rows, cols = [], []
    for axis in range(lat.d):
        for step in (-1, 1):
            nb = hosts.copy()
            nb[:, axis] += step
            if lat.torus:
                nb[:, axis] %= lat.L
                valid = np.ones(H, dtype=bool)
            else:
                valid = (nb[:, axis] >= 0) & (nb[:, axis] < lat.L)
                nb[:, axis] = np.clip(nb[:, axis], 0, lat.L - 1)
            idx = site_host[tuple(nb.T)]
            valid &= idx >= 0
            rows.append(np.flatnonzero(valid))
            cols.append(idx[valid])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    keys = np.unique(rows * H + cols)  # dedupes the L=2 double neighbour
    rows, cols = keys // H, keys % H
    degree = np.bincount(rows, minlength=H)
    indptr = np.concatenate([[0], np.cumsum(degree)]).astype(np.int64)
    return HostGraph(hosts, indptr, cols.astype(np.int64), degree.astype(np.int64), N, lat.L, site_host)


def build_lattice(d: int, L: int, p: float = 1.0, seed: int = 0, N: int = 1) -> HostGraph:
    """Convenience: sample, label and build in one call."""
    labels = label_clusters(sample_sites(LatticeSpec(d, L, p, seed)))
    return build(labels, N)


def vertical_neighbors(g: HostGraph, x: int) -> np.ndarray:
    host = x // g.N
    return np.arange(host * g.N, (host + 1) * g.N)


def horizontal_neighbors(g: HostGraph, x: int) -> np.ndarray:
    nbrs = g.neighbors(x // g.N)
    return (nbrs[:, None] * g.N + np.arange(g.N)[None, :]).ravel()


def dump_adjacency(g: HostGraph) -> str:
    lines = []
    for h in range(g.n_hosts):
        coords = " ".join(str(c) for c in g.hosts[h])
        nbrs = " ".join(str(j) for j in g.neighbors(h))
        lines.append(f"{h} {coords} : {nbrs}")
    return "\n".join(lines) + "\n"
