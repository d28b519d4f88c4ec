"""Site percolation on a finite d-dimensional torus.

The infinite open cluster is replaced by the largest open cluster of the torus.
Coarse-graining tiles the torus with cubes of side ``2n+1`` centred on
``(2n+1)Z``; an open-cube path spanning direction e1 is expanded into a
self-avoiding site path whose ``n``-neighbourhood is fully open.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

# literature guideline for d=2 site percolation; informational only
P_C_SITE_2D = 0.592746


@dataclass(frozen=True)
class LatticeSpec:
    d: int
    L: int
    p: float
    seed: int = 0
    torus: bool = True

    def __post_init__(self):
        if self.d not in (1, 2, 3, 4):
            raise ValueError(f"dimension d={self.d} not supported (1..4)")
        if self.L < 2:
            raise ValueError("side length L must be >= 2")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    @property
    def n_sites(self) -> int:
        return self.L**self.d


@dataclass(frozen=True)
class SiteField:
    spec: LatticeSpec
    open: np.ndarray  # bool, shape spec.shape

    def __post_init__(self):
        if self.open.shape != self.spec.shape:
            raise ValueError("bitmap shape does not match the lattice")

    @property
    def n_open(self) -> int:
        return int(self.open.sum())

    @classmethod
    def from_sites(cls, spec: LatticeSpec, sites) -> "SiteField":
        field_ = np.zeros(spec.shape, dtype=bool)
        for s in sites:
            field_[tuple(s)] = True
        return cls(spec, field_)


@dataclass(frozen=True)
class ClusterLabels:
    field: SiteField
    label: np.ndarray  # int, -1 on closed sites
    sizes: np.ndarray  # component id -> site count
    giant: int

    @property
    def giant_mask(self) -> np.ndarray:
        return self.label == self.giant

    @property
    def giant_size(self) -> int:
        return int(self.sizes[self.giant])


@dataclass(frozen=True)
class CoarseGrid:
    n: int
    cube_open: np.ndarray  # bool over coarse sites, shape (L/(2n+1),)*d
    spec: LatticeSpec | None = None

    @property
    def side(self) -> int:
        return 2 * self.n + 1


@dataclass(frozen=True)
class OpenPath:
    cubes: list[tuple[int, ...]]
    sites: list[tuple[int, ...]] = field(default_factory=list)


def sample_sites(spec: LatticeSpec) -> SiteField:
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    return SiteField(spec, rng.random(spec.shape) < spec.p)


def label_clusters(field_: SiteField) -> ClusterLabels:
    """Nearest-neighbour open clusters; ids ordered by first site in C order."""
    openmap = field_.open
    if not openmap.any():
        raise ValueError("empty field")
    d = openmap.ndim
    raw, nraw = ndimage.label(openmap, structure=ndimage.generate_binary_structure(d, 1))
    if field_.spec.torus:
        # stitch the faces of the box together
        rows, cols = [], []
        for axis in range(d):
            a = np.take(raw, 0, axis=axis)
            b = np.take(raw, -1, axis=axis)
            both = (a > 0) & (b > 0)
            rows.append(a[both])
            cols.append(b[both])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        graph = coo_matrix(
            (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(nraw + 1, nraw + 1)
        )
        _, comp = connected_components(graph, directed=False)
        merged = np.where(raw > 0, comp[raw], -1)
    else:
        merged = np.where(raw > 0, raw, -1)

    flat = merged.ravel()
    opened = np.flatnonzero(flat >= 0)
    uniq, first = np.unique(flat[opened], return_index=True)
    order = np.argsort(opened[first], kind="stable")
    remap = np.empty(uniq.max() + 1, dtype=np.int64)
    remap[uniq[order]] = np.arange(len(uniq))
    label = np.full(flat.shape, -1, dtype=np.int64)
    label[opened] = remap[flat[opened]]
    label = label.reshape(openmap.shape)
    sizes = np.bincount(label[label >= 0], minlength=len(uniq))
    giant = int(np.argmax(sizes))  # argmax returns the smallest id on ties
    return ClusterLabels(field_, label, sizes, giant)


def coarse_grain(field_: SiteField, n: int) -> CoarseGrid:
    if n < 1:
        raise ValueError("half-width n must be >= 1")
    b = 2 * n + 1
    L, d = field_.spec.L, field_.spec.d
    if L % b:
        raise ValueError(f"cube side {b} does not divide L={L}")
    # roll so that cube Z occupies indices [bZ, bZ+b) on every axis
    shifted = np.roll(field_.open, shift=n, axis=tuple(range(d)))
    m = L // b
    blocks = shifted.reshape(sum(((m, b) for _ in range(d)), ()))
    cube_open = blocks.all(axis=tuple(range(1, 2 * d, 2)))
    return CoarseGrid(n, cube_open, field_.spec)


def _cube_neighbors(z, m, d):
    # e1 does not wrap (spanning direction); other axes wrap
    out = []
    for axis in range(d):
        for step in (-1, 1):
            c = list(z)
            c[axis] += step
            if axis == 0:
                if not 0 <= c[0] < m:
                    continue
            else:
                c[axis] %= m
            out.append(tuple(c))
    return sorted(set(out))


def find_open_cube_path(grid: CoarseGrid) -> OpenPath:
    """Lexicographically smallest shortest open-cube path from face Z1=0 to Z1=m-1."""
    cube_open = grid.cube_open
    d = cube_open.ndim
    m = cube_open.shape[0]
    dist = np.full(cube_open.shape, -1, dtype=np.int64)
    queue = deque()
    for z in product(range(m), repeat=d - 1):
        target = (m - 1,) + z
        if cube_open[target]:
            dist[target] = 0
            queue.append(target)
    while queue:
        z = queue.popleft()
        for w in _cube_neighbors(z, m, d):
            if cube_open[w] and dist[w] < 0:
                dist[w] = dist[z] + 1
                queue.append(w)
    starts = [(0,) + z for z in product(range(m), repeat=d - 1)]
    starts = [s for s in starts if dist[s] >= 0]
    if not starts:
        raise ValueError("no open-cube spanning path")
    best = min(dist[s] for s in starts)
    cur = min(s for s in starts if dist[s] == best)
    cubes = [cur]
    while dist[cur] > 0:
        cur = min(w for w in _cube_neighbors(cur, m, d) if dist[w] == dist[cur] - 1)
        cubes.append(cur)
    return OpenPath(cubes, expand_cube_path(cubes, grid.n, grid.spec.L if grid.spec else m * grid.side))


def expand_cube_path(cubes, n: int, L: int) -> list[tuple[int, ...]]:
    """Sites on the straight segments joining consecutive cube centres."""
    b = 2 * n + 1
    sites = [tuple((b * c) % L for c in cubes[0])]
    for z0, z1 in zip(cubes, cubes[1:]):
        axis = next(i for i in range(len(z0)) if z0[i] != z1[i])
        step = (z1[axis] - z0[axis]) % (L // b)
        step = 1 if step == 1 else -1
        cur = [b * c for c in z0]
        for _ in range(b):
            cur[axis] += step
            sites.append(tuple(c % L for c in cur))
    return sites


def check_open_path(field_: SiteField, path: OpenPath, n: int) -> list[str]:
    """Independent validation of an expanded path; returns a list of violations."""
    problems = []
    L, d = field_.spec.L, field_.spec.d
    sites = path.sites
    if len(set(sites)) != len(sites):
        problems.append("path is not self-avoiding")
    for a, b in zip(sites, sites[1:]):
        diff = [min((x - y) % L, (y - x) % L) for x, y in zip(a, b)]
        if sorted(diff) != [0] * (d - 1) + [1]:
            problems.append(f"sites {a} and {b} are not adjacent")
    offsets = list(product(range(-n, n + 1), repeat=d))
    for s in sites:
        for off in offsets:
            x = tuple((si + oi) % L for si, oi in zip(s, off))
            if not field_.open[x]:
                problems.append(f"closed site {x} within distance {n} of path site {s}")
                break
    return problems
