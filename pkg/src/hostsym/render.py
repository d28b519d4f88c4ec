"""Binary PPM (P6) snapshots of two-dimensional states.

Every lattice site becomes a b x b block with ``b = ceil(sqrt(N))``; slot i
sits at block cell (column i mod b, row i div b).  Sites that carry no host
and cells beyond the N slots are white.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .graph import HostGraph
from .percolation import ClusterLabels

WHITE = (255, 255, 255)
EMPTY_SLOT = (160, 160, 160)
OCCUPIED = (0, 0, 0)
TYPE1_COLOR = (0, 0, 0)
TYPE2_COLOR = (120, 120, 120)
NON_GIANT = (200, 200, 200)
GIANT = (0, 0, 0)


def ppm_bytes(rgb: np.ndarray) -> bytes:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("image must have shape (height, width, 3)")
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def write_ppm(path, rgb: np.ndarray) -> None:
    Path(path).write_bytes(ppm_bytes(rgb))


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or parts[2] != b"255":
        raise ValueError("not a binary 8-bit PPM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def block_side(N: int) -> int:
    return math.isqrt(N - 1) + 1 if N > 1 else 1


def slot_colors(g: HostGraph, state) -> np.ndarray:
    """(hosts, N, 3) colours from host counts (contact) or per-vertex types (voter)."""
    N = g.N
    out = np.empty((g.n_hosts, N, 3), dtype=np.uint8)
    if hasattr(state, "types"):
        types = np.asarray(state.types).reshape(g.n_hosts, N)
        out[:] = TYPE2_COLOR
        out[types == 1] = TYPE1_COLOR
    else:
        counts = np.asarray(state.counts if hasattr(state, "counts") else state)
        if counts.shape != (g.n_hosts,) or counts.min() < 0 or counts.max() > N:
            raise ValueError("host counts do not match the graph")
        occupied = np.arange(N)[None, :] < counts[:, None]
        out[:] = EMPTY_SLOT
        out[occupied] = OCCUPIED
    return out


def render_snapshot(g: HostGraph, state, path=None) -> np.ndarray:
    """Render a contact (host counts) or voter (vertex types) state; writes P6 when ``path`` is given."""
    if g.d != 2:
        raise ValueError("snapshots need a two-dimensional lattice")
    b = block_side(g.N)
    if g.N > b * b:
        raise ValueError("N does not fit the block")
    L = g.L
    img = np.full((L * b, L * b, 3), 255, dtype=np.uint8)
    colors = slot_colors(g, state)
    for i in range(g.N):
        col, row = i % b, i // b
        ys = g.hosts[:, 0] * b + row
        xs = g.hosts[:, 1] * b + col
        img[ys, xs] = colors[:, i]
    if path is not None:
        write_ppm(path, img)
    return img


def render_percolation(labels: ClusterLabels, path=None, scale: int = 1) -> np.ndarray:
    """Closed sites white, open sites off the giant cluster light grey, giant cluster black."""
    openmap = labels.field.open
    if openmap.ndim != 2:
        raise ValueError("percolation rendering needs d = 2")
    img = np.full(openmap.shape + (3,), 255, dtype=np.uint8)
    img[openmap] = NON_GIANT
    img[labels.giant_mask] = GIANT
    if scale > 1:
        img = img.repeat(scale, axis=0).repeat(scale, axis=1)
    if path is not None:
        write_ppm(path, img)
    return img
