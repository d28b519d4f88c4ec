"""Parameter sweeps with one canonically ordered CSV row per grid point.

Each grid point draws its replicas from a stream keyed by the point's own
parameter values, so rows do not depend on evaluation order.
"""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .contact import ContactParams, ContactState, center_host, survival_probability
from .graph import build_lattice
from .rng import RngStream
from .voter import VoterParams, VoterState, run_voter_replicas

SWEEPABLE = ("p", "N", "alpha", "beta", "alpha1", "alpha2", "beta1", "beta2")


@dataclass
class SweepConfig:
    kind: str = "contact"  # contact | invasion
    d: int = 2
    L: int = 20
    p: float = 1.0
    perc_seed: int = 0
    N: int = 1
    alpha: float = 1.0
    beta: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    beta1: float = 1.0
    beta2: float = 0.5
    t_end: float = 50.0
    target: int = 100
    replicas: int = 100
    seed: int = 0
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("contact", "invasion"):
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")


def parse_grid(text: str) -> dict:
    """``"alpha=0.5,1.0; N=1,5"`` -> {"alpha": [0.5, 1.0], "N": [1, 5]}."""
    grid = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, _, values = part.partition("=")
        key = key.strip()
        if key not in SWEEPABLE:
            raise ValueError(f"cannot sweep over {key!r}")
        cast = int if key == "N" else float
        grid[key] = [cast(v) for v in values.split(",") if v.strip()]
    return grid


def grid_points(grid: dict) -> list[dict]:
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be nonempty")
    keys = sorted(grid)
    pts = [dict(zip(keys, combo)) for combo in itertools.product(*(sorted(set(grid[k])) for k in keys))]
    return pts


def _point_seed(master: int, point: dict) -> int:
    key = ";".join(f"{k}={point[k]!r}" for k in sorted(point))
    return RngStream(master, "sweep:" + key).kernel_seed()


def evaluate_point(cfg: SweepConfig, point: dict) -> dict:
    vals = {k: getattr(cfg, k) for k in SWEEPABLE}
    vals.update(point)
    N = int(vals["N"])
    g = build_lattice(cfg.d, cfg.L, vals["p"], cfg.perc_seed, N)
    seed = _point_seed(cfg.seed, point)
    if cfg.kind == "contact":
        params = ContactParams(vals["alpha"], vals["beta"])
        init = ContactState.single_host(g, center_host(g), N)
        est = survival_probability(g, N, params, init, cfg.t_end, cfg.replicas, seed)
        stat, se = est.estimate, est.stderr
    else:
        params = VoterParams(vals["alpha1"], vals["alpha2"], vals["beta1"], vals["beta2"])
        types = np.full(g.n_vertices, 2, dtype=np.int8)
        types[center_host(g) * N] = 1
        n1, _, _, _ = run_voter_replicas(g, N, params, None, cfg.t_end, cfg.replicas, seed,
                                         init=VoterState(types), stop_at=cfg.target, tag="sweep-invasion")
        hit = n1 >= cfg.target
        stat = float(hit.mean())
        se = math.sqrt(stat * (1 - stat) / cfg.replicas)
    return {**point, "statistic": stat, "stderr": se, "replicas": cfg.replicas}


def sweep(cfg: SweepConfig, grid: dict | None = None) -> list[dict]:
    grid = cfg.grid if grid is None else grid
    rows = [evaluate_point(cfg, pt) for pt in grid_points(grid)]
    keys = sorted(grid)
    rows.sort(key=lambda r: tuple(r[k] for k in keys))
    return rows


def rows_to_csv(rows: list[dict], header_lines=()) -> str:
    if not rows:
        raise ValueError("no rows")
    cols = list(rows[0])
    buf = io.StringIO(newline="")
    for line in header_lines:
        buf.write(line + "\n")
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r[c]) for c in cols) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
