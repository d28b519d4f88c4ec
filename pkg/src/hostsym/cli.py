"""Command-line driver.

Every subcommand reads an optional ``key = value`` config file bound to its own
dataclass, writes CSV (with the resolved config echoed as ``#`` comment lines)
to ``--out`` or stdout, and exits 0 on success, 2 on configuration errors and 3
on runtime errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, ConfigError, echo
from .rng import RNG_DESCRIPTION, RngStream, kernel_seeds

# ---------------------------------------------------------------- configs


@dataclass
class LatticeConfig:
    d: int = 2
    L: int = 40
    p: float = 1.0
    perc_seed: int = 0
    seed: int = 0


@dataclass
class PercolateConfig(LatticeConfig):
    L: int = 80
    p: float = 0.6
    cube_n: int = 0  # coarse-graining half-width; 0 skips the path search
    torus: bool = True
    snapshot: str = ""


@dataclass
class ContactConfig(LatticeConfig):
    N: int = 1
    alpha: float = 1.0
    beta: float = 2.0
    t_end: float = 100.0
    replicas: int = 10
    init_count: int = 0  # 0 means a full host
    snapshot_prefix: str = ""


@dataclass
class BRWRunConfig:
    d: int = 1
    radius: int = 30
    alpha_bar: float = 0.4
    beta_bar: float = 0.4
    M: int = -1  # negative: untruncated
    t_end: float = 5.0
    replicas: int = 10
    init_count: int = 1
    samples: tuple[float, ...] = (0.0, 1.0, 2.0, 5.0)
    seed: int = 0


@dataclass
class VoterConfig(LatticeConfig):
    N: int = 2
    alpha1: float = 0.5
    alpha2: float = 0.5
    beta1: float = 0.5
    beta2: float = 0.5
    theta: float = 0.5
    t_end: float = 100.0
    replicas: int = 4
    samples: tuple[float, ...] = (0.0, 10.0, 100.0)


@dataclass
class ThresholdConfig(LatticeConfig):
    d: int = 1
    L: int = 30
    N: int = 2
    beta2: float = 0.5
    kappa: float = 0.5
    theta: float = 0.5
    t_end: float = 10.0
    samples: tuple[float, ...] = (0.0, 1.0, 5.0, 10.0)
    log: str = "events.bin"


@dataclass
class DualConfig(LatticeConfig):
    L: int = 20
    N: int = 2
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 0.5
    t: float = 5.0
    block: tuple[int, ...] = (0, 1, 2)
    replicas: int = 2000
    meeting_params: tuple[str, ...] = ("2:1:1", "1:5:1", "1:0:1")
    meeting_T: float = 200.0
    meeting_replicas: int = 2000


@dataclass
class CollideConfig(LatticeConfig):
    L: int = 30
    A: int = -1  # -1: centre host
    B: int = -1  # -1: same as A
    horizons: tuple[float, ...] = (10.0, 100.0, 1000.0)
    replicas: int = 200


@dataclass
class BlocksConfig(LatticeConfig):
    L: int = 45
    p: float = 1.0
    N: int = 100
    alpha: float = 1.2
    beta: float = 0.2
    cube_n: int = 2
    n: float = 4.0
    levels: int = 10
    runs: int = 10
    K: int = 0  # 0: floor(sqrt N)


@dataclass
class RenderConfig(LatticeConfig):
    kind: str = "contact"  # percolation | contact | voter
    L: int = 80
    p: float = 0.6
    N: int = 25
    alpha: float = 1.0
    beta: float = 2.0
    alpha1: float = 0.5
    alpha2: float = 0.5
    beta1: float = 0.5
    beta2: float = 0.5
    theta: float = 0.5
    t: float = 20.0


# ---------------------------------------------------------------- helpers


def _load(args, cls, **extra):
    cfg = Config.load(args.config) if args.config else Config()
    return cfg.bind(cls, seed=args.seed, **extra)


def _header(command: str, cfg) -> list[str]:
    return [f"# hostsym {__version__} {command}", f"# rng = {RNG_DESCRIPTION}"] + echo(cfg)


def _emit(args, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _f(x) -> str:
    return repr(float(x))


def _graph(cfg, N: int = 1):
    from .graph import build_lattice

    return build_lattice(cfg.d, cfg.L, cfg.p, cfg.perc_seed, N)


# ---------------------------------------------------------------- commands


def cmd_percolate(args) -> None:
    from .percolation import (LatticeSpec, check_open_path, coarse_grain, find_open_cube_path, label_clusters,
                              sample_sites)
    from .render import render_percolation

    cfg = _load(args, PercolateConfig)
    spec = LatticeSpec(cfg.d, cfg.L, cfg.p, cfg.perc_seed, cfg.torus)
    field_ = sample_sites(spec)
    labels = label_clusters(field_)
    lines = _header("percolate", cfg)
    lines.append("open_sites,clusters,giant_size,giant_fraction,path_found,path_sites,path_violations")
    found, n_sites, bad = 0, 0, 0
    if cfg.cube_n > 0:
        try:
            path = find_open_cube_path(coarse_grain(field_, cfg.cube_n))
            found, n_sites = 1, len(path.sites)
            bad = len(check_open_path(field_, path, cfg.cube_n))
        except ValueError as exc:
            if "no open-cube" not in str(exc):
                raise
    lines.append(
        f"{field_.n_open},{len(labels.sizes)},{labels.giant_size},{_f(labels.giant_size / spec.n_sites)},"
        f"{found},{n_sites},{bad}"
    )
    if cfg.snapshot:
        render_percolation(labels, cfg.snapshot)
    _emit(args, lines)


def cmd_contact(args) -> None:
    from .contact import ContactParams, ContactState, center_host, geometric_times, run, run_replicas
    from .render import render_snapshot

    cfg = _load(args, ContactConfig)
    g = _graph(cfg, cfg.N)
    init = ContactState.single_host(g, center_host(g), cfg.init_count or cfg.N)
    params = ContactParams(cfg.alpha, cfg.beta)
    times = geometric_times(cfg.t_end)
    seeds, survived, ext, trajs = run_replicas(g, cfg.N, params, init, cfg.t_end, cfg.replicas, cfg.seed, times)
    lines = _header("contact", cfg)
    lines.append("replica,seed,t,total_symbionts,occupied_hosts")
    for r, tr in enumerate(trajs):
        for t, total, occ in tr:
            lines.append(f"{r},{seeds[r]},{_f(t)},{int(total)},{int(occ)}")
    lines.append("replica,survived,extinction_time")
    for r in range(cfg.replicas):
        lines.append(f"{r},{int(survived[r])},{_f(ext[r])}")
    if args.render_every:
        if g.d != 2:
            raise ConfigError("--render-every needs d = 2")
        snap_times = np.arange(0.0, cfg.t_end + 1e-9, args.render_every)
        rep = run(g, cfg.N, params, init, cfg.t_end, int(seeds[0]), sample_times=snap_times,
                  watch=np.arange(g.n_hosts))
        prefix = cfg.snapshot_prefix or (str(Path(args.out).with_suffix("")) if args.out else "contact")
        for t, counts in zip(snap_times, rep.watched):
            render_snapshot(g, counts, f"{prefix}_t{t:g}.ppm")
    _emit(args, lines)


def cmd_brw(args) -> None:
    from .brw import BRWParams, BRWState, expected_occupancy, run_brw

    if args.action == "expect":
        if None in (args.d, args.alpha_bar, args.beta_bar, args.t, args.x, args.nmax):
            raise ConfigError("brw expect needs --d --alpha-bar --beta-bar --t --x --nmax")
        X = tuple(int(v) for v in args.x.split(","))
        if len(X) != args.d:
            raise ConfigError("--x must have d coordinates")
        res = expected_occupancy(BRWParams(args.alpha_bar, args.beta_bar), args.t, X, args.nmax, tol=args.tol)
        _emit(args, ["value,tail_bound,n_max", f"{_f(res.value)},{_f(res.tail)},{res.n_max}"])
        return
    cfg = _load(args, BRWRunConfig)
    params = BRWParams(cfg.alpha_bar, cfg.beta_bar, M=None if cfg.M < 0 else cfg.M)
    lines = _header("brw run", cfg)
    lines.append("replica,t,total,max_site_count")
    for r in range(cfg.replicas):
        init = BRWState.single(cfg.d, cfg.radius, cfg.init_count)
        res = run_brw(params, init, cfg.t_end, RngStream(cfg.seed, "brw", r).kernel_seed(), truncated=cfg.M >= 0,
                      sample_times=cfg.samples)
        for t, tot, mx in zip(res.times, res.totals, res.max_site_count):
            lines.append(f"{r},{_f(t)},{int(tot)},{int(mx)}")
    _emit(args, lines)


def cmd_voter(args) -> None:
    from .voter import VoterParams, VoterState, run_threshold, run_voter

    if args.action == "threshold":
        cfg = _load(args, ThresholdConfig)
        g = _graph(cfg, cfg.N)
        init = VoterState.product(g, cfg.theta, RngStream(cfg.seed, "threshold-init").generator())
        res = run_threshold(g, cfg.N, cfg.beta2, cfg.kappa, init, cfg.t_end, RngStream(cfg.seed, "threshold").kernel_seed(),
                            sample_times=cfg.samples)
        res.log.write(cfg.log)
        lines = _header("voter threshold", cfg) + [f"# events = {len(res.log)}", "t,n1"]
        lines += [f"{_f(t)},{int(n1)}" for t, n1 in res.trajectory]
        _emit(args, lines)
        return
    cfg = _load(args, VoterConfig)
    g = _graph(cfg, cfg.N)
    params = VoterParams(cfg.alpha1, cfg.alpha2, cfg.beta1, cfg.beta2)
    lines = _header("voter", cfg)
    lines.append("replica,t,n1,disagree_prob,pairs_sampled")
    seeds = kernel_seeds(cfg.seed, "voter", cfg.replicas)
    for r in range(cfg.replicas):
        res = run_voter(g, cfg.N, params, cfg.theta, cfg.t_end, int(seeds[r]), sample_times=cfg.samples)
        for t, n1, dis in res.trajectory:
            lines.append(f"{r},{_f(t)},{int(n1)},{_f(dis)},{res.pairs_sampled}")
    _emit(args, lines)


def cmd_dual_check(args) -> None:
    from .duality import MeetingStats, duality_check, meeting_separation_stats

    cfg = _load(args, DualConfig)
    g = _graph(cfg, cfg.N)
    res = duality_check(g, cfg.N, cfg.alpha, cfg.beta, cfg.theta, list(cfg.block), cfg.t, cfg.replicas, cfg.seed)
    lines = _header("dual-check", cfg)
    lines.append("lhs,lhs_se,rhs,rhs_se,z")
    lines.append(",".join(_f(v) for v in (res.lhs, res.lhs_se, res.rhs, res.rhs_se, res.z)))
    lines.append("N,alpha,beta,estimate,stderr,closed_form,meetings,arrival_coincidences")
    for spec in cfg.meeting_params:
        try:
            N, alpha, beta = spec.split(":")
            N, alpha, beta = int(N), float(alpha), float(beta)
        except ValueError as exc:
            raise ConfigError(f"bad meeting_params entry {spec!r}; expected N:alpha:beta") from exc
        gm = g.with_N(N)
        st = meeting_separation_stats(gm, N, alpha, beta, 0, N, cfg.meeting_T, cfg.meeting_replicas, cfg.seed)
        lines.append(
            f"{N},{_f(alpha)},{_f(beta)},{_f(st.estimate)},{_f(st.stderr)},"
            f"{_f(MeetingStats.closed_form(N, alpha, beta))},{st.meetings},{st.arrival_coincidences}"
        )
    _emit(args, lines)


def cmd_collide(args) -> None:
    from .contact import center_host
    from .walks import collision_count

    cfg = _load(args, CollideConfig)
    g = _graph(cfg)
    A = center_host(g) if cfg.A < 0 else cfg.A
    B = A if cfg.B < 0 else cfg.B
    est = collision_count(g, A, B, cfg.horizons, cfg.replicas, cfg.seed)
    lines = _header("collide", cfg) + ["T,mean_I,stderr,replicas"]
    lines += [f"{_f(T)},{_f(m)},{_f(s)},{est.replicas}" for T, m, s in zip(est.horizons, est.mean, est.stderr)]
    _emit(args, lines)


def cmd_kernel(args) -> None:
    from .walks import CONTINUOUS, LAZY, WalkKernel, heat_kernel

    cfg = _load(args, LatticeConfig)
    g = _graph(cfg)
    kern = WalkKernel.build(g, LAZY if args.time is None else CONTINUOUS)
    src = args.source
    A = tuple(int(v) for v in src.split(",")) if "," in src else int(src)
    dist = heat_kernel(kern, A, args.steps if args.time is None else args.time)
    lines = _header("kernel", cfg) + ["site,probability"]
    for h in np.flatnonzero(dist > 0):
        lines.append(f"{':'.join(str(c) for c in g.hosts[h])},{_f(dist[h])}")
    _emit(args, lines)


def cmd_blocks(args) -> None:
    from .blocks import GoodSiteField, child_bound, default_threshold, good_fields_from_runs, parity_mask, path_hosts
    from .contact import ContactParams
    from .percolation import LatticeSpec, coarse_grain, find_open_cube_path, sample_sites

    cfg = _load(args, BlocksConfig)
    if cfg.d != 2:
        raise ConfigError("blocks supports d = 2")
    g = _graph(cfg, cfg.N)
    field_ = sample_sites(LatticeSpec(cfg.d, cfg.L, cfg.p, cfg.perc_seed))
    path = find_open_cube_path(coarse_grain(field_, cfg.cube_n))
    hosts = path_hosts(g, path.sites)
    K = cfg.K or default_threshold(cfg.N)
    fields = good_fields_from_runs(g, cfg.N, ContactParams(cfg.alpha, cfg.beta), hosts, cfg.n, cfg.levels, cfg.runs,
                                   cfg.seed, K)
    lines = _header("blocks", cfg) + ["m,good_density,child_bound_estimate,ci_low"]
    par = parity_mask(len(hosts), cfg.levels)
    for m in range(cfg.levels + 1):
        dens = np.mean([f.good[m].sum() / par[m].sum() for f in fields])
        if m < cfg.levels:
            sub = [GoodSiteField(f.good[m : m + 2], f.n, f.K) for f in fields]
            cb = child_bound(sub)
            est, lo = cb.estimate, cb.ci_low
        else:
            est, lo = math.nan, math.nan
        lines.append(f"{m},{_f(dens)},{_f(est)},{_f(lo)}")
    _emit(args, lines)


def cmd_sweep(args) -> None:
    from .sweep import SweepConfig, parse_grid, rows_to_csv, sweep

    cfg_map = Config.load(args.config) if args.config else Config()
    grid_text = cfg_map.values.pop("grid", "")
    if args.grid:
        grid_text = args.grid
    try:
        grid = parse_grid(grid_text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = cfg_map.bind(SweepConfig, seed=args.seed)
    cfg.grid = grid
    header = _header("sweep", cfg)
    _emit(args, rows_to_csv(sweep(cfg), header).rstrip("\n").split("\n"))


def cmd_render(args) -> None:
    from .contact import ContactParams, ContactState, center_host, run
    from .percolation import LatticeSpec, label_clusters, sample_sites
    from .render import ppm_bytes, render_percolation, render_snapshot
    from .voter import VoterParams, run_voter

    cfg = _load(args, RenderConfig)
    if cfg.kind == "percolation":
        img = render_percolation(label_clusters(sample_sites(LatticeSpec(cfg.d, cfg.L, cfg.p, cfg.perc_seed))))
    elif cfg.kind == "contact":
        g = _graph(cfg, cfg.N)
        init = ContactState.single_host(g, center_host(g), cfg.N)
        rep = run(g, cfg.N, ContactParams(cfg.alpha, cfg.beta), init, cfg.t, RngStream(cfg.seed, "render").kernel_seed())
        img = render_snapshot(g, rep.final)
    elif cfg.kind == "voter":
        g = _graph(cfg, cfg.N)
        params = VoterParams(cfg.alpha1, cfg.alpha2, cfg.beta1, cfg.beta2)
        rep = run_voter(g, cfg.N, params, cfg.theta, cfg.t, RngStream(cfg.seed, "render").kernel_seed())
        img = render_snapshot(g, rep.state)
    else:
        raise ConfigError(f"unknown render kind {cfg.kind!r}")
    data = ppm_bytes(img)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for replica loops")

    parser = argparse.ArgumentParser(prog="hostsym", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("percolate", parents=[common], help="sample a lattice and label clusters")
    p = sub.add_parser("contact", parents=[common], help="single-species invasion runs")
    p.add_argument("--render-every", type=float, default=None, help="write a PPM snapshot of replica 0 every T")
    p = sub.add_parser("brw", parents=[common], help="branching random walk expectation or simulation")
    p.add_argument("action", choices=["expect", "run"])
    p.add_argument("--d", type=int)
    p.add_argument("--alpha-bar", type=float)
    p.add_argument("--beta-bar", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--x")
    p.add_argument("--nmax", type=int)
    p.add_argument("--tol", type=float, default=1e-9)
    p = sub.add_parser("voter", parents=[common], help="two-type competition or threshold process")
    p.add_argument("action", nargs="?", choices=["run", "threshold"], default="run")
    sub.add_parser("dual-check", parents=[common], help="forward versus dual estimates and meeting statistics")
    sub.add_parser("collide", parents=[common], help="collision counts of two random walks")
    p = sub.add_parser("kernel", parents=[common], help="heat kernel from one site")
    p.add_argument("--from", dest="source", required=True, help="host index or comma-separated coordinates")
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--time", type=float, default=None, help="continuous time instead of lazy steps")
    sub.add_parser("blocks", parents=[common], help="good-site fields along an open path")
    p = sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV")
    p.add_argument("--grid", help='e.g. "alpha=0.5,1.5; N=1,5"')
    sub.add_parser("render", parents=[common], help="PPM snapshot")
    return parser


COMMANDS = {
    "percolate": cmd_percolate,
    "contact": cmd_contact,
    "brw": cmd_brw,
    "voter": cmd_voter,
    "dual-check": cmd_dual_check,
    "collide": cmd_collide,
    "kernel": cmd_kernel,
    "blocks": cmd_blocks,
    "sweep": cmd_sweep,
    "render": cmd_render,
}


def _set_threads(n):
    if n is None:
        return
    import numba

    if n < 1:
        raise ConfigError("--threads must be >= 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _set_threads(args.threads)
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report any runtime failure via the exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
