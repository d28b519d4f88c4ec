"""Neutral competition snapshots at two times on a percolation cluster, plus the disagreement at each."""
import argparse
from pathlib import Path

from hostsym.graph import build_lattice
from hostsym.render import render_snapshot
from hostsym.rng import RngStream
from hostsym.voter import VoterParams, run_voter


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=80)
    ap.add_argument("--p", type=float, default=0.6)
    ap.add_argument("--N", type=int, default=25)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--times", type=float, nargs="+", default=[100.0, 1000.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="out")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    g = build_lattice(2, args.L, args.p, args.seed, args.N)
    params = VoterParams.neutral(args.alpha, args.beta)
    seed = RngStream(args.seed, "voter-snapshots").kernel_seed()
    for t in args.times:
        # same seed each time: the shorter run is a prefix of the longer one
        res = run_voter(g, args.N, params, 0.5, t, seed, sample_times=[t])
        render_snapshot(g, res.state, out / f"voter_t{t:g}.ppm")
        print(f"t={t:g}: type-1 fraction {res.state.n1 / g.n_vertices:.3f}, disagreement {res.trajectory[-1, 2]:.4f}")


if __name__ == "__main__":
    main()
