"""Disagreement of the neutral competition model over time, in two and three dimensions."""
import argparse

import numpy as np

from hostsym.graph import build_lattice
from hostsym.rng import kernel_seeds
from hostsym.voter import VoterParams, run_voter


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--times", type=float, nargs="+", default=[10, 30, 100, 300, 1000])
    ap.add_argument("--replicas", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--N", type=int, nargs="+", default=[1, 5, 25])
    args = ap.parse_args()

    times = np.array(sorted(args.times))
    print("d,L,p,N,t,disagreement,stderr")
    for d, L, p in ((2, 80, 0.6), (3, 20, 0.6)):
        for N in args.N:
            g = build_lattice(d, L, p, args.seed, N)
            seeds = kernel_seeds(args.seed, f"trend-{d}-{N}", args.replicas)
            rows = np.array([run_voter(g, N, VoterParams.neutral(0.5, 0.5), 0.5, times[-1], int(s),
                                       sample_times=times).trajectory[:, 2] for s in seeds])
            se = rows.std(axis=0, ddof=1) / np.sqrt(len(seeds)) if len(seeds) > 1 else np.zeros(len(times))
            for t, m, s in zip(times, rows.mean(axis=0), se):
                print(f"{d},{L},{p},{N},{t:g},{m:.5f},{s:.5f}")


if __name__ == "__main__":
    main()
