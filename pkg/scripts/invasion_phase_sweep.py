"""Survival frequency of a single full host over a grid of outside-host birth rates and host sizes."""
import argparse
import sys

from hostsym.sweep import SweepConfig, parse_grid, rows_to_csv, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default="beta=0.1,0.3,0.6,1.0,2.0; N=1,5,25")
    ap.add_argument("--alpha", type=float, default=1.2)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--L", type=int, default=40)
    ap.add_argument("--p", type=float, default=0.9)
    ap.add_argument("--t-end", type=float, default=200.0)
    ap.add_argument("--replicas", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = SweepConfig(kind="contact", d=args.d, L=args.L, p=args.p, alpha=args.alpha, t_end=args.t_end,
                      replicas=args.replicas, seed=args.seed)
    rows = sweep(cfg, parse_grid(args.grid))
    sys.stdout.write(rows_to_csv(rows))


if __name__ == "__main__":
    main()
