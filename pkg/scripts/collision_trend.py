"""Mean number of collisions of two random walks on a cluster, against the time horizon."""
import argparse

from hostsym.contact import center_host
from hostsym.graph import build_lattice
from hostsym.walks import collision_count


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--L", type=int, default=100)
    ap.add_argument("--p", type=float, default=0.7)
    ap.add_argument("--horizons", type=float, nargs="+", default=[1e2, 1e3, 1e4])
    ap.add_argument("--replicas", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    g = build_lattice(args.d, args.L, args.p, args.seed)
    A = center_host(g)
    est = collision_count(g, A, int(g.neighbors(A)[0]), args.horizons, args.replicas, args.seed)
    print("T,mean_I,stderr")
    for T, m, s in zip(est.horizons, est.mean, est.stderr):
        print(f"{T:g},{m:.4f},{s:.4f}")


if __name__ == "__main__":
    main()
