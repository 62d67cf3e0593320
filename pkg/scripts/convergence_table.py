"""KS distances between rescaled tree marginals and SPDE marginals over a range of n."""

import argparse

from treeflow.diagnostics import convergence_report, spde_marginals
from treeflow.offspring import EnergySpec, solve_gibbs
from treeflow.rng import derive_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[20, 100, 500, 2000])
    ap.add_argument("--cuts", type=float, nargs="+", default=[0.25, 0.5, 0.75, 1.0])
    ap.add_argument("--times", type=float, nargs="+", default=[0.5])
    ap.add_argument("--replicas", type=int, default=10_000)
    ap.add_argument("--energies", type=float, nargs="+", default=[0.0, 0.0, 0.0])
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=20240101)
    args = ap.parse_args()

    dist = solve_gibbs(EnergySpec(len(args.energies) - 1, tuple(args.energies), args.beta))
    ref = spde_marginals(args.cuts, args.times, args.replicas, derive_stream(args.seed, "table-ref"), dt=1e-4)
    rows = convergence_report(dist, args.n, args.cuts, args.times, args.replicas,
                              derive_stream(args.seed, "table-tree"), reference=ref)
    print(f"{'n':>6} {'x':>6} {'t':>5} {'KS':>7} {'p':>8}")
    for r in rows:
        print(f"{r.n:6d} {r.x:6.3f} {r.t:5.2f} {r.report.statistic:7.4f} {r.report.p_value:8.3g}")


if __name__ == "__main__":
    main()
