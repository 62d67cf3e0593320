"""Empirical Hölder constants over the dyadic grids R_m, for the SPDE flow and an embedded tree flow."""

import argparse

from treeflow.diagnostics import estimate_holder, fit_envelope
from treeflow.embedding import embed, rescale
from treeflow.offspring import EnergySpec, solve_gibbs
from treeflow.rng import derive_stream
from treeflow.spde import ExactBandNoise, solve_flow
from treeflow.trees import sample_chain


def report(name, flow, levels, beta, alpha):
    reps = [estimate_holder(flow, m, beta=beta, alpha=alpha, mesh_level=8) for m in levels]
    fit = fit_envelope(reps)
    print(name)
    for r in reps:
        print(f"  m={r.m}: points {len(r.points):5d}  sup H {r.sup:.3f}  profile H {r.profile_holder:.3f}")
    print(f"  fitted gamma {fit.gamma_fit:.3f}, b {fit.b:.3f}, below 3/8: {fit.admissible}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[2, 3, 4, 5, 6])
    ap.add_argument("--beta", type=float, default=0.3)
    ap.add_argument("--alpha", type=float, default=0.2)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20240101)
    args = ap.parse_args()

    sol = solve_flow(ExactBandNoise(derive_stream(args.seed, "holder-spde"), 1e-3, 1), 1.0, 0.0, 10, 1.0)
    report("SPDE flow, depth 10, dt 1e-3", sol, args.levels, args.beta, args.alpha)

    dist = solve_gibbs(EnergySpec(2, (0.0, 0.0, 0.0)))
    chain = sample_chain(dist, args.n, derive_stream(args.seed, "holder-tree"),
                         initial_size=int(dist.mu * args.n) + 1)
    report(f"embedded tree flow, n={args.n}", rescale(embed(chain), args.n, dist.mu), args.levels, args.beta, args.alpha)


if __name__ == "__main__":
    main()
