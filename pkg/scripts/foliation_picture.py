"""Write a foliation CSV for one conditioned tree, optionally with a PNG if matplotlib is present."""

import argparse
from pathlib import Path

from treeflow.embedding import FOLIATION_FIELDS, embed, foliation_rows, rescale
from treeflow.io import write_csv
from treeflow.offspring import EnergySpec, solve_gibbs
from treeflow.rng import derive_stream
from treeflow.trees import sample_chain


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--generations", type=int, default=600)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--every", type=int, default=10)
    ap.add_argument("--parts", type=int, default=10)
    ap.add_argument("--seed", type=int, default=20240101)
    ap.add_argument("--out", default="foliation.csv")
    args = ap.parse_args()

    dist = solve_gibbs(EnergySpec(2, (0.0, 0.0, 0.0)))
    chain = sample_chain(dist, args.generations, derive_stream(args.seed, "tree"))
    rows = list(foliation_rows(rescale(embed(chain), args.n, dist.mu), args.every, args.parts))
    path = write_csv(args.out, FOLIATION_FIELDS, rows)
    print(f"{len(rows)} rows -> {path}")
    try:
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(8, 4))
    by_id = {}
    for r in rows:
        by_id.setdefault(r["trajectory_id"], []).append((r["t"], r["value"]))
    for pts in by_id.values():
        t, v = zip(*pts)
        ax.plot(t, v, lw=0.4, color="k")
    ax.set_xlabel("t")
    ax.set_ylabel("U")
    png = Path(args.out).with_suffix(".png")
    fig.savefig(png, dpi=150)
    print(f"plot -> {png}")


if __name__ == "__main__":
    main()
