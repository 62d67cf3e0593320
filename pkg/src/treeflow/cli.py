"""Command-line entry point: ``treeflow <command> [--config FILE] [--set k=v ...]``.

Each command writes its files and a ``manifest.json`` into
``<out>/<command>/``, where ``<out>`` is ``--out``, else ``$TREEFLOW_OUT``,
else ``./treeflow-out``.

Exit status: 0 success, 1 configuration error, 2 budget exceeded,
3 a checked criterion failed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as tio
from .config import RunConfig, load_config
from .errors import BudgetExceeded, ConfigError, InfeasibleSpec
from .rng import derive_stream

log = logging.getLogger("treeflow")

OUT_ENV = "TREEFLOW_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_FAILED = 0, 1, 2, 3


def _solve_gibbs(cfg: RunConfig, out: Path):
    dist = cfg.model.distribution()
    rec = {"p": dist.p, "rho": dist.rho, "C": dist.C, "mu": dist.mu, "residual": dist.residual}
    return [tio.write_json(out / "gibbs.json", rec)], True, {}


def _sample_tree(cfg: RunConfig, out: Path):
    from .trees import sample_chain

    dist = cfg.model.distribution()
    chain = sample_chain(dist, cfg.tree.generations, derive_stream(cfg.seed, "tree"), cfg.tree.initial_size)
    path = tio.write_csv(out / "chain.csv", tio.CHAIN_FIELDS, tio.chain_rows(chain))
    return [path], True, {"final_size": int(chain.sizes[-1])}


def _embedded_flow(cfg: RunConfig):
    from .embedding import embed, rescale
    from .trees import sample_chain

    dist = cfg.model.distribution()
    chain = sample_chain(dist, cfg.tree.generations, derive_stream(cfg.seed, "tree"), cfg.tree.initial_size)
    return rescale(embed(chain), cfg.tree.n, dist.mu)


def _embed_flow(cfg: RunConfig, out: Path):
    from .embedding import flow_graph
    from .graphs import compose, hausdorff_rho

    flow = _embedded_flow(cfg)
    emb = flow.embedding
    times = np.arange(emb.n_generations + 1) / flow.n
    # cuts are fractions of the initial population
    xs = np.asarray(cfg.tree.cuts) * float(flow.profile(0.0))
    paths = flow.trajectory(xs, 0.0, times)
    rows = ((t, x, u) for i, t in enumerate(times) for x, u in zip(xs, paths[i]))
    files = [tio.write_csv(out / "trajectory.csv", tio.TRAJECTORY_FIELDS, rows)]
    n = emb.n_generations
    mid = n // 2
    cocycle = 0.0
    if n >= 2:
        cocycle = hausdorff_rho(flow_graph(emb, 0, n), compose(flow_graph(emb, mid, n), flow_graph(emb, 0, mid)))
    report = {"profile": flow.profile(times), "cocycle_residual": cocycle}
    files.append(tio.write_json(out / "flow.json", report))
    return files, cocycle < 1e-9, {}


def _foliation(cfg: RunConfig, out: Path):
    from .embedding import FOLIATION_FIELDS, foliation_rows

    flow = _embedded_flow(cfg)
    rows = foliation_rows(flow, cfg.tree.foliation_every, cfg.tree.foliation_parts)
    return [tio.write_csv(out / "foliation.csv", FOLIATION_FIELDS, rows)], True, {}


def _simulate_sde(cfg: RunConfig, out: Path):
    from .sde import DiffusionConfig, simulate_u_system, simulate_z

    sp = cfg.spde
    dc = DiffusionConfig(dt=sp.dt, t_max=sp.t_max)
    rng = derive_stream(cfg.seed, "sde")
    if sp.z0 > 0:
        paths = simulate_u_system(np.asarray(cfg.tree.cuts) * sp.z0, dc, rng, sp.replicas)
        vals = paths.values
    else:
        paths = simulate_z(0.0, dc, rng, sp.replicas)
        vals = paths.values[:, :, None]
    rows = (
        (r, t, k, vals[i, r, k])
        for r in range(vals.shape[1])
        for i, t in enumerate(paths.times)
        for k in range(vals.shape[2])
    )
    return [tio.write_csv(out / "paths.csv", tio.PATH_FIELDS, rows)], True, {}


def _solve_spde(cfg: RunConfig, label: str = "spde"):
    from .spde import ExactBandNoise, GridNoise, SheetConfig, sample_sheet, solve_flow

    sp = cfg.spde
    rng = derive_stream(cfg.seed, label)
    if sp.noise == "grid":
        if sp.replicas != 1:
            raise ConfigError("spde: grid noise supports a single replica")
        sheet = sample_sheet(SheetConfig(sp.dt, sp.dy, max(4.0 * sp.z0, 1.0), sp.t_max), rng)
        noise = GridNoise(sheet)
    else:
        noise = ExactBandNoise(rng, sp.dt, sp.replicas)
    return solve_flow(noise, sp.z0, 0.0, sp.depth, sp.t_max)


def _simulate_spde(cfg: RunConfig, out: Path):
    from .spde import shocks

    sol = _solve_spde(cfg)
    files = [
        tio.write_csv(
            out / "z_path.csv",
            ("replica", "t", "Z"),
            ((r, t, sol.Z[i, r]) for r in range(sol.replicas) for i, t in enumerate(sol.step_times)),
        )
    ]
    stride = max(1, len(sol.x) // 64)
    xs_idx = np.arange(0, len(sol.x), stride)
    if xs_idx[-1] != len(sol.x) - 1:
        xs_idx = np.append(xs_idx, len(sol.x) - 1)
    rows = ((t, sol.x[j], sol.U[i, 0, j]) for i, t in enumerate(sol.times) for j in xs_idx)
    files.append(tio.write_csv(out / "trajectory.csv", tio.TRAJECTORY_FIELDS, rows))
    s0, s1 = sol.t0, sol.horizon
    found, Q = shocks(sol, s0, s1)
    files.append(tio.write_csv(out / "shocks.csv", tio.SHOCK_FIELDS, ((s0, s1, x, j) for x, j in found)))
    extra = {"dt": sol.dt, "dy": cfg.spde.dy, "depth": sol.depth, "shock_threshold": sol.threshold, "Q": Q}
    return files, True, extra


def _compare(cfg: RunConfig, out: Path):
    from .diagnostics import convergence_report

    dg = cfg.diagnostics
    dist = cfg.model.distribution()
    rows = convergence_report(
        dist, dg.n_list, cfg.tree.cuts, dg.t_list, dg.replicas, derive_stream(cfg.seed, "compare"),
        z=cfg.spde.z0, dt=cfg.spde.dt, level=dg.ks_level,
    )
    top = max(dg.n_list)
    ok = all(r.report.passed for r in rows if r.n == top)
    recs = [{"n": r.n, "x": r.x, "t": r.t, **r.report.to_dict()} for r in rows]
    return [tio.write_json(out / "compare.json", {"rows": recs, "passed_at_largest_n": ok})], ok, {}


def _enumerate(cfg: RunConfig, out: Path):
    from .diagnostics import check_enumeration_identities
    from .offspring import EnergySpec
    from .trees import enumerate_gibbs_marginal

    dg = cfg.diagnostics
    dist = cfg.model.distribution()
    rows = check_enumeration_identities(dist, dg.k_max, dg.max_size)
    ident = [
        {"name": r.name, "k": r.k, "l": r.l, "computed": r.computed, "expected": r.expected,
         "error": r.error, "passed": r.passed()}
        for r in rows
    ]
    tv = []
    if cfg.model.energies is not None:
        spec = EnergySpec(cfg.model.D, tuple(cfg.model.energies), cfg.model.beta)
        for N in range(3, dg.enum_N_max + 1):
            tv.append({"N": N, "tv": enumerate_gibbs_marginal(spec, N, 1, max_size=dg.max_size, dist=dist).tv})
    ok = all(r["passed"] for r in ident)
    return [tio.write_json(out / "enumerate.json", {"identities": ident, "tv_depth1": tv})], ok, {}


def _diagnose(cfg: RunConfig, out: Path):
    from .diagnostics import check_enumeration_identities, estimate_holder, fit_envelope, q_growth_check

    dist = cfg.model.distribution()
    report = {"gibbs_residual": dist.residual}
    rows = check_enumeration_identities(dist, cfg.diagnostics.k_max, cfg.diagnostics.max_size)
    report["identities_failed"] = [
        {"name": r.name, "k": r.k, "l": r.l, "error": r.error} for r in rows if not r.passed()
    ]
    sol = _solve_spde(cfg, "diagnose")
    q = q_growth_check(sol)
    report["q_growth_median_residual"] = q.median
    if sol.horizon >= 1.0 and sol.z > 0:
        reps = [estimate_holder(sol, m, mesh_level=8) for m in cfg.diagnostics.holder_levels]
        fit = fit_envelope(reps)
        report["holder"] = {"levels": fit.levels, "sups": fit.sups, "gamma_fit": fit.gamma_fit, "b": fit.b}
    ok = not report["identities_failed"] and q.passed and dist.residual <= 1e-12
    report["passed"] = ok
    return [tio.write_json(out / "diagnose.json", report)], ok, {}


COMMANDS = {
    "solve-gibbs": _solve_gibbs,
    "sample-tree": _sample_tree,
    "embed-flow": _embed_flow,
    "foliation": _foliation,
    "simulate-sde": _simulate_sde,
    "simulate-spde": _simulate_spde,
    "compare": _compare,
    "enumerate": _enumerate,
    "diagnose": _diagnose,
}


def run(command: str, cfg: RunConfig, out_root) -> int:
    """Run one command; returns the exit status."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command `{command}`; choose from {sorted(COMMANDS)}")
    out = Path(out_root) / command
    files, ok, extra = COMMANDS[command](cfg, out)
    tio.write_json(out / "manifest.json", tio.manifest(command, cfg, files, {**extra, "passed": ok}))
    return EXIT_OK if ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treeflow", description=__doc__.splitlines()[0])
    ap.add_argument("command", help=", ".join(COMMANDS))
    ap.add_argument("--config", help="YAML config file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key, e.g. spde.dt=1e-4 (repeatable)")
    ap.add_argument("--seed", type=int, help="master seed (shortcut for --set seed=...)")
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./treeflow-out)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out_root = args.out or os.environ.get(OUT_ENV) or "treeflow-out"
    try:
        if args.command not in COMMANDS:
            raise ConfigError(f"unknown command `{args.command}`; choose from {sorted(COMMANDS)}")
        overrides = list(args.overrides) + ([f"seed={args.seed}"] if args.seed is not None else [])
        cfg = load_config(args.config, overrides)
        try:
            cfg.model.distribution()
        except InfeasibleSpec as exc:
            raise ConfigError(str(exc)) from exc
        status = run(args.command, cfg, out_root)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    if status != EXIT_OK:
        print(f"{args.command}: checks failed (see {Path(out_root) / args.command})", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
