"""Acceptance criteria, each run at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line (shown in the pytest terminal
summary, or printed directly with ``python tests/test_acceptance.py``).
Two criteria are expected to fail; see README for why.
"""

from __future__ import annotations

import math
import sys
import time
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from treeflow.diagnostics import (
    check_enumeration_identities,
    convergence_report,
    estimate_holder,
    fit_envelope,
    ks_two_sample,
    q_growth_check,
    spde_marginals,
)
from treeflow.embedding import embed, flow_graph
from treeflow.graphs import MonotoneGraph, compose, hausdorff_rho
from treeflow.offspring import EnergySpec, solve_gibbs
from treeflow.rng import derive_stream
from treeflow.sde import DiffusionConfig, simulate_u_system, simulate_z
from treeflow.spde import ExactBandNoise, shocks, solve_flow
from treeflow.trees import enumerate_continuations, enumerate_gibbs_marginal, sample_chain, sample_next

SEED = 20240101
RESULTS: list[str] = []

SPECS = {
    "D=2 uniform": EnergySpec(2, (0.0, 0.0, 0.0)),
    "D=3 uniform": EnergySpec(3, (0.0, 0.0, 0.0, 0.0)),
    "D=3 skewed": EnergySpec(3, (0.0, 0.4, 1.1, 0.2), beta=1.3),
    "D=2 ln2": EnergySpec(2, (0.0, 0.0, math.log(2.0))),
}


def record(label: str, ok: bool, started: float, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {label} ({time.perf_counter() - started:.1f}s): {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _fixed_point_residuals(spec: EnergySpec):
    dist = solve_gibbs(spec)
    w = np.exp(spec.log_weights())
    i = np.arange(spec.D + 1)
    terms = w * dist.rho**i
    # criticality sum (i - 1) w_i rho^i = 0 and normalization C sum w_i rho^i = 1
    return dist, abs(float(np.sum((i - 1) * terms) * dist.C)), abs(float(dist.C * terms.sum()) - 1.0)


def test_c1_gibbs_solver():
    t = time.perf_counter()
    u, ru1, ru2 = _fixed_point_residuals(SPECS["D=2 uniform"])
    s, rs1, rs2 = _fixed_point_residuals(SPECS["D=2 ln2"])
    ok = (
        np.max(np.abs(u.p - 1 / 3)) <= 1e-12
        and abs(s.rho - math.sqrt(2)) <= 1e-12
        and max(ru1, ru2, rs1, rs2) <= 1e-12
    )
    elapsed = time.perf_counter() - t
    ok = ok and elapsed < 1.0
    detail = f"uniform p err {np.max(np.abs(u.p - 1 / 3)):.1e}, rho-sqrt2 {abs(s.rho - math.sqrt(2)):.1e}, max residual {max(ru1, ru2, rs1, rs2):.1e}"
    assert record("1 Gibbs solver", ok, t, detail)


def test_c2_kernel_exactness():
    t = time.perf_counter()
    worst_sum = worst_mean = 0.0
    for spec in SPECS.values():
        dist = solve_gibbs(spec)
        for k in range(1, 5):
            conts = enumerate_continuations(k, dist, max_size=16)
            probs = [p for _, p in conts]
            worst_sum = max(worst_sum, abs(math.fsum(probs) - 1.0))
            mean = math.fsum(p * len(g) for g, p in conts)
            worst_mean = max(worst_mean, abs(mean - (k + dist.mu)))
    ok = max(worst_sum, worst_mean) <= 1e-12
    assert record("2 kernel exactness", ok, t, f"max |sum-1| {worst_sum:.1e}, max |E[X'|k]-k-mu| {worst_mean:.1e}")


def _identity_errors(name: str):
    worst = 0.0
    for spec in SPECS.values():
        for r in check_enumeration_identities(solve_gibbs(spec), k_max=3, max_size=16):
            if r.name == name:
                worst = max(worst, r.error)
    return worst


def test_c3a_progeny_mean_identity():
    t = time.perf_counter()
    err = _identity_errors("V'")
    assert record("3a E[V'|l,k] = l(1+mu/k)", err <= 1e-12, t, f"max error {err:.1e}")


def test_c3b_claimed_ratio_identity():
    # expected to fail: the kernel gives l/k exactly, not l/k - p0^k/k
    t = time.perf_counter()
    err = _identity_errors("V'/X'")
    mart = _identity_errors("V'/X' (martingale)")
    detail = f"max error vs l/k - p0^k/k {err:.3g}; vs l/k {mart:.1e}"
    assert record("3b E[V'/X'|l,k] = l/k - p0^k/k", err <= 1e-12, t, detail)


def test_c4_sampler_fidelity():
    t = time.perf_counter()
    pvals = []
    for label, k in (("D=2 uniform", 2), ("D=3 skewed", 2)):
        dist = solve_gibbs(SPECS[label])
        rng = derive_stream(SEED, "acceptance-4", k + dist.D)
        conts = {tuple(g.parents): p for g, p in enumerate_continuations(k, dist)}
        n = 100_000
        seen = Counter(tuple(sample_next(k, dist, rng).parents) for _ in range(n))
        keys = list(conts)
        if set(seen) - set(conts):
            pvals.append(0.0)
            continue
        pvals.append(float(chisquare([seen[c] for c in keys], [conts[c] * n for c in keys]).pvalue))
    elapsed = time.perf_counter() - t
    ok = min(pvals) > 1e-3 and elapsed < 10 * len(pvals)
    assert record("4 sampler chi-square", ok, t, f"p-values {', '.join(f'{p:.3g}' for p in pvals)} at 1e5 draws each")


def test_c5_thermodynamic_limit():
    t = time.perf_counter()
    tvs = [enumerate_gibbs_marginal(SPECS["D=2 uniform"], N, 1).tv for N in range(3, 11)]
    ok = abs(tvs[0] - 1 / 6) <= 1e-12 and all(b <= a + 1e-15 for a, b in zip(tvs, tvs[1:]))
    detail = "TV(N=3..10) " + ", ".join(f"{v:.4f}" for v in tvs)
    assert record("5 thermodynamic limit", ok, t, detail)


def test_c6_flow_axioms():
    t = time.perf_counter()
    dist = solve_gibbs(SPECS["D=2 uniform"])
    worst_id = worst_cocycle = 0.0
    for r in range(100):
        rng = derive_stream(SEED, "acceptance-6", r)
        emb = embed(sample_chain(dist, 50, rng, initial_size=int(rng.integers(1, 6))))
        s0, s1, s2 = np.sort(rng.uniform(0, 50, 3))
        g = flow_graph(emb, s0, s0)
        worst_id = max(worst_id, hausdorff_rho(g, MonotoneGraph.identity(g.z0)))
        direct = flow_graph(emb, s0, s2)
        worst_cocycle = max(worst_cocycle, hausdorff_rho(direct, compose(flow_graph(emb, s1, s2), flow_graph(emb, s0, s1))))
    ok = worst_id == 0.0 and worst_cocycle < 1e-9
    assert record("6 flow axioms", ok, t, f"identity residual {worst_id:.1e}, max cocycle residual {worst_cocycle:.1e} over 100 chains")


def test_c7_profile_diffusion():
    t = time.perf_counter()
    cfg = DiffusionConfig(dt=1e-4, t_max=1.0, record_times=(1.0,))
    z = simulate_z(0.0, cfg, derive_stream(SEED, "acceptance-7"), 10_000).at(1.0)
    se = z.std(ddof=1) / math.sqrt(z.size)
    ok = abs(z.mean() - 1.0) < 3 * se
    assert record("7 E Z(1) = 1", ok, t, f"mean {z.mean():.4f}, SE {se:.4f}")


def test_c8_spde_vs_sde():
    t = time.perf_counter()
    cuts, times = [0.25, 0.5, 0.75, 1.0], [0.25, 0.5, 1.0]
    spde = spde_marginals(cuts, times, 10_000, derive_stream(SEED, "acceptance-8a"), z=1.0, dt=1e-4)
    sde = simulate_u_system(cuts, DiffusionConfig(dt=1e-4, t_max=1.0, record_times=tuple(times)),
                            derive_stream(SEED, "acceptance-8b"), 10_000)
    reps = [ks_two_sample(spde[i, :, k], sde.at(s)[:, k]) for i, s in enumerate(times) for k in range(len(cuts))]
    ok = all(r.passed for r in reps)
    detail = f"min KS p {min(r.p_value for r in reps):.3g} over {len(reps)} cells"
    assert record("8 SPDE vs SDE marginals", ok, t, detail)


@pytest.fixture(scope="module")
def depth10():
    return solve_flow(ExactBandNoise(derive_stream(SEED, "acceptance-9"), 1e-3, 100), 1.0, 0.0, 10, 1.0)


def test_c9a_shocks(depth10):
    t = time.perf_counter()
    Q = np.array([shocks(depth10, 0.0, 1.0, r)[1] for r in range(depth10.replicas)])
    frac = float(np.mean(Q > depth10.threshold**2))
    assert record("9a shocks occur", frac >= 0.99, t, f"{frac:.0%} of replicas have Q(0,1) above the grid threshold")


def test_c9b_q_identity(depth10):
    # expected to fail: the identity holds in mean; pathwise it misses a martingale term
    t = time.perf_counter()
    rep = q_growth_check(depth10)
    assert record("9b Q-identity residual", rep.passed, t, f"median relative residual {rep.median:.3f} (target < 0.05)")


def test_c10_main_convergence():
    t = time.perf_counter()
    dist = solve_gibbs(SPECS["D=2 uniform"])
    cuts, n_list = [0.25, 0.5, 0.75, 1.0], [20, 2000]
    rows = convergence_report(dist, n_list, cuts, [0.5], 10_000, derive_stream(SEED, "acceptance-10"), z=1.0, dt=1e-4)
    by = {(r.n, r.x): r.report for r in rows}
    shrinks = sum(by[(20, x)].statistic > by[(2000, x)].statistic for x in cuts)
    passes = all(by[(2000, x)].passed for x in cuts)
    ok = shrinks >= 3 and passes
    detail = (
        f"KS stat n=20 -> 2000: "
        + ", ".join(f"{by[(20, x)].statistic:.3f}->{by[(2000, x)].statistic:.3f}" for x in cuts)
        + f"; p at n=2000: " + ", ".join(f"{by[(2000, x)].p_value:.3g}" for x in cuts)
    )
    assert record("10 tree -> SPDE marginals", ok, t, detail)


def test_c11_holder_battery(depth10):
    # descriptive: the tightness constants are existential, so only the report is required
    t = time.perf_counter()
    sol = solve_flow(ExactBandNoise(derive_stream(SEED, "acceptance-11"), 1e-3, 1), 1.0, 0.0, 10, 1.0)
    reps = [estimate_holder(sol, m, mesh_level=8) for m in range(2, 7)]
    fit = fit_envelope(reps)
    detail = f"sups {', '.join(f'{s:.2f}' for s in fit.sups)}; fitted gamma {fit.gamma_fit:.3f}, b {fit.b:.2f} (descriptive)"
    record("11 Hoelder battery", fit.admissible, t, detail)
    assert np.isfinite(fit.b) and len(fit.sups) == 5


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
