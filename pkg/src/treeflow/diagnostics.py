"""Checks that tie the discrete trees to their continuum limit."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from .errors import EmptySample
from .offspring import OffspringDistribution
from .trees import enumerate_continuations, sample_block_counts

__all__ = [
    "IdentityRow",
    "check_enumeration_identities",
    "HolderReport",
    "EnvelopeFit",
    "estimate_holder",
    "fit_envelope",
    "CompareReport",
    "ks_two_sample",
    "tree_marginals",
    "spde_marginals",
    "ConvergenceRow",
    "convergence_report",
    "QGrowthReport",
    "q_growth_check",
    "mean_increment_check",
]


# ---------------------------------------------------------------------------
# exact enumeration


@dataclass(frozen=True)
class IdentityRow:
    name: str
    k: int
    l: int
    computed: float
    expected: float

    @property
    def error(self) -> float:
        return abs(self.computed - self.expected)

    def passed(self, tol: float = 1e-12) -> bool:
        return self.error <= tol


def check_enumeration_identities(dist: OffspringDistribution, k_max: int = 3, max_size: int = 16):
    """Conditional moments of one step of the chain, by summing the kernel.

    Rows are named ``X'`` (``E[X'|X=k] = k + mu``), ``V'`` (``E[V'|l,k] =
    l(1 + mu/k)``), ``V'/X'`` with the claimed right-hand side ``l/k -
    p_0^k/k``, and ``V'/X' (martingale)`` with ``l/k``, which is what the
    kernel actually gives.
    """
    mu, p0 = dist.mu, dist.p0
    rows = []
    for k in range(1, k_max + 1):
        conts = enumerate_continuations(k, dist, max_size=max_size)
        probs = np.array([p for _, p in conts])
        sizes = np.array([len(g) for g, _ in conts], dtype=float)
        counts = np.array([g.child_counts(k) for g, _ in conts], dtype=float)
        rows.append(IdentityRow("sum", k, k, math.fsum(probs), 1.0))
        rows.append(IdentityRow("X'", k, k, math.fsum(probs * sizes), k + mu))
        for l in range(0, k + 1):
            V = counts[:, :l].sum(axis=1)
            rows.append(IdentityRow("V'", k, l, math.fsum(probs * V), l * (1 + mu / k)))
            ratio = math.fsum(probs * V / sizes)
            claimed = 0.0 if l == 0 else l / k - p0**k / k
            rows.append(IdentityRow("V'/X'", k, l, ratio, claimed))
            rows.append(IdentityRow("V'/X' (martingale)", k, l, ratio, l / k))
    return rows


def mean_increment_check(dist: OffspringDistribution, n_generations: int, replicas: int, rng) -> dict:
    """Empirical ``E[X_{m+1} - X_m]`` per generation against ``mu`` (in standard errors)."""
    sizes = sample_block_counts(dist, [1], n_generations, rng, replicas)[:, :, 0].astype(float)
    inc = np.diff(sizes, axis=0)
    se = inc.std(axis=1, ddof=1) / math.sqrt(replicas)
    z = (inc.mean(axis=1) - dist.mu) / np.where(se > 0, se, 1.0)
    return {"mu": dist.mu, "mean_increment": inc.mean(axis=1).tolist(), "max_abs_z": float(np.abs(z).max())}


# ---------------------------------------------------------------------------
# Hölder battery


@dataclass
class HolderReport:
    m: int
    beta: float
    alpha: float
    points: np.ndarray = field(repr=False)  # rows (t0, x, H)
    sup: float = 0.0
    profile_holder: float = 0.0
    envelope: float | None = None

    @property
    def within_envelope(self) -> bool | None:
        if self.envelope is None:
            return None
        return max(self.sup, self.profile_holder) <= self.envelope


@dataclass
class EnvelopeFit:
    levels: list[int]
    sups: list[float]
    gamma_fit: float
    b: float
    gamma_bound: float = 3 / 8

    @property
    def admissible(self) -> bool:
        return bool(np.isfinite(self.b) and self.gamma_fit < self.gamma_bound)


def _holder_constant(times: np.ndarray, paths: np.ndarray, beta: float) -> np.ndarray:
    """``max |p(t) - p(s)| / |t - s|**beta`` over the stored mesh, per column."""
    best = np.zeros(paths.shape[1])
    for lag in range(1, len(times)):
        num = np.abs(paths[lag:] - paths[:-lag])
        den = (times[lag:] - times[:-lag]) ** beta
        best = np.maximum(best, (num / den[:, None]).max(axis=0))
    return best


def _trajectory_source(flow, mesh_level: int, replica: int):
    """Adapter returning ``(times, paths)`` for start points ``xs`` at ``t0``."""
    mesh = np.arange(2**mesh_level + 1) / 2**mesh_level
    if hasattr(flow, "trajectory_from"):

        def profile(t):
            return flow.z_at(t, replica)

        def paths(xs, t0):
            times = mesh[(mesh >= t0 - 1e-12) & (mesh <= flow.horizon + 1e-12)]
            _, vals = flow.trajectory_from(xs, t0, times, replica)
            return times, vals

    else:

        def profile(t):
            return float(flow.profile(t))

        def paths(xs, t0):
            times = mesh[mesh >= t0 - 1e-12]
            return times, flow.trajectory(xs, t0, times)

    return profile, paths


def estimate_holder(flow, m: int, beta: float = 0.3, alpha: float = 0.2, mesh_level: int = 8,
                    b: float | None = None, gamma: float = 0.28, replica: int = 0) -> HolderReport:
    """Empirical Hölder constants of trajectories started on the grid ``R_m``.

    ``flow`` is a :class:`~treeflow.embedding.RescaledFlow` or a
    :class:`~treeflow.spde.SheetFlowSolution` recorded on the dyadic mesh of
    level ``mesh_level`` over ``[0, 1]``.
    """
    profile, paths = _trajectory_source(flow, mesh_level, replica)
    rows = []
    n_x = int(math.floor(2 ** (m * (1 + alpha))))
    for k in range(2**m + 1):
        t0 = k / 2**m
        top = profile(t0)
        xs = np.arange(n_x + 1) / 2**m
        xs = xs[xs < top]
        if len(xs) == 0:
            continue
        times, vals = paths(xs, t0)
        if len(times) < 2:
            H = np.zeros(len(xs))
        else:
            H = _holder_constant(times, vals.reshape(len(times), len(xs)), beta)
        rows.extend(zip(np.full(len(xs), t0), xs, H))
    pts = np.array(rows, dtype=float).reshape(-1, 3)
    sup = float(pts[:, 2].max()) if len(pts) else 0.0
    mesh = np.arange(2**mesh_level + 1) / 2**mesh_level
    zpath = np.array([profile(t) for t in mesh])[:, None]
    hz = float(_holder_constant(mesh, zpath, beta)[0])
    env = None if b is None else b * 2 ** (gamma * m)
    return HolderReport(m=m, beta=beta, alpha=alpha, points=pts, sup=sup, profile_holder=hz, envelope=env)


def fit_envelope(reports) -> EnvelopeFit:
    """Least-squares ``log2 sup_m ~ log2 b + gamma m``; ``b`` is then raised so
    the envelope covers every level."""
    levels = [r.m for r in reports]
    sups = [max(r.sup, r.profile_holder) for r in reports]
    pos = [(m, s) for m, s in zip(levels, sups) if s > 0]
    if len(pos) < 2:
        return EnvelopeFit(levels, sups, 0.0, max(sups, default=0.0))
    ms, ss = np.array(pos).T
    gamma, _ = np.polyfit(ms, np.log2(ss), 1)
    b = float(np.max(ss / 2 ** (gamma * ms)))
    return EnvelopeFit(levels, sups, float(gamma), b)


# ---------------------------------------------------------------------------
# two-sample comparisons


@dataclass(frozen=True)
class CompareReport:
    name: str
    n_a: int
    n_b: int
    statistic: float
    p_value: float
    level: float = 1e-3

    @property
    def passed(self) -> bool:
        return self.p_value > self.level

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def ks_two_sample(a, b, level: float = 1e-3, name: str = "ks") -> CompareReport:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be nonempty")
    res = stats.ks_2samp(a, b)
    return CompareReport(name, a.size, b.size, float(res.statistic), float(res.pvalue), level)


def tree_marginals(dist: OffspringDistribution, n: int, cuts, t_list, replicas: int, rng, z: float = 1.0):
    """Samples of ``U_n(x_k, 0, t)`` from trees started with ``[mu n z] + 1`` vertices.

    Returns an array of shape ``(len(t_list), replicas, len(cuts))``.  The
    population of column ``m`` spans ``[0, X_m - 1]``; the cut ``x`` becomes
    the vertex coordinate ``round(x mu n)`` and ``U_n`` is the progeny of the
    vertices up to it, minus one, over ``mu n``.
    """
    scale = dist.mu * n
    x0 = int(math.floor(scale * z)) + 1
    v = np.minimum(np.round(np.asarray(cuts, dtype=float) * scale).astype(int), x0 - 1)
    if np.any(np.diff(v) < 0) or v[0] < 0:
        raise ValueError("cuts must be nondecreasing in [0, z]")
    ends = np.concatenate([v + 1, [x0]])
    blocks = np.diff(np.concatenate([[0], ends]))
    steps = [int(round(t * n)) for t in t_list]
    counts = sample_block_counts(dist, blocks, max(steps), rng, replicas, record_at=sorted(set(steps)))
    lookup = {s: i for i, s in enumerate(sorted(set(steps)))}
    cum = np.cumsum(counts, axis=2)[:, :, : len(v)]
    picked = np.stack([cum[lookup[s]] for s in steps])
    return np.maximum(picked - 1, 0) / scale


def spde_marginals(cuts, t_list, replicas: int, rng, z: float = 1.0, dt: float = 1e-4):
    """Samples of the SPDE flow's ``U(x_k, 0, t)``; cuts must be dyadic multiples of ``z``."""
    cuts = np.asarray(cuts, dtype=float)
    depth = 0
    while not np.allclose(cuts / z * 2**depth, np.round(cuts / z * 2**depth), atol=1e-12):
        depth += 1
        if depth > 12:
            raise ValueError("cuts must be dyadic fractions of z")
    from .spde import ExactBandNoise, solve_flow

    sol = solve_flow(ExactBandNoise(rng, dt, replicas), z, 0.0, depth, max(t_list), record_times=t_list)
    idx = np.round(cuts / z * 2**depth).astype(int)
    return np.stack([sol.at(t)[:, idx] for t in t_list])


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    x: float
    t: float
    report: CompareReport


def convergence_report(dist, n_list, cuts, t_list, replicas: int, rng, reference=None,
                       z: float = 1.0, dt: float = 1e-4, level: float = 1e-3):
    """KS comparisons of tree marginals against the SPDE flow, for each ``n``.

    ``reference`` may hold precomputed :func:`spde_marginals` output.
    """
    if reference is None:
        reference = spde_marginals(cuts, t_list, replicas, rng, z=z, dt=dt)
    rows = []
    for n in n_list:
        sample = tree_marginals(dist, n, cuts, t_list, replicas, rng, z=z)
        for it, t in enumerate(t_list):
            for k, x in enumerate(cuts):
                rep = ks_two_sample(sample[it, :, k], reference[it, :, k], level, f"n={n} x={x} t={t}")
                rows.append(ConvergenceRow(int(n), float(x), float(t), rep))
    return rows


# ---------------------------------------------------------------------------
# quadratic variation growth


@dataclass
class QGrowthReport:
    times: np.ndarray
    residual: np.ndarray  # (steps + 1, replicas), relative to int Z
    tolerance: float = 0.05

    @property
    def final(self) -> np.ndarray:
        return self.residual[-1]

    @property
    def median(self) -> float:
        return float(np.median(self.final))

    @property
    def passed(self) -> bool:
        return self.median < self.tolerance


def q_growth_check(solution, tolerance: float = 0.05) -> QGrowthReport:
    """``|Q(t) - 2 int Q/Z - int Z| / int Z`` along each replica (trapezoid rule)."""
    Q, Z, dt = solution.Q, solution.Z, solution.dt
    iZ = cumulative_trapezoid(Z, dx=dt, axis=0, initial=0.0)
    iQZ = cumulative_trapezoid(Q / Z, dx=dt, axis=0, initial=0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        res = np.where(iZ > 0, np.abs(Q - 2 * iQZ - iZ) / iZ, 0.0)
    return QGrowthReport(times=solution.step_times, residual=res, tolerance=tolerance)
