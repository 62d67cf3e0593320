"""Planar embedding of a sampled tree and the monotone flow it carries.

Vertex ``i`` of generation ``m`` sits at ``(m, i - 1)``.  Between two columns,
parent-child edges and auxiliary edges form an ordered family of "rays"
``(m, src) -> (m + 1, dst)``; consecutive rays bound a trapezoid (or a
triangle) and the flow interpolates linearly across each one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomain, OutOfRange
from .graphs import MonotoneGraph, compose, hausdorff_rho
from .trees import GenerationChain

__all__ = [
    "PlanarEmbedding",
    "TrapezoidCell",
    "RescaledFlow",
    "embed",
    "flow_graph",
    "rescale",
    "trajectory",
    "lu_distance",
    "foliation_rows",
    "FOLIATION_FIELDS",
]

REGULAR, TYPE_I, TYPE_II = 0, 1, 2


@dataclass(frozen=True)
class TrapezoidCell:
    m: int
    i00: int
    i01: int
    i10: int
    i11: int

    @property
    def corners(self):
        m = self.m
        return (m, self.i00), (m, self.i01), (m + 1, self.i10), (m + 1, self.i11)

    def point(self, alpha: float, s: float) -> tuple[float, float]:
        """Bilinear coordinates: ``alpha`` across the cell, ``s`` along time."""
        left = self.i00 + alpha * (self.i01 - self.i00)
        right = self.i10 + alpha * (self.i11 - self.i10)
        return self.m + s, left + s * (right - left)

    def alpha_at(self, y: float, s: float) -> float:
        lo = self.i00 + s * (self.i10 - self.i00)
        hi = self.i01 + s * (self.i11 - self.i01)
        return (y - lo) / (hi - lo)


@dataclass
class PlanarEmbedding:
    chain: GenerationChain
    rays: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = field(repr=False)

    @property
    def n_generations(self) -> int:
        return self.chain.n_generations

    @property
    def heights(self) -> np.ndarray:
        """Column heights ``X_m - 1``."""
        return (self.chain.sizes - 1).astype(float)

    def profile(self, t):
        """Cross-section height at (possibly fractional) time ``t``."""
        return np.interp(t, np.arange(self.n_generations + 1), self.heights)

    def vertices(self, m: int) -> np.ndarray:
        return np.column_stack([np.full(self.chain.sizes[m], m), np.arange(self.chain.sizes[m])])

    def segments(self, m: int) -> dict[str, list]:
        """Regular and auxiliary segments between columns ``m`` and ``m + 1``,
        plus the vertical type III segments of column ``m``."""
        src, dst, kind = self.rays[m]
        out = {"regular": [], "I": [], "II": [], "III": []}
        names = {REGULAR: "regular", TYPE_I: "I", TYPE_II: "II"}
        for a, b, k in zip(src, dst, kind):
            out[names[int(k)]].append(((m, int(a)), (m + 1, int(b))))
        out["III"] = [((m, i), (m, i + 1)) for i in range(self.chain.sizes[m] - 1)]
        return out

    def cells(self, m: int) -> list[TrapezoidCell]:
        src, dst, _ = self.rays[m]
        return [
            TrapezoidCell(m, int(src[k]), int(src[k + 1]), int(dst[k]), int(dst[k + 1]))
            for k in range(len(src) - 1)
        ]


def _column_rays(counts: np.ndarray):
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    reps = np.maximum(counts, 1)
    src = np.repeat(np.arange(len(counts)), reps)
    first = np.repeat(starts, reps)
    offset = np.arange(len(src)) - np.repeat(np.cumsum(reps) - reps, reps)
    childless = np.repeat(counts == 0, reps)
    # a childless vertex points at the last child of the vertices before it
    dst = np.where(childless, np.maximum(first - 1, 0), first + offset)
    kind = np.where(childless, np.where(first == 0, TYPE_II, TYPE_I), REGULAR)
    return src.astype(np.int64), dst.astype(np.int64), kind.astype(np.int8)


def embed(chain: GenerationChain) -> PlanarEmbedding:
    return PlanarEmbedding(chain=chain, rays=[_column_rays(np.asarray(c)) for c in chain.counts])


def _column_graph(emb: PlanarEmbedding, m: int, s0: float, s1: float) -> MonotoneGraph:
    src, dst, _ = emb.rays[m]
    d = (dst - src).astype(float)
    return MonotoneGraph(np.column_stack([src + s0 * d, src + s1 * d]))


def _column_push(emb: PlanarEmbedding, m: int, s0: float, s1: float, y: np.ndarray) -> np.ndarray:
    """Right-continuous image of the points ``y`` under the column map."""
    src, dst, _ = emb.rays[m]
    d = (dst - src).astype(float)
    a = src + s0 * d
    b = src + s1 * d
    idx = np.clip(np.searchsorted(a, y, side="right") - 1, 0, len(a) - 1)
    nxt = np.minimum(idx + 1, len(a) - 1)
    gap = a[nxt] - a[idx]
    frac = np.where(gap > 0, (y - a[idx]) / np.where(gap > 0, gap, 1.0), 0.0)
    return b[idx] + np.clip(frac, 0.0, 1.0) * (b[nxt] - b[idx])


def _spans(t0: float, t1: float):
    """Split ``[t0, t1]`` into per-column pieces ``(m, s0, s1)``."""
    m = int(math.floor(t0))
    out = []
    while True:
        s0 = t0 - m if not out else 0.0
        if t1 <= m + 1:
            out.append((m, s0, t1 - m))
            return out
        out.append((m, s0, 1.0))
        m += 1


def flow_graph(emb: PlanarEmbedding, t0: float, t1: float) -> MonotoneGraph:
    """The embedded flow's graph from time ``t0`` to ``t1`` (unscaled)."""
    n = emb.n_generations
    if not 0 <= t0 <= t1 <= n:
        raise OutOfRange(f"need 0 <= t0 <= t1 <= {n}, got ({t0}, {t1})")
    if t0 == t1:
        return MonotoneGraph.identity(float(emb.profile(t0)))
    if t0 == n:
        return MonotoneGraph.identity(float(emb.heights[-1]))
    graph = None
    for m, s0, s1 in _spans(t0, t1):
        if m >= n:
            break
        step = _column_graph(emb, m, s0, s1)
        graph = step if graph is None else compose(step, graph)
    return graph


@dataclass
class RescaledFlow:
    """The embedded flow with both coordinates divided by ``mu * n`` and time by ``n``."""

    embedding: PlanarEmbedding
    n: float
    mu: float

    @property
    def scale(self) -> float:
        return 1.0 / (self.mu * self.n)

    @property
    def horizon(self) -> float:
        return self.embedding.n_generations / self.n

    def profile(self, t):
        return self.embedding.profile(np.asarray(t, dtype=float) * self.n) * self.scale

    def graph(self, t0: float, t1: float) -> MonotoneGraph:
        return flow_graph(self.embedding, t0 * self.n, t1 * self.n).scaled(self.scale)

    def trajectory(self, x, t0: float, times) -> np.ndarray:
        return trajectory(self, x, t0, times)


def rescale(emb: PlanarEmbedding, n: float, mu: float) -> RescaledFlow:
    if n < 1 or mu <= 0:
        raise ValueError("need n >= 1 and mu > 0")
    return RescaledFlow(embedding=emb, n=n, mu=mu)


def _push(emb: PlanarEmbedding, y: np.ndarray, t0: float, times: np.ndarray) -> np.ndarray:
    """Right-continuous trajectories of the points ``y`` from ``t0`` (unscaled)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty((len(times), len(y)))
    order = np.argsort(times, kind="stable")
    current, t = y.copy(), t0
    for idx in order:
        target = times[idx]
        if target > t:
            for m, s0, s1 in _spans(t, target):
                if m < emb.n_generations and s1 > s0:
                    current = _column_push(emb, m, s0, s1, current)
            t = target
        out[idx] = current
    return out


def trajectory(flow: RescaledFlow, x, t0: float, times) -> np.ndarray:
    """``U_n(x, t0, t)`` at the requested times (right-continuous selection).

    ``x`` may be a scalar or an array; the result has shape ``(len(times),)``
    or ``(len(times), len(x))``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < t0) or np.any(times > flow.horizon + 1e-12) or t0 < 0:
        raise OutOfRange("trajectory times must satisfy t0 <= t <= horizon")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    top = float(flow.profile(t0))
    if np.any(xs < 0) or np.any(xs > top * (1 + 1e-12) + 1e-15):
        raise OutOfDomain(f"x must lie in [0, Z_n(t0)] = [0, {top:.6g}]")
    y = np.minimum(xs / flow.scale, flow.embedding.profile(t0 * flow.n))
    m0 = t0 * flow.n
    if abs(m0 - round(m0)) <= 1e-9:
        # at a column, points within rounding of a vertex are that vertex (the flow fans out there)
        near = np.round(y)
        y = np.where(np.abs(y - near) <= 1e-9 * np.maximum(1.0, y), near, y)
        m0 = float(round(m0))
    out = _push(flow.embedding, y, m0, times * flow.n) * flow.scale
    return out[:, 0] if np.ndim(x) == 0 else out


def lu_distance(flow_a, flow_b, horizon: int, mesh) -> float:
    """Locally uniform distance restricted to pairs of mesh times.

    ``rho_m`` is the largest graph distance over mesh pairs inside ``[0, m]``;
    horizons beyond ``horizon`` reuse ``rho_horizon``, which keeps the sum a
    lower bound for the true value.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    mesh = np.unique(np.asarray(mesh, dtype=float))
    mesh = mesh[(mesh >= 0) & (mesh <= horizon)]
    worst = np.zeros(horizon + 1)
    for i, t0 in enumerate(mesh):
        for t1 in mesh[i:]:
            d = hausdorff_rho(flow_a.graph(t0, t1), flow_b.graph(t0, t1))
            m = max(1, int(math.ceil(t1)))
            worst[m] = max(worst[m], d)
    rho = np.maximum.accumulate(worst)[1:]
    capped = np.minimum(rho, 1.0)
    weights = 2.0 ** -np.arange(1, horizon + 1)
    return float(np.dot(weights, capped) + 2.0**-horizon * capped[-1])


FOLIATION_FIELDS = ("replica", "t", "trajectory_id", "x0", "value")


def foliation_rows(flow: RescaledFlow, every: int = 10, parts: int = 10, replica: int = 0):
    """Progeny trajectories for a foliation picture.

    Every ``every``-th generation the population is cut into about ``parts``
    equal pieces and the trajectory from each cut point is followed to the end
    of the chain.  Yields dicts keyed by :data:`FOLIATION_FIELDS`.
    """
    emb = flow.embedding
    n_gen = emb.n_generations
    tid = 0
    for m in range(0, n_gen, every):
        height = emb.heights[m]
        cuts = np.unique(np.round(np.linspace(0, height, parts + 1)[1:]))
        times = np.arange(m, n_gen + 1, dtype=float)
        paths = _push(emb, cuts, float(m), times)
        for j, c in enumerate(cuts):
            for t, v in zip(times, paths[:, j]):
                yield {
                    "replica": replica,
                    "t": t / flow.n,
                    "trajectory_id": tid,
                    "x0": c * flow.scale,
                    "value": v * flow.scale,
                }
            tid += 1


def foliation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=FOLIATION_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
