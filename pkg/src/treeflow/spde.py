"""Grid solution of the coalescing flow SPDE driven by a Brownian sheet.

A dyadic set of starting points ``x_j = j 2^-depth z`` is pushed forward by

    U_j <- U_j + (U_j / Z) dt + W([0, U_j] x [t, t + dt])

where every trajectory reads the same sheet, so the top one (``x = z``) is the
total mass ``Z``.  After each step the grid is made nondecreasing again by a
running maximum and capped at ``Z``; trajectories that meet never separate,
because from then on they receive identical drift and noise.

Two noise sources are provided.  :class:`ExactBandNoise` draws the sheet mass
of each band between consecutive trajectories exactly (variance = band width
times ``dt``) and is the default.  :class:`GridNoise` reads a pre-sampled
:class:`BrownianSheetGrid` with fixed cells, which couples runs at different
depths through one sheet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRun, LevelOutOfRange, OutOfRange
from .graphs import MonotoneGraph

__all__ = [
    "SheetConfig",
    "BrownianSheetGrid",
    "sample_sheet",
    "band_increment",
    "ExactBandNoise",
    "GridNoise",
    "SheetFlowSolution",
    "solve_flow",
    "graph_at",
    "shocks",
]


@dataclass(frozen=True)
class SheetConfig:
    dt: float = 1e-3
    dy: float = 2.0**-10
    y_max: float = 4.0
    t_max: float = 1.0

    def __post_init__(self):
        if not (self.dt > 0 and self.dy > 0):
            raise ValueError("dt and dy must be positive")
        if not (self.y_max > 0 and self.t_max >= 0):
            raise ValueError("y_max must be positive and t_max nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass
class BrownianSheetGrid:
    """Cell increments ``W(cell x [m dt, (m+1) dt])``, shape ``(n_steps, n_cells)``."""

    dt: float
    dy: float
    increments: np.ndarray = field(repr=False)
    rng: np.random.Generator = field(repr=False)

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def y_max(self) -> float:
        return self.increments.shape[1] * self.dy

    def extend(self, level: float) -> None:
        """Grow the space extent to cover ``level`` (new cells drawn from the sheet's own stream)."""
        need = int(math.ceil(level / self.dy)) - self.increments.shape[1]
        if need <= 0:
            return
        need = max(need, self.increments.shape[1])  # grow geometrically
        extra = self.rng.standard_normal((self.n_steps, need)) * math.sqrt(self.dy * self.dt)
        self.increments = np.concatenate([self.increments, extra], axis=1)
        self._cum = None

    def cumulative(self) -> np.ndarray:
        cum = getattr(self, "_cum", None)
        if cum is None:
            cum = np.concatenate(
                [np.zeros((self.n_steps, 1)), np.cumsum(self.increments, axis=1)], axis=1
            )
            self._cum = cum
        return cum


def sample_sheet(config: SheetConfig, rng: np.random.Generator) -> BrownianSheetGrid:
    n_cells = int(math.ceil(config.y_max / config.dy))
    inc = rng.standard_normal((config.n_steps, n_cells)) * math.sqrt(config.dy * config.dt)
    return BrownianSheetGrid(dt=config.dt, dy=config.dy, increments=inc, rng=rng)


def band_increment(sheet: BrownianSheetGrid, u, m: int, extend: bool = True):
    """Sheet mass of ``[0, u] x [m dt, (m+1) dt]``.

    Full cells below ``u`` contribute their draws; the cell straddling ``u``
    contributes its draw times ``sqrt(fraction)``, which keeps the variance
    equal to ``u dt`` and the coupling monotone in ``u``.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0):
        raise LevelOutOfRange("level must be nonnegative")
    top = float(u_arr.max()) if u_arr.size else 0.0
    if top > sheet.y_max:
        if not extend:
            raise LevelOutOfRange(f"level {top:.6g} above sheet extent {sheet.y_max:.6g}")
        sheet.extend(top)
    if not 0 <= m < sheet.n_steps:
        raise OutOfRange(f"step {m} outside sheet with {sheet.n_steps} steps")
    cells = u_arr / sheet.dy
    k = np.minimum(np.floor(cells).astype(np.int64), sheet.increments.shape[1] - 1)
    frac = np.clip(cells - k, 0.0, 1.0)
    row = sheet.increments[m]
    value = sheet.cumulative()[m][k] + np.sqrt(frac) * row[k]
    return float(value) if np.ndim(u) == 0 else value


class ExactBandNoise:
    """Exact sheet masses of the bands between sorted levels, for many replicas."""

    def __init__(self, rng: np.random.Generator, dt: float, replicas: int = 1):
        self.rng = rng
        self.dt = float(dt)
        self.replicas = int(replicas)

    def __call__(self, levels: np.ndarray, step: int) -> np.ndarray:
        widths = np.diff(levels, axis=1, prepend=0.0)
        draws = self.rng.standard_normal(levels.shape) * np.sqrt(np.maximum(widths, 0.0) * self.dt)
        return np.cumsum(draws, axis=1)


class GridNoise:
    """Noise read from a fixed-cell sheet (single replica)."""

    replicas = 1

    def __init__(self, sheet: BrownianSheetGrid):
        self.sheet = sheet
        self.dt = sheet.dt

    def __call__(self, levels: np.ndarray, step: int) -> np.ndarray:
        return band_increment(self.sheet, levels[0], step)[None, :]


@dataclass
class SheetFlowSolution:
    """Grid trajectories of the flow started at ``t0`` from ``[0, z]``.

    ``U`` has shape ``(len(times), replicas, len(x))``; ``Z`` and ``Q`` are kept
    at every step, shape ``(n_steps + 1, replicas)``.  ``merge_time[r, j]`` is
    when trajectories ``j`` and ``j + 1`` met (``inf`` if they never did).
    """

    t0: float
    z: float
    dt: float
    depth: int
    x: np.ndarray
    times: np.ndarray
    U: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    merge_time: np.ndarray = field(repr=False)
    threshold: float = 0.0

    @property
    def replicas(self) -> int:
        return self.U.shape[1]

    @property
    def horizon(self) -> float:
        return self.t0 + (self.Z.shape[0] - 1) * self.dt

    @property
    def step_times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.Z.shape[0])

    def _index(self, s: float) -> int:
        if s < self.t0 - 1e-12 or s > self.horizon + 1e-12:
            raise OutOfRange(f"time {s} outside [{self.t0}, {self.horizon}]")
        # requested times resolve to the nearest step within half a step
        idx = int(np.argmin(np.abs(self.times - s)))
        if abs(self.times[idx] - s) > 0.5 * self.dt + 1e-12:
            raise OutOfRange(f"time {s} was not recorded")
        return idx

    def z_at(self, s: float, replica: int = 0) -> float:
        return float(self.Z[int(round((s - self.t0) / self.dt)), replica])

    def at(self, s: float) -> np.ndarray:
        """Grid values at a recorded time, shape ``(replicas, len(x))``."""
        return self.U[self._index(s)]

    def trajectory_from(self, x, s0: float, times=None, replica: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Paths ``U(x, s0, t)`` re-anchored through the grid: the start point is
        located among the grid positions at ``s0`` and carried along by linear
        interpolation.  ``times`` defaults to every recorded time from ``s0`` on."""
        i0 = self._index(s0)
        base = self.U[i0, replica]
        if times is None:
            idx = np.nonzero(self.times >= self.times[i0] - 1e-12)[0]
        else:
            idx = np.array([self._index(t) for t in times], dtype=int)
            if np.any(idx < i0):
                raise OutOfRange("trajectory times must not precede s0")
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        paths = np.array([np.interp(xs, base, self.U[i, replica]) for i in idx]).reshape(len(idx), len(xs))
        return self.times[idx], paths


def solve_flow(
    noise,
    z: float,
    t0: float = 0.0,
    depth: int = 10,
    t_max: float = 1.0,
    record_times=None,
) -> SheetFlowSolution:
    """Integrate the grid flow from time ``t0`` to ``t_max``.

    ``noise`` is an :class:`ExactBandNoise` or :class:`GridNoise`; the number of
    replicas is taken from it.  ``record_times`` defaults to every step.
    """
    if z < 0:
        raise ValueError("z must be nonnegative")
    if t_max < t0:
        raise ValueError("t_max must be >= t0")
    dt = noise.dt
    n_steps = int(round((t_max - t0) / dt))
    R = noise.replicas
    x = np.linspace(0.0, z, 2**depth + 1)
    threshold = 4.0 * 2.0**-depth * z

    if record_times is None:
        rec_steps = np.arange(n_steps + 1)
    else:
        rec_steps = np.array([int(round((t - t0) / dt)) for t in record_times], dtype=int)
        if np.any(rec_steps < 0) or np.any(rec_steps > n_steps):
            raise OutOfRange("record_times must lie in [t0, t_max]")
    rec_steps = np.unique(rec_steps)
    slot = {int(s): i for i, s in enumerate(rec_steps)}

    U = np.tile(x, (R, 1))
    out = np.empty((len(rec_steps), R, len(x)))
    Zs = np.empty((n_steps + 1, R))
    Qs = np.zeros((n_steps + 1, R))
    merge_time = np.full((R, len(x) - 1), np.inf)
    merged = np.diff(U, axis=1) == 0
    merge_time[merged] = t0

    for step in range(n_steps + 1):
        Z = U[:, -1]
        Zs[step] = Z
        gaps = np.diff(U, axis=1)
        Qs[step] = np.where(gaps > threshold, gaps * gaps, 0.0).sum(axis=1)
        if step in slot:
            out[slot[step]] = U
        if step == n_steps:
            break
        ratio = np.where(Z[:, None] > 0, U / np.where(Z[:, None] > 0, Z[:, None], 1.0), 1.0)
        W = noise(U, step)
        Z_new = np.maximum(Z + dt + W[:, -1], 0.0)
        if z > 0 and np.any(Z_new == 0):
            raise DegenerateRun(f"Z hit 0 at t={t0 + (step + 1) * dt:.6g}")
        U = np.maximum(U + ratio * dt + W, 0.0)
        U = np.minimum(np.maximum.accumulate(U, axis=1), Z_new[:, None])
        U[:, -1] = Z_new
        now = np.diff(U, axis=1) == 0
        if np.any(merged & ~now):
            raise AssertionError("coalesced trajectories separated")
        fresh = now & ~merged
        merge_time[fresh] = t0 + (step + 1) * dt
        merged = now

    return SheetFlowSolution(
        t0=t0,
        z=z,
        dt=dt,
        depth=depth,
        x=x,
        times=t0 + rec_steps * dt,
        U=out,
        Z=Zs,
        Q=Qs,
        merge_time=merge_time,
        threshold=threshold,
    )


def graph_at(solution: SheetFlowSolution, s0: float, s1: float, replica: int = 0) -> MonotoneGraph:
    """``Gamma^{s0, s1}`` as the polyline through the grid points' positions at ``s0`` and ``s1``."""
    if s1 < s0:
        raise OutOfRange("need s0 <= s1")
    a = solution.U[solution._index(s0), replica]
    if s0 == s1:
        return MonotoneGraph.identity(float(a[-1]))
    b = solution.U[solution._index(s1), replica]
    return MonotoneGraph(np.column_stack([a, b]))


def shocks(solution: SheetFlowSolution, s0: float, s1: float, replica: int = 0):
    """Jumps of ``x -> U(x, s0, s1)`` resolved by the grid, and ``Q = sum jump**2``.

    A jump is a pair of neighbouring grid trajectories that sit within the
    detection threshold at ``s0`` but whose images at ``s1`` are more than the
    threshold apart.  Returns ``(list of (x, jump), Q)``.
    """
    if s1 < s0:
        raise OutOfRange("need s0 <= s1")
    if s0 == s1:
        return [], 0.0
    a = solution.U[solution._index(s0), replica]
    b = solution.U[solution._index(s1), replica]
    thr = solution.threshold
    da, db = np.diff(a), np.diff(b)
    hit = (da <= thr) & (db > thr)
    found = [(float(a[j]), float(db[j])) for j in np.nonzero(hit)[0]]
    return found, float(sum(j * j for _, j in found))
