"""Finite-dimensional limit diffusions, simulated with clamped Euler-Maruyama.

* ``Z``: ``dZ = dt + sqrt(Z) dW`` (total mass),
* ``V``: ``dV_k = V_k / |V|_1 dt + sqrt(V_k) dW_k`` (subpopulations),
* ``U``: partial sums of ``V`` started from the gaps of a partition.

All simulators run many replicas at once; a replica is a column of the
returned arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRun

__all__ = ["DiffusionConfig", "DiffusionPaths", "simulate_z", "simulate_v_system", "simulate_u_system"]


@dataclass(frozen=True)
class DiffusionConfig:
    dt: float = 1e-4
    t_max: float = 1.0
    # times at which to store the state; None stores every step
    record_times: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_max >= 0:
            raise ValueError(f"t_max must be nonnegative, got {self.t_max}")
        if self.record_times is not None:
            object.__setattr__(self, "record_times", tuple(float(t) for t in self.record_times))
            if any(t < 0 or t > self.t_max + 1e-12 for t in self.record_times):
                raise ValueError("record_times must lie in [0, t_max]")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def record_steps(self) -> np.ndarray:
        if self.record_times is None:
            return np.arange(self.n_steps + 1)
        return np.array([int(round(t / self.dt)) for t in self.record_times], dtype=int)


@dataclass
class DiffusionPaths:
    """``values`` has shape ``(len(times), replicas)`` or ``(len(times), replicas, m)``."""

    times: np.ndarray
    values: np.ndarray

    def at(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9:
            raise KeyError(f"time {t} was not recorded")
        return self.values[idx]


def _recorder(config: DiffusionConfig):
    steps = config.record_steps()
    order = np.argsort(steps, kind="stable")
    return steps, order


def simulate_z(z0: float, config: DiffusionConfig, rng: np.random.Generator, replicas: int = 1) -> DiffusionPaths:
    if z0 < 0:
        raise ValueError("z0 must be nonnegative")
    steps, order = _recorder(config)
    out = np.empty((len(steps), replicas))
    Z = np.full(replicas, float(z0))
    dt, sq = config.dt, np.sqrt(config.dt)
    k = 0
    for step in range(config.n_steps + 1):
        while k < len(order) and steps[order[k]] == step:
            out[order[k]] = Z
            k += 1
        if step == config.n_steps or k == len(order):
            break
        Z = np.maximum(Z + dt + np.sqrt(Z) * sq * rng.standard_normal(replicas), 0.0)
    return DiffusionPaths(times=steps * dt, values=out)


def simulate_v_system(v0, config: DiffusionConfig, rng: np.random.Generator, replicas: int = 1) -> DiffusionPaths:
    v0 = np.asarray(v0, dtype=float)
    if v0.ndim != 1 or np.any(v0 < 0) or v0.sum() <= 0:
        raise ValueError("v0 must be a nonnegative vector with positive sum")
    m = len(v0)
    steps, order = _recorder(config)
    out = np.empty((len(steps), replicas, m))
    V = np.tile(v0, (replicas, 1))
    dt, sq = config.dt, np.sqrt(config.dt)
    k = 0
    for step in range(config.n_steps + 1):
        while k < len(order) and steps[order[k]] == step:
            out[order[k]] = V
            k += 1
        if step == config.n_steps or k == len(order):
            break
        total = V.sum(axis=1, keepdims=True)
        noise = np.sqrt(V) * sq * rng.standard_normal((replicas, m))
        # a coordinate at 0 has zero drift and zero noise, so absorption is exact;
        # the clamp only removes discretization overshoot
        V = np.maximum(V + V / total * dt + noise, 0.0)
        if np.any(V.sum(axis=1) == 0):
            raise DegenerateRun(f"total population hit 0 at t={(step + 1) * dt:.6g}")
    return DiffusionPaths(times=steps * dt, values=out)


def simulate_u_system(x_cuts, config: DiffusionConfig, rng: np.random.Generator, replicas: int = 1) -> DiffusionPaths:
    """Cumulative system: ``U_k`` is the progeny of ``[0, x_k]``."""
    x = np.asarray(x_cuts, dtype=float)
    if x.ndim != 1 or len(x) == 0 or x[0] < 0 or np.any(np.diff(x) < 0):
        raise ValueError("x_cuts must be a nonempty nondecreasing vector in [0, inf)")
    gaps = np.diff(np.concatenate([[0.0], x]))
    paths = simulate_v_system(gaps, config, rng, replicas)
    return DiffusionPaths(times=paths.times, values=np.cumsum(paths.values, axis=2))
