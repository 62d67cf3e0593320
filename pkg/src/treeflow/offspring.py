"""Critical offspring laws obtained from Gibbs weights on plane trees.

Each branching number ``i`` in ``0..D`` carries an energy ``E_i``.  The
critical law is ``p_i = C exp(-beta E_i) rho**i`` where ``rho`` is the unique
positive root making the law have mean one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InfeasibleSpec, NoConvergence

__all__ = [
    "EnergySpec",
    "OffspringDistribution",
    "solve_gibbs",
    "from_probabilities",
    "moment",
    "size_biased",
]


@dataclass(frozen=True)
class EnergySpec:
    D: int
    energies: tuple[float, ...]
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "energies", tuple(float(e) for e in self.energies))
        if self.D < 0:
            raise InfeasibleSpec(f"D must be >= 0, got {self.D}")
        if len(self.energies) != self.D + 1:
            raise InfeasibleSpec(
                f"expected {self.D + 1} energies for D={self.D}, got {len(self.energies)}"
            )
        if not all(math.isfinite(e) for e in self.energies):
            raise InfeasibleSpec("energies must be finite")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise InfeasibleSpec(f"beta must be positive, got {self.beta}")

    def log_weights(self) -> np.ndarray:
        return -self.beta * np.asarray(self.energies, dtype=float)


@dataclass(frozen=True)
class OffspringDistribution:
    """A critical offspring law on ``{0, ..., D}``.

    ``rho`` and ``C`` are ``nan`` when the law was given directly rather than
    solved from energies.
    """

    p: np.ndarray = field(repr=False)
    rho: float = math.nan
    C: float = math.nan
    residual: float = 0.0

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def D(self) -> int:
        return len(self.p) - 1

    @property
    def mu(self) -> float:
        """Variance of the law, ``B_2 - 1``."""
        return moment(self, 2) - 1.0

    @property
    def p0(self) -> float:
        return float(self.p[0])

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.p)
        c[-1] = 1.0
        return c

    @cached_property
    def size_biased_cdf(self) -> np.ndarray:
        c = np.cumsum(size_biased(self))
        c[-1] = 1.0
        return c

    def __repr__(self):
        probs = ", ".join(f"{x:.6g}" for x in self.p)
        return f"OffspringDistribution(p=[{probs}], rho={self.rho:.6g}, mu={self.mu:.6g})"


def _mean_gap(log_rho: float, logw: np.ndarray) -> float:
    # sign of sum_i (i - 1) w_i rho^i, evaluated with a shared scale to avoid overflow
    i = np.arange(len(logw))
    terms = logw + i * log_rho
    top = terms.max()
    return float(np.sum((i - 1) * np.exp(terms - top)))


def solve_gibbs(spec: EnergySpec, tol: float = 1e-12, max_iter: int = 400) -> OffspringDistribution:
    """Solve the Gibbs fixed point for ``rho`` by bisection and build ``p``."""
    if spec.D < 2:
        raise InfeasibleSpec(
            "a mean-one law with p_0 > 0 needs mass at some i >= 2; D < 2 is infeasible"
        )
    logw = spec.log_weights()

    # g(rho) < 0 near 0 (the i=0 term dominates) and > 0 for rho large
    lo, hi = -1.0, 1.0
    for _ in range(200):
        if _mean_gap(lo, logw) < 0:
            break
        lo *= 2.0
    else:
        raise NoConvergence("could not find a lower bracket for rho")
    for _ in range(200):
        if _mean_gap(hi, logw) > 0:
            break
        hi *= 2.0
    else:
        raise NoConvergence("could not find an upper bracket for rho")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _mean_gap(mid, logw) < 0:
            lo = mid
        else:
            hi = mid
    log_rho = 0.5 * (lo + hi)

    i = np.arange(spec.D + 1)
    unnorm = np.exp(logw + i * log_rho)
    total = unnorm.sum()
    p = unnorm / total
    p = p / p.sum()
    residual = abs(float(np.dot(i, p)) - 1.0)
    if residual > tol:
        raise NoConvergence(f"criticality residual {residual:.3g} exceeds tol {tol:.3g}")
    return OffspringDistribution(p=p, rho=math.exp(log_rho), C=1.0 / total, residual=residual)


def from_probabilities(p, tol: float = 1e-12) -> OffspringDistribution:
    """Wrap an explicit probability vector after checking it is a critical law."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) < 1:
        raise InfeasibleSpec("p must be a nonempty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InfeasibleSpec("probabilities must be finite and nonnegative")
    if abs(p.sum() - 1.0) > tol:
        raise InfeasibleSpec(f"probabilities sum to {p.sum():.15g}, not 1")
    mean = float(np.dot(np.arange(len(p)), p))
    if abs(mean - 1.0) > tol:
        raise InfeasibleSpec(f"offspring mean is {mean:.15g}, not 1")
    if p[0] <= 0:
        raise InfeasibleSpec("p_0 must be positive for a critical law with mu > 0")
    return OffspringDistribution(p=p / p.sum(), residual=abs(mean - 1.0))


def moment(dist: OffspringDistribution, n: int) -> float:
    """``B_n = sum_i i**n p_i`` (with ``0**0 = 1``)."""
    if n < 0:
        raise ValueError("moment order must be nonnegative")
    i = np.arange(len(dist.p), dtype=float)
    return float(np.dot(i**n, dist.p))


def size_biased(dist: OffspringDistribution) -> np.ndarray:
    """The size-biased companion ``i * p_i``; a probability vector because ``B_1 = 1``."""
    return np.arange(len(dist.p)) * dist.p
