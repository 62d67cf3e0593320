"""The infinite Markov tree on generations and its finite-N Gibbs ancestors.

A generation is stored by its parent map (1-based, nondecreasing).  Moving
from one generation to the next only depends on how many children each
vertex receives, so most routines work with child-count vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import BudgetExceeded, InvalidCuts
from .offspring import EnergySpec, OffspringDistribution, size_biased, solve_gibbs

__all__ = [
    "Generation",
    "GenerationChain",
    "ProgenyTable",
    "transition_probability",
    "enumerate_continuations",
    "sample_next",
    "sample_chain",
    "track_progeny",
    "sample_block_counts",
    "enumerate_plane_trees",
    "enumerate_gibbs_marginal",
    "GibbsMarginal",
]


@dataclass(frozen=True)
class Generation:
    parents: np.ndarray

    def __post_init__(self):
        parents = np.asarray(self.parents, dtype=np.int64)
        if parents.ndim != 1 or len(parents) < 1:
            raise ValueError("a generation has at least one vertex")
        if parents[0] < 1 or np.any(np.diff(parents) < 0):
            raise ValueError("parent indices must be positive and nondecreasing")
        parents.setflags(write=False)
        object.__setattr__(self, "parents", parents)

    def __len__(self):
        return len(self.parents)

    def __eq__(self, other):
        return isinstance(other, Generation) and np.array_equal(self.parents, other.parents)

    def __hash__(self):
        return hash(self.parents.tobytes())

    @classmethod
    def from_counts(cls, counts) -> "Generation":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(np.repeat(np.arange(1, len(counts) + 1), counts))

    @classmethod
    def root(cls, size: int = 1) -> "Generation":
        return cls(np.ones(size, dtype=np.int64))

    def continues(self, prev_size: int) -> bool:
        """``prev ⊲ self``: every parent index lies in the previous generation."""
        return int(self.parents[-1]) <= prev_size

    def child_counts(self, prev_size: int) -> np.ndarray:
        return np.bincount(self.parents - 1, minlength=prev_size)


def _size(g) -> int:
    return g if isinstance(g, (int, np.integer)) else len(g)


def transition_probability(g, g_next: Generation, dist: OffspringDistribution) -> float:
    """One-step kernel ``(|g'|/|g|) p_{i_1} ... p_{i_|g|}``; zero off the support."""
    k = _size(g)
    if not g_next.continues(k):
        return 0.0
    counts = g_next.child_counts(k)
    if counts.max() > dist.D:
        return 0.0
    return len(g_next) / k * float(np.prod(dist.p[counts]))


def enumerate_continuations(g, dist: OffspringDistribution, max_size: int = 16):
    """Every continuation of ``g`` with its kernel probability."""
    k = _size(g)
    if k * dist.D > max_size:
        raise BudgetExceeded(f"|g|*D = {k * dist.D} exceeds max_size={max_size}")
    out = []
    for counts in itertools.product(range(dist.D + 1), repeat=k):
        total = sum(counts)
        if total == 0:
            continue
        prob = total / k * float(np.prod(dist.p[list(counts)]))
        out.append((Generation.from_counts(counts), prob))
    return out


def _draw_counts(k: int, dist: OffspringDistribution, rng: np.random.Generator) -> np.ndarray:
    # inverse-CDF draws from one batch of uniforms: k counts, the spine, its size-biased count
    u = rng.random(k + 2)
    counts = np.searchsorted(dist.cdf, u[:k], side="right")
    spine = min(int(u[k] * k), k - 1)
    counts[spine] = np.searchsorted(dist.size_biased_cdf, u[k + 1], side="right")
    return counts


def sample_next(g, dist: OffspringDistribution, rng: np.random.Generator) -> Generation:
    """Draw the next generation: a uniform spine vertex gets a size-biased
    number of children, all other vertices i.i.d. ones."""
    return Generation.from_counts(_draw_counts(_size(g), dist, rng))


@dataclass
class GenerationChain:
    """Generations ``G_0, ..., G_n``; ``counts[m]`` holds the child counts of
    the vertices of generation ``m`` (so there are ``n`` count vectors)."""

    counts: list[np.ndarray] = field(repr=False)
    initial_size: int = 1

    @property
    def n_generations(self) -> int:
        return len(self.counts)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([self.initial_size] + [int(c.sum()) for c in self.counts], dtype=np.int64)

    def generation(self, m: int) -> Generation:
        if m == 0:
            return Generation.root(self.initial_size)
        return Generation.from_counts(self.counts[m - 1])

    @property
    def generations(self) -> list[Generation]:
        return [self.generation(m) for m in range(self.n_generations + 1)]


def sample_chain(
    dist: OffspringDistribution,
    n_generations: int,
    rng: np.random.Generator,
    initial_size: int = 1,
) -> GenerationChain:
    if n_generations < 0:
        raise ValueError("n_generations must be >= 0")
    counts = []
    k = initial_size
    for _ in range(n_generations):
        c = _draw_counts(k, dist, rng)
        counts.append(c)
        k = int(c.sum())
    return GenerationChain(counts=counts, initial_size=initial_size)


@dataclass
class ProgenyTable:
    """``U[j, c]``: progeny in generation ``origin + j`` of the first ``cuts[c]``
    vertices of generation ``origin``."""

    origin: int
    cuts: np.ndarray
    U: np.ndarray

    @property
    def V(self) -> np.ndarray:
        return np.diff(self.U, axis=1, prepend=0)


def track_progeny(chain: GenerationChain, n0: int, cuts) -> ProgenyTable:
    sizes = chain.sizes
    if not 0 <= n0 <= chain.n_generations:
        raise InvalidCuts(f"origin generation {n0} outside the chain")
    cuts = np.asarray(cuts, dtype=np.int64)
    if (
        cuts.ndim != 1
        or len(cuts) == 0
        or cuts[0] < 1
        or np.any(np.diff(cuts) <= 0)
        or cuts[-1] != sizes[n0]
    ):
        raise InvalidCuts(f"cuts must increase strictly within 1..{sizes[n0]} and end at it")
    rows = [cuts.copy()]
    current = cuts
    for m in range(n0, chain.n_generations):
        cum = np.concatenate([[0], np.cumsum(chain.counts[m])])
        current = cum[current]
        rows.append(current)
    return ProgenyTable(origin=n0, cuts=cuts, U=np.array(rows))


def sample_block_counts(
    dist: OffspringDistribution,
    blocks,
    n_steps: int,
    rng: np.random.Generator,
    replicas: int,
    record_at=None,
) -> np.ndarray:
    """Progeny sizes of consecutive vertex blocks, for many independent trees.

    The kernel only sees how many children each vertex has, and summing the
    i.i.d. counts inside a block is a multinomial draw, so the block sizes form
    an exact Markov chain of their own.  Returns an array of shape
    ``(len(record_at), replicas, len(blocks))``.
    """
    V = np.tile(np.asarray(blocks, dtype=np.int64), (replicas, 1))
    if np.any(V < 0) or np.any(V.sum(axis=1) < 1):
        raise ValueError("blocks must be nonnegative with a positive total")
    record_at = list(range(n_steps + 1)) if record_at is None else sorted(record_at)
    if record_at and record_at[-1] > n_steps:
        raise ValueError("record step beyond n_steps")
    pending = iter(record_at)
    nxt = next(pending, None)
    out = []
    support = np.arange(dist.D + 1)
    sb = size_biased(dist)
    rows = np.arange(replicas)
    for step in range(n_steps + 1):
        while nxt == step:
            out.append(V.copy())
            nxt = next(pending, None)
        if step == n_steps or nxt is None:
            break
        X = V.sum(axis=1)
        u = rng.random(replicas) * X
        spine_block = (u[:, None] >= np.cumsum(V, axis=1)).sum(axis=1)
        draws = V.copy()
        draws[rows, spine_block] -= 1
        new = rng.multinomial(draws, dist.p) @ support
        new[rows, spine_block] += rng.choice(support, size=replicas, p=sb)
        V = new
    return np.array(out)


# ---------------------------------------------------------------------------
# Finite-N Gibbs measures by exhaustive enumeration


@lru_cache(maxsize=None)
def _count_words(remaining: int, height: int, D: int) -> int:
    # Łukasiewicz words: `remaining` letters left, `height` open slots
    if height == 0:
        return 1 if remaining == 0 else 0
    if remaining < height:
        return 0
    return sum(_count_words(remaining - 1, height - 1 + c, D) for c in range(D + 1))


def count_plane_trees(N: int, D: int) -> int:
    return _count_words(N, 1, D)


def enumerate_plane_trees(N: int, D: int):
    """Yield preorder child-count sequences of all plane trees on ``N`` vertices
    with branching at most ``D``."""
    word: list[int] = []

    def rec(remaining, height):
        if height == 0:
            if remaining == 0:
                yield tuple(word)
            return
        if remaining < height:
            return
        for c in range(D + 1):
            word.append(c)
            yield from rec(remaining - 1, height - 1 + c)
            word.pop()

    yield from rec(N, 1)


def _truncated_shape(word: tuple[int, ...], depth: int) -> tuple[tuple[int, ...], ...]:
    """Breadth-first child counts of generations ``0..depth-1`` of a preorder word."""
    children: list[list[int]] = [[] for _ in word]
    stack: list[int] = []
    for v, c in enumerate(word):
        if stack:
            parent = stack[-1]
            children[parent].append(v)
            if len(children[parent]) == word[parent]:
                stack.pop()
        if c > 0:
            stack.append(v)
    level = [0]
    shape = []
    for _ in range(depth):
        shape.append(tuple(len(children[v]) for v in level))
        level = [w for v in level for w in children[v]]
    return tuple(shape)


def _shape_probability(shape, dist: OffspringDistribution) -> float:
    prob = 1.0
    k = 1
    for counts in shape:
        total = sum(counts)
        if k == 0 or total == 0:
            return 0.0
        prob *= total / k * float(np.prod(dist.p[list(counts)]))
        k = total
    return prob


def _limit_shapes(dist: OffspringDistribution, depth: int, budget: int):
    shapes = [((), 1)]
    for _ in range(depth):
        nxt = []
        for shape, k in shapes:
            if k * dist.D > budget:
                raise BudgetExceeded(f"limit-marginal enumeration needs |g|*D = {k * dist.D}")
            for counts in itertools.product(range(dist.D + 1), repeat=k):
                if sum(counts):
                    nxt.append((shape + (counts,), sum(counts)))
        shapes = nxt
    return [s for s, _ in shapes]


@dataclass
class GibbsMarginal:
    depth: int
    gibbs: dict
    limit: dict
    tv: float


def enumerate_gibbs_marginal(
    spec: EnergySpec,
    N: int,
    depth: int,
    max_trees: int = 500_000,
    max_size: int = 16,
    dist: OffspringDistribution | None = None,
) -> GibbsMarginal:
    """Exact depth-``depth`` marginal of the ``N``-vertex Gibbs measure, the
    same marginal of the infinite Markov tree, and their total variation."""
    n_trees = count_plane_trees(N, spec.D)
    if n_trees > max_trees:
        raise BudgetExceeded(f"{n_trees} plane trees on {N} vertices exceed max_trees={max_trees}")
    if n_trees == 0:
        raise BudgetExceeded(f"no plane trees on {N} vertices with branching <= {spec.D}")
    dist = solve_gibbs(spec) if dist is None else dist
    logw = spec.log_weights()

    log_weights: dict = {}
    for word in enumerate_plane_trees(N, spec.D):
        lw = float(sum(logw[c] for c in word))
        shape = _truncated_shape(word, depth)
        log_weights.setdefault(shape, []).append(lw)
    top = max(max(v) for v in log_weights.values())
    raw = {s: math.fsum(math.exp(w - top) for w in ws) for s, ws in log_weights.items()}
    total = math.fsum(raw.values())
    gibbs = {s: w / total for s, w in raw.items()}

    limit = {s: _shape_probability(s, dist) for s in _limit_shapes(dist, depth, max_size)}
    support = set(gibbs) | set(limit)
    tv = 0.5 * math.fsum(abs(gibbs.get(s, 0.0) - limit.get(s, 0.0)) for s in support)
    return GibbsMarginal(depth=depth, gibbs=gibbs, limit=limit, tv=min(max(tv, 0.0), 1.0))
