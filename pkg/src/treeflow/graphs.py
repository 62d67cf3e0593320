"""Monotone graphs stored as polylines, with the two metrics and composition.

A graph is the continuous version of a nondecreasing map on ``[0, z0]``: the
curve includes a vertical segment at every jump.  Since maps vanish to the
left of 0, the curve always starts at the origin.
"""

from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainMismatch, OutOfDomain

__all__ = [
    "MonotoneGraph",
    "hausdorff_rho",
    "rotated_rho_prime",
    "compose",
    "quadratic_variation",
    "check_convergence",
    "ConvergenceReport",
]

_EPS = 1e-12


def _clean(xy: np.ndarray) -> np.ndarray:
    # merge runs of vertices closer than rounding noise; the endpoint stays exact
    tol = 1e-14 * max(1.0, float(np.abs(xy).max()))
    keep = np.ones(len(xy), dtype=bool)
    keep[1:] = np.abs(np.diff(xy, axis=0)).max(axis=1) > tol
    end = xy[-1].copy()
    xy = xy[keep]
    if len(xy) > 1:
        xy[-1] = end
    if len(xy) < 3:
        return xy
    # drop interior vertices where the polyline does not turn
    d1 = xy[1:-1] - xy[:-2]
    d2 = xy[2:] - xy[1:-1]
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    norms = np.hypot(*d1.T) * np.hypot(*d2.T)
    straight = np.abs(cross) <= 1e-14 * norms
    keep = np.concatenate([[True], ~straight, [True]])
    return xy[keep]


@dataclass(frozen=True)
class MonotoneGraph:
    """A monotone graph given by its polyline vertices ``xy`` (shape ``(n, 2)``)."""

    xy: np.ndarray = field(repr=False)

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float).reshape(-1, 2)
        if len(xy) == 0:
            raise ValueError("a monotone graph needs at least one vertex")
        if not np.all(np.isfinite(xy)):
            raise ValueError("vertices must be finite")
        if np.any(np.diff(xy, axis=0) < -_EPS * max(1.0, float(np.abs(xy).max()))):
            raise ValueError("both coordinates must be nondecreasing along the polyline")
        xy = np.maximum.accumulate(xy, axis=0)
        if abs(xy[0, 0]) > _EPS or xy[0, 1] < -_EPS:
            raise ValueError("a monotone graph starts on the y-axis at a nonnegative height")
        xy[0, 0] = 0.0
        xy[0, 1] = max(xy[0, 1], 0.0)
        if xy[0, 1] > 0:
            xy = np.vstack([[0.0, 0.0], xy])
        xy = _clean(xy)
        xy.setflags(write=False)
        object.__setattr__(self, "xy", xy)

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, z: float) -> "MonotoneGraph":
        return cls([[0.0, 0.0], [z, z]])

    @classmethod
    def from_function(cls, x, y) -> "MonotoneGraph":
        """Polyline through ``(x_i, y_i)``; repeated ``x`` values make jumps."""
        return cls(np.column_stack([x, y]))

    # -- accessors --------------------------------------------------------
    @property
    def x(self) -> np.ndarray:
        return self.xy[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.xy[:, 1]

    @property
    def z0(self) -> float:
        return float(self.xy[-1, 0])

    @property
    def z1(self) -> float:
        return float(self.xy[-1, 1])

    def __len__(self):
        return len(self.xy)

    def __repr__(self):
        return f"MonotoneGraph(z0={self.z0:.6g}, z1={self.z1:.6g}, vertices={len(self)})"

    def _check_domain(self, x: np.ndarray):
        tol = _EPS * max(1.0, self.z0)
        if np.any(x < -tol) or np.any(x > self.z0 + tol):
            raise OutOfDomain(f"x outside [0, {self.z0:.6g}]")

    def evaluate(self, x):
        """Right-continuous representative ``sup{y : (x, y) in graph}``."""
        xq = np.asarray(x, dtype=float)
        self._check_domain(xq)
        xs, ys = self.x, self.y
        xq = np.clip(xq, 0.0, self.z0)
        idx = np.searchsorted(xs, xq, side="right") - 1
        nxt = np.minimum(idx + 1, len(xs) - 1)
        dx = xs[nxt] - xs[idx]
        frac = np.where(dx > 0, (xq - xs[idx]) / np.where(dx > 0, dx, 1.0), 0.0)
        out = ys[idx] + frac * (ys[nxt] - ys[idx])
        return float(out) if np.ndim(out) == 0 else out

    def evaluate_left(self, x):
        """Lower end of the image: ``inf{y : (x, y) in graph}``."""
        xq = np.asarray(x, dtype=float)
        self._check_domain(xq)
        xs, ys = self.x, self.y
        xq = np.clip(xq, 0.0, self.z0)
        idx = np.searchsorted(xs, xq, side="left")
        prv = np.maximum(idx - 1, 0)
        dx = xs[idx] - xs[prv]
        frac = np.where(dx > 0, (xs[idx] - xq) / np.where(dx > 0, dx, 1.0), 0.0)
        out = ys[idx] - frac * (ys[idx] - ys[prv])
        return float(out) if np.ndim(out) == 0 else out

    def transpose(self) -> "MonotoneGraph":
        """The inverse relation, read with the roles of the axes swapped."""
        return MonotoneGraph(self.xy[:, ::-1])

    def scaled(self, factor: float) -> "MonotoneGraph":
        return MonotoneGraph(self.xy * factor)

    def rotated(self) -> tuple[np.ndarray, np.ndarray]:
        """Curve in the rotated frame: arclength-like ``s = x + y`` and ``g = y - x``."""
        return self.x + self.y, self.y - self.x

    def jumps(self) -> list[tuple[float, float]]:
        """``(location, height)`` of every vertical segment inside ``(0, z0]``."""
        xs, ys = self.x, self.y
        out = []
        i = 0
        n = len(xs)
        while i < n - 1:
            j = i
            while j < n - 1 and xs[j + 1] == xs[i]:
                j += 1
            if j > i and xs[i] > 0:
                out.append((float(xs[i]), float(ys[j] - ys[i])))
            i = max(j, i + 1)
        return out

    def densify(self, spacing: float) -> np.ndarray:
        """Points along the polyline at most ``spacing`` apart (vertices included)."""
        if len(self.xy) == 1:
            return self.xy.copy()
        pieces = []
        for a, b in zip(self.xy[:-1], self.xy[1:]):
            n = max(1, int(np.ceil(np.hypot(*(b - a)) / spacing)))
            t = np.arange(n)[:, None] / n
            pieces.append(a + t * (b - a))
        pieces.append(self.xy[-1:])
        return np.vstack(pieces)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "x", "y"])
        for x, y in self.xy:
            w.writerow([repr(float(x + y)), repr(float(x)), repr(float(y))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MonotoneGraph":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([[float(r["x"]), float(r["y"])] for r in rows])


# ---------------------------------------------------------------------------
# Hausdorff distance


def _point_segment_dist(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distances from each point in ``P`` (p, 2) to each segment ``[A_j, B_j]``."""
    d = B - A
    L2 = np.einsum("ij,ij->i", d, d)
    rel = P[:, None, :] - A[None, :, :]
    t = np.einsum("pjk,jk->pj", rel, d) / np.where(L2 > 0, L2, 1.0)
    t = np.clip(np.where(L2 > 0, t, 0.0), 0.0, 1.0)
    diff = rel - t[..., None] * d[None, :, :]
    return np.sqrt(np.einsum("pjk,pjk->pj", diff, diff))


def _segments(g: MonotoneGraph) -> tuple[np.ndarray, np.ndarray]:
    if len(g.xy) == 1:
        return g.xy, g.xy
    return g.xy[:-1], g.xy[1:]


def _directed_hausdorff(a: MonotoneGraph, b: MonotoneGraph, tol: float) -> float:
    A0, A1 = _segments(b)
    D = _point_segment_dist(a.xy, A0, A1)
    best = float(D.min(axis=1).max())
    if len(a.xy) == 1:
        return best
    # distance to each fixed segment is convex along a segment of `a`, so the
    # larger endpoint value bounds it; the min over segments bounds the envelope
    upper = np.maximum(D[:-1], D[1:]).min(axis=1)
    todo = np.flatnonzero(upper > best + tol)
    for i in todo:
        p, q = a.xy[i], a.xy[i + 1]
        heap = [(-float(upper[i]), 0.0, 1.0, D[i], D[i + 1])]
        while heap:
            neg_ub, lo, hi, dlo, dhi = heapq.heappop(heap)
            if -neg_ub <= best + tol:
                break
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                continue
            dmid = _point_segment_dist((p + mid * (q - p))[None, :], A0, A1)[0]
            best = max(best, float(dmid.min()))
            for l, h, dl, dh in ((lo, mid, dlo, dmid), (mid, hi, dmid, dhi)):
                ub = float(np.maximum(dl, dh).min())
                if ub > best + tol:
                    heapq.heappush(heap, (-ub, l, h, dl, dh))
    return best


def hausdorff_rho(g1: MonotoneGraph, g2: MonotoneGraph, tol: float = 1e-13) -> float:
    """Hausdorff distance between two graphs, exact up to ``tol``.

    Along a segment of one polyline, the distance to the other is the lower
    envelope of convex functions; branch and bound on that envelope finds its
    maximum.
    """
    if g1.xy.shape == g2.xy.shape and np.array_equal(g1.xy, g2.xy):
        return 0.0
    return max(_directed_hausdorff(g1, g2, tol), _directed_hausdorff(g2, g1, tol))


def rotated_rho_prime(g1: MonotoneGraph, g2: MonotoneGraph) -> float:
    """``|s1 - s2| + sup_{s <= min(s1, s2)} |g1(s) - g2(s)|`` in the rotated frame."""
    s1, h1 = g1.rotated()
    s2, h2 = g2.rotated()
    top = min(s1[-1], s2[-1])
    grid = np.union1d(s1[s1 <= top], s2[s2 <= top])
    grid = np.union1d(grid, [top])
    sup = float(np.max(np.abs(np.interp(grid, s1, h1) - np.interp(grid, s2, h2))))
    return abs(float(s1[-1] - s2[-1])) + sup


# ---------------------------------------------------------------------------
# Composition


def compose(g2: MonotoneGraph, g1: MonotoneGraph, tol: float = 1e-9) -> MonotoneGraph:
    """``g2 ∘ g1``: first apply ``g1``, then ``g2``.

    Built from the right-continuous representatives, so where ``g1`` collapses
    an interval onto a point at which ``g2`` jumps, the result jumps first and
    then stays flat.
    """
    scale = max(1.0, g1.z1, g2.z0)
    if abs(g1.z1 - g2.z0) > tol * scale:
        raise DomainMismatch(f"z1(g1)={g1.z1:.12g} differs from z0(g2)={g2.z0:.12g}")
    top = g2.z0
    g1 = MonotoneGraph(np.column_stack([g1.x, np.minimum(g1.y, top)]))
    if g1.z0 == 0.0:
        return MonotoneGraph([[0.0, 0.0], [0.0, g2.z1]])

    inv = g1.transpose()
    levels = g2.x[g2.x <= inv.z0]
    pre = np.concatenate([inv.evaluate_left(levels), inv.evaluate(levels)]) if len(levels) else []
    breaks = np.union1d(g1.x, np.clip(pre, 0.0, g1.z0))
    snap_tol = 1e-12 * scale
    breaks = breaks[np.concatenate([[True], np.diff(breaks) > snap_tol])]
    breaks[-1] = g1.z0

    knots = g2.x if len(g2.x) > 1 else np.repeat(g2.x, 2)

    def snap(y):
        # a level within rounding of a knot of g2 is that knot, so jumps of g2 are hit exactly
        y = np.minimum(y, top)
        i = np.clip(np.searchsorted(knots, y), 1, len(knots) - 1)
        near = np.where(np.abs(knots[i] - y) < np.abs(knots[i - 1] - y), knots[i], knots[i - 1])
        return np.where(np.abs(near - y) <= snap_tol, near, y)

    right = g2.evaluate(snap(g1.evaluate(breaks)))
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    f1_mid = snap(g1.evaluate(mids))
    f1_end = snap(g1.evaluate_left(breaks[1:]))
    rising = f1_end > f1_mid
    left_end = np.where(rising, g2.evaluate_left(f1_end), g2.evaluate(f1_mid))
    pts = np.empty((2 * len(breaks), 2))
    pts[0::2, 0] = breaks
    pts[1::2, 0] = breaks
    pts[0, 1] = 0.0
    pts[2::2, 1] = left_end
    pts[1::2, 1] = right
    pts[:, 1] = np.maximum.accumulate(pts[:, 1])
    return MonotoneGraph(pts)


def quadratic_variation(g: MonotoneGraph) -> float:
    """Sum of squared jump heights over ``(0, z0]``."""
    return float(sum(h * h for _, h in g.jumps()))


@dataclass
class ConvergenceReport:
    converged: bool
    z0_gap: np.ndarray
    top_gap: np.ndarray
    pointwise_gap: np.ndarray
    rho: np.ndarray
    mesh: np.ndarray


def check_convergence(sequence, limit: MonotoneGraph, mesh=None, tol: float = 1e-2) -> ConvergenceReport:
    """Test the three-part criterion (domain end, top value, continuity points)
    on the last element of ``sequence`` and report how each gap evolves."""
    sequence = list(sequence)
    if mesh is None:
        mesh = np.linspace(0.0, limit.z0, 65)[:-1]
    mesh = np.asarray(mesh, dtype=float)
    mesh = mesh[(mesh >= 0) & (mesh < limit.z0)]
    if len(mesh):
        cont = np.abs(limit.evaluate(mesh) - limit.evaluate_left(mesh)) <= 1e-12
        mesh = mesh[cont]
    z0_gap = np.array([abs(g.z0 - limit.z0) for g in sequence])
    top_gap = np.array([abs(g.z1 - limit.z1) for g in sequence])
    pw = []
    for g in sequence:
        if len(mesh) == 0:
            pw.append(0.0)
            continue
        inside = mesh <= g.z0
        vals = np.full(len(mesh), g.z1)
        vals[inside] = g.evaluate(mesh[inside])
        pw.append(float(np.max(np.abs(vals - limit.evaluate(mesh)))))
    pw = np.array(pw)
    rho = np.array([hausdorff_rho(g, limit) for g in sequence])
    ok = bool(sequence) and max(z0_gap[-1], top_gap[-1], pw[-1]) <= tol
    return ConvergenceReport(ok, z0_gap, top_gap, pw, rho, mesh)
