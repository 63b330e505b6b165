"""Linear-piece partitioning of mixing domains.

Two primitives are provided:

* :func:`envelope` -- breakpoints of ``h(x) = max_i (a_i x + b_i)`` on
  ``[0, 1]`` by an incremental sweep over lines sorted by slope.
* :func:`separate_3m` -- for ``m`` affine functions on the triangle
  ``{p, q >= 0, p + q <= 1}``, the convex polygon where each one attains the
  maximum, with vertices listed clockwise.

:func:`separate_2m` and :func:`separate_3m` build their lines from payoff
matrices: the max-term ``max(M y)`` of a regret, with ``y`` ranging over the
convex hull of two or three strategies, is exactly such an upper envelope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import InputError
from .game import BimatrixGame, StrategyLike, as_vector

DOMINANCE_TOL = 1e-9
#: intersections this close outside [0, 1] are treated as lying on the boundary
SWEEP_SLACK = 1e-12
#: polygons with smaller area are kept only as degenerate markers
DEGENERATE_AREA = 1e-12
_VERTEX_MERGE = 1e-12


@dataclass(frozen=True)
class Envelope:
    """Upper envelope of lines on ``[0, 1]``.

    ``breakpoints[k] .. breakpoints[k+1]`` is the ``k``-th piece, on which line
    ``piece_index[k]`` attains the maximum.  ``values[k]`` is ``h`` at
    ``breakpoints[k]``.
    """

    breakpoints: np.ndarray
    piece_index: tuple[int, ...]
    values: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray

    def __len__(self) -> int:
        return len(self.piece_index)

    def pieces(self) -> Iterator[tuple[float, float, int]]:
        bp = self.breakpoints
        for k, i in enumerate(self.piece_index):
            yield float(bp[k]), float(bp[k + 1]), i

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.max(np.multiply.outer(x, self.slopes) + self.intercepts, axis=-1)

    def piece_at(self, x: float) -> int:
        k = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        return self.piece_index[min(max(k, 0), len(self.piece_index) - 1)]

    def to_json(self) -> dict:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "piece_index": list(self.piece_index),
            "values": self.values.tolist(),
        }


def envelope(lines: Sequence[tuple[float, float]]) -> Envelope:
    """Upper envelope of ``a_i x + b_i`` over ``x`` in ``[0, 1]``.

    Among lines with equal slope only the one with the largest intercept is
    kept (lowest index on exact duplicates).  Runs in ``O(k log k)``.
    """
    arr = np.asarray(lines, dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise InputError("envelope needs at least one line")
    if not np.all(np.isfinite(arr)):
        raise InputError("line coefficients must be finite")
    a, b = arr[:, 0], arr[:, 1]
    # sort by slope, then intercept descending, then index
    order = sorted(range(len(a)), key=lambda i: (a[i], -b[i], i))
    kept = []
    for i in order:
        if kept and a[kept[-1]] == a[i]:
            continue  # same slope, lower (or equal, later) intercept
        kept.append(i)

    stack: list[int] = []
    starts: list[float] = []
    for i in kept:
        start = 0.0
        skip = False
        while stack:
            t = stack[-1]
            x = (b[t] - b[i]) / (a[i] - a[t])
            if x >= 1.0 - SWEEP_SLACK:
                skip = True  # line i only wins to the right of the domain
                break
            if x <= starts[-1] + SWEEP_SLACK:
                stack.pop()
                starts.pop()
                continue
            start = x
            break
        if skip:
            continue
        stack.append(i)
        starts.append(0.0 if len(stack) == 1 else start)

    bps = np.array(starts + [1.0])
    idx = tuple(int(i) for i in stack)
    vals = np.empty(len(bps))
    for k, x in enumerate(bps):
        line = idx[min(k, len(idx) - 1)]
        vals[k] = a[line] * x + b[line]
    return Envelope(bps, idx, vals, a.copy(), b.copy())


def _lines_2m(M: np.ndarray, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    top = M @ y1
    bottom = M @ y2
    return np.column_stack([top - bottom, bottom])


def separate_2m(game: BimatrixGame | np.ndarray, y1: StrategyLike, y2: StrategyLike) -> Envelope:
    """Linear pieces of ``beta -> max(M (beta y1 + (1 - beta) y2))``.

    ``game`` may be a :class:`BimatrixGame` (then ``M = R``, i.e. the row
    player's max-term over a segment of column strategies) or an explicit
    matrix -- pass ``C.T`` for the column player's max-term over row mixes.
    Row ``i`` contributes the line with slope ``(M (y1 - y2))_i`` and
    intercept ``(M y2)_i``.
    """
    M = game.R if isinstance(game, BimatrixGame) else np.asarray(game, dtype=float)
    y1v = as_vector(y1, M.shape[1])
    y2v = as_vector(y2, M.shape[1])
    return envelope(_lines_2m(M, y1v, y2v))


@dataclass(frozen=True)
class ConvexPolygon:
    """A (possibly degenerate) convex polygon with clockwise vertices.

    ``vertices`` has shape ``(k, 2)``; ``k`` is 0 for an empty piece, 1 for a
    point and 2 for a segment.
    """

    vertices: np.ndarray
    defining_index: int

    @property
    def is_empty(self) -> bool:
        return self.vertices.shape[0] == 0

    @property
    def is_degenerate(self) -> bool:
        return self.vertices.shape[0] < 3 or abs(self.signed_area) < DEGENERATE_AREA

    @property
    def signed_area(self) -> float:
        v = self.vertices
        if v.shape[0] < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    def edges(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        v = self.vertices
        k = v.shape[0]
        if k == 1:
            yield v[0], v[0]
        elif k == 2:
            yield v[0], v[1]
        else:
            for i in range(k):
                yield v[i], v[(i + 1) % k]

    def contains(self, point, tol: float = 1e-9) -> bool:
        v = self.vertices
        p = np.asarray(point, dtype=float)
        k = v.shape[0]
        if k == 0:
            return False
        if k == 1:
            return bool(np.linalg.norm(p - v[0]) <= tol)
        if k == 2:
            return _point_segment_distance(p, v[0], v[1]) <= tol
        for i in range(k):
            a, b = v[i], v[(i + 1) % k]
            # clockwise: interior lies to the right of each directed edge
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if cross > tol * max(1.0, np.linalg.norm(b - a)):
                return False
        return True

    def to_json(self) -> dict:
        return {"defining_index": self.defining_index, "vertices": self.vertices.tolist()}


def _point_segment_distance(p, a, b) -> float:
    d = b - a
    L = float(d @ d)
    if L == 0:
        return float(np.linalg.norm(p - a))
    t = min(max(float((p - a) @ d) / L, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


#: the domain triangle {p, q >= 0, p + q <= 1}, clockwise
TRIANGLE = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


def clip_halfplane(poly: np.ndarray, c0: float, cp: float, cq: float) -> np.ndarray:
    """Intersect a convex polygon with ``{c0 + cp*p + cq*q >= 0}``.

    Sutherland-Hodgman step; vertex order (and so orientation) is preserved.
    """
    k = poly.shape[0]
    if k == 0:
        return poly
    vals = c0 + poly @ np.array([cp, cq])
    if np.all(vals >= 0):
        return poly
    if np.all(vals < 0):
        return poly[:0]
    out = []
    for i in range(k):
        j = (i + 1) % k
        pi, pj = poly[i], poly[j]
        vi, vj = vals[i], vals[j]
        if vi >= 0:
            out.append(pi)
        if (vi >= 0) != (vj >= 0):
            t = vi / (vi - vj)
            out.append(pi + t * (pj - pi))
    return _dedupe(np.array(out))


def _dedupe(poly: np.ndarray) -> np.ndarray:
    if poly.shape[0] <= 1:
        return poly
    keep = [poly[0]]
    for v in poly[1:]:
        if np.max(np.abs(v - keep[-1])) > _VERTEX_MERGE:
            keep.append(v)
    if len(keep) > 1 and np.max(np.abs(keep[0] - keep[-1])) <= _VERTEX_MERGE:
        keep.pop()
    return np.array(keep)


def _collapse_degenerate(poly: np.ndarray) -> np.ndarray:
    """Reduce a zero-area vertex list to a point or its two extreme points."""
    if poly.shape[0] <= 1:
        return poly
    d = poly - poly[0]
    diam = np.max(np.linalg.norm(d, axis=1))
    if diam <= _VERTEX_MERGE:
        return poly[:1]
    # farthest pair along the principal direction
    far = poly[np.argmax(np.linalg.norm(d, axis=1))]
    direction = (far - poly[0]) / np.linalg.norm(far - poly[0])
    proj = poly @ direction
    return np.array([poly[np.argmin(proj)], poly[np.argmax(proj)]])


def separate_affine(c: np.ndarray, p: np.ndarray, q: np.ndarray) -> list[ConvexPolygon]:
    """Regions of the triangle where ``c_i + p_i*P + q_i*Q`` is maximal.

    Returns one polygon per function, in input order.  Exact ties between
    identical functions go to the lowest index.
    """
    c, p, q = (np.asarray(v, dtype=float) for v in (c, p, q))
    m = c.size
    out = []
    for i in range(m):
        poly = TRIANGLE.copy()
        for k in range(m):
            if k == i:
                continue
            d0, dp, dq = c[i] - c[k], p[i] - p[k], q[i] - q[k]
            if abs(d0) <= 1e-15 and abs(dp) <= 1e-15 and abs(dq) <= 1e-15:
                if k < i:
                    poly = poly[:0]
                    break
                continue
            poly = clip_halfplane(poly, d0, dp, dq)
            if poly.shape[0] == 0:
                break
        if poly.shape[0] >= 3:
            x, y = poly[:, 0], poly[:, 1]
            area = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
            if abs(area) < DEGENERATE_AREA:
                poly = _collapse_degenerate(poly)
        elif poly.shape[0] == 2:
            poly = _collapse_degenerate(poly)
        out.append(ConvexPolygon(poly, i))
    return out


def separate_3m(
    game: BimatrixGame | np.ndarray, y1: StrategyLike, y2: StrategyLike, y3: StrategyLike
) -> list[ConvexPolygon]:
    """Pieces of ``(p, q) -> max(M (p y1 + q y2 + (1 - p - q) y3))``.

    Polygon ``i`` is the part of the triangle where row ``i`` attains the
    maximum.  As in :func:`separate_2m`, ``game`` may be a game (uses ``R``) or
    a matrix.
    """
    M = game.R if isinstance(game, BimatrixGame) else np.asarray(game, dtype=float)
    n = M.shape[1]
    v1, v2, v3 = (as_vector(s, n) for s in (y1, y2, y3))
    base = M @ v3
    return separate_affine(base, M @ v1 - base, M @ v2 - base)


def partition_json(envelopes: dict, polygons: list[ConvexPolygon] | None = None) -> dict:
    out = {name: env.to_json() for name, env in envelopes.items()}
    if polygons is not None:
        out["polygons"] = [poly.to_json() for poly in polygons]
    return out
