"""Exact mixing-phase solvers.

Given a few row strategies ``x_1..x_s`` and column strategies ``y_1..y_t``,
find convex coefficients ``alpha``, ``beta`` minimizing the regret ``f`` of
the profile ``(sum alpha_k x_k, sum beta_l y_l)``.  Supported shapes are
``(1, w)``, ``(2, 2)`` and ``(2, 3)`` together with their transposes.

* ``(1, w)``: ``f_C`` is linear in ``beta`` and ``f_R`` is a maximum of linear
  forms, so the problem is a single linear program.
* ``(2, 2)``: the max-terms of the regrets are piecewise linear in ``beta``
  (rows of ``R``) and ``alpha`` (columns of ``C``).  On each rectangle of the
  resulting grid both regrets are bilinear, ``x1 + x2*a + x3*b + x4*a*b``, and
  :func:`grid_min_22` minimizes their maximum by enumerating KKT candidates.
* ``(2, 3)``: the column max-term splits the triangle of ``beta`` into convex
  polygons.  For a fixed ``alpha`` the objective is a maximum of two affine
  functions of ``beta``, whose minimum over a polygon is always attained on the
  polygon boundary, so each polygon-times-interval region reduces to one
  bilinear rectangle per polygon edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, SolverError
from .game import BimatrixGame, MixedStrategy, RegretPair, Side, StrategyLike, as_vector, regrets
from .geometry import ConvexPolygon, separate_2m, separate_3m
from .lp import program_builder, solve_lp

DEGENERATE_DENOM = 1e-12
ROOT_SLACK = 1e-12


@dataclass(frozen=True)
class MixingSolution:
    alpha: np.ndarray
    beta: np.ndarray
    x: MixedStrategy
    y: MixedStrategy
    value: RegretPair

    @property
    def f(self) -> float:
        return self.value.f

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "x": self.x.weights.tolist(),
            "y": self.y.weights.tolist(),
            "regrets": self.value.to_json(),
        }


@dataclass(frozen=True)
class BilinearPiece:
    """``F_R``, ``F_C`` of the form ``x1 + x2*a + x3*b + x4*a*b`` on a rectangle."""

    fR: tuple[float, float, float, float]
    fC: tuple[float, float, float, float]
    alpha_range: tuple[float, float] = (0.0, 1.0)
    beta_range: tuple[float, float] = (0.0, 1.0)

    def evaluate(self, a, b):
        r = _bilinear(np.asarray(self.fR, dtype=float), a, b)
        c = _bilinear(np.asarray(self.fC, dtype=float), a, b)
        return np.maximum(r, c)


@dataclass(frozen=True)
class RegionPiece:
    """``F_R``, ``F_C`` on ``polygon x interval``.

    Each function is given by six coefficients
    ``(k_ap, k_aq, k_a, k_p, k_q, k_0)`` of
    ``k_ap*a*p + k_aq*a*q + k_a*a + k_p*p + k_q*q + k_0``.
    """

    fR: tuple[float, ...]
    fC: tuple[float, ...]
    polygon: ConvexPolygon
    alpha_range: tuple[float, float] = (0.0, 1.0)

    def evaluate(self, a, p, q):
        return np.maximum(_trilinear(self.fR, a, p, q), _trilinear(self.fC, a, p, q))


def _bilinear(k, a, b):
    return k[..., 0] + k[..., 1] * a + k[..., 2] * b + k[..., 3] * a * b


def _trilinear(k, a, p, q):
    return k[0] * a * p + k[1] * a * q + k[2] * a + k[3] * p + k[4] * q + k[5]


# ----------------------------------------------------------------------------
# per-rectangle minimizer
# ----------------------------------------------------------------------------


def _safe_div(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(np.abs(den) > DEGENERATE_DENOM, out, np.nan)


def _quadratic_roots(a, b, c):
    """Real roots of ``a t^2 + b t + c`` (NaN where absent), stable form."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.abs(a) <= DEGENERATE_DENOM
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        qq = -0.5 * (b + np.where(b >= 0, sq, -sq))
        r1 = np.where(lin, _safe_div(-c, b), qq / a)
        r2 = np.where(lin, np.nan, np.where(np.abs(qq) > 0, c / qq, np.nan))
    return r1, r2


def _clamp(t, lo, hi):
    """Clip ``t`` into ``[lo, hi]``; values further than the slack become NaN."""
    ok = (t >= lo - ROOT_SLACK) & (t <= hi + ROOT_SLACK)
    return np.where(ok, np.clip(t, lo, hi), np.nan)


def _curve_points(xr, d, a0, a1, b0, b1):
    """Stationary points of ``F`` along ``D = 0`` parameterized by ``a``.

    ``xr`` and ``d`` are ``(N, 4)`` coefficient arrays of ``F`` and ``D``.  On
    the curve ``b(a) = -(d1 + d2 a) / (d3 + d4 a)`` and ``F`` becomes
    ``(c2 a^2 + c1 a + c0) / (e1 a + e0)``; its stationary points solve
    ``c2 e1 a^2 + 2 c2 e0 a + (c1 e0 - c0 e1) = 0``.
    """
    x1, x2, x3, x4 = xr.T
    d1, d2, d3, d4 = d.T
    c2 = x2 * d4 - x4 * d2
    c1 = x1 * d4 + x2 * d3 - x3 * d2 - x4 * d1
    c0 = x1 * d3 - x3 * d1
    e1, e0 = d4, d3
    out = []
    for r in _quadratic_roots(c2 * e1, 2 * c2 * e0, c1 * e0 - c0 * e1):
        a = _clamp(r, a0, a1)
        b = _clamp(_safe_div(-(d1 + d2 * a), d3 + d4 * a), b0, b1)
        out.append((a, b))
    return out


def candidates_22(fR, fC, alpha_range=None, beta_range=None):
    """KKT candidate points for ``min max(F_R, F_C)`` over rectangles.

    ``fR`` and ``fC`` are ``(N, 4)`` arrays (or single 4-vectors); ranges are
    ``(N, 2)`` arrays or pairs.  Returns ``(a, b)`` arrays of shape ``(N, K)``
    with NaN marking candidates that do not exist for a given rectangle.

    The families are: the four vertices; points of the switching curve
    ``F_R = F_C`` on the edges, at its stationary points (parameterized either
    way) and at its saddle; the saddles of ``F_R`` and ``F_C``; and the
    endpoints of each function's constant lines together with their crossings
    of the switching curve.
    """
    xr = np.atleast_2d(np.asarray(fR, dtype=float))
    xc = np.atleast_2d(np.asarray(fC, dtype=float))
    N = xr.shape[0]
    ar = np.broadcast_to(np.asarray((0.0, 1.0) if alpha_range is None else alpha_range, dtype=float), (N, 2))
    br = np.broadcast_to(np.asarray((0.0, 1.0) if beta_range is None else beta_range, dtype=float), (N, 2))
    a0, a1 = ar[:, 0], ar[:, 1]
    b0, b1 = br[:, 0], br[:, 1]
    d = xr - xc
    d1, d2, d3, d4 = d.T
    pts: list[tuple[np.ndarray, np.ndarray]] = []

    # vertices
    for a in (a0, a1):
        for b in (b0, b1):
            pts.append((a, b))
    # switching curve on the four edges (D is linear along each edge)
    for b in (b0, b1):
        pts.append((_clamp(_safe_div(-(d1 + d3 * b), d2 + d4 * b), a0, a1), b))
    for a in (a0, a1):
        pts.append((a, _clamp(_safe_div(-(d1 + d2 * a), d3 + d4 * a), b0, b1)))
    # stationary points along the switching curve, as b(a) and as a(b)
    pts.extend(_curve_points(xr, d, a0, a1, b0, b1))
    swap = [0, 2, 1, 3]
    for b, a in _curve_points(xr[:, swap], d[:, swap], b0, b1, a0, a1):
        pts.append((a, b))
    # saddle points
    for k in (d, xr, xc):
        pts.append((_clamp(_safe_div(-k[:, 2], k[:, 3]), a0, a1), _clamp(_safe_div(-k[:, 1], k[:, 3]), b0, b1)))
    # lines on which F_R or F_C is constant in one coordinate
    for k in (xr, xc):
        bs = _clamp(_safe_div(-k[:, 1], k[:, 3]), b0, b1)  # dF/da = 0
        pts.append((a0, bs))
        pts.append((a1, bs))
        pts.append((_clamp(_safe_div(-(d1 + d3 * bs), d2 + d4 * bs), a0, a1), bs))
        as_ = _clamp(_safe_div(-k[:, 2], k[:, 3]), a0, a1)  # dF/db = 0
        pts.append((as_, b0))
        pts.append((as_, b1))
        pts.append((as_, _clamp(_safe_div(-(d1 + d2 * as_), d3 + d4 * as_), b0, b1)))

    A = np.column_stack([np.broadcast_to(a, (N,)) for a, _ in pts])
    B = np.column_stack([np.broadcast_to(b, (N,)) for _, b in pts])
    bad = np.isnan(A) | np.isnan(B)
    A = np.where(bad, np.nan, A)
    B = np.where(bad, np.nan, B)
    return A, B


def grid_min_batch(fR, fC, alpha_range=None, beta_range=None):
    """Vectorized :func:`grid_min_22`; returns ``(a, b, value)`` arrays."""
    xr = np.atleast_2d(np.asarray(fR, dtype=float))
    xc = np.atleast_2d(np.asarray(fC, dtype=float))
    A, B = candidates_22(xr, xc, alpha_range, beta_range)
    with np.errstate(invalid="ignore"):
        vr = xr[:, :1] + xr[:, 1:2] * A + xr[:, 2:3] * B + xr[:, 3:4] * A * B
        vc = xc[:, :1] + xc[:, 1:2] * A + xc[:, 2:3] * B + xc[:, 3:4] * A * B
    val = np.where(np.isnan(A), np.inf, np.maximum(vr, vc))
    k = np.argmin(val, axis=1)
    rows = np.arange(val.shape[0])
    return A[rows, k], B[rows, k], val[rows, k]


def grid_min_22(piece: BilinearPiece) -> tuple[tuple[float, float], float]:
    """Minimum of ``max(F_R, F_C)`` over the piece's rectangle."""
    a, b, v = grid_min_batch(piece.fR, piece.fC, piece.alpha_range, piece.beta_range)
    return (float(a[0]), float(b[0])), float(v[0])


# ----------------------------------------------------------------------------
# polygon x interval minimizer
# ----------------------------------------------------------------------------


def _edge_coefficients(k, start, direction):
    """Restrict a six-coefficient function to ``(p, q) = start + s * direction``.

    Returns the bilinear coefficients in ``(a, s)``.
    """
    k = np.asarray(k, dtype=float)
    kap, kaq, ka, kp, kq, k0 = k
    pk, qk = start[..., 0], start[..., 1]
    dp, dq = direction[..., 0], direction[..., 1]
    return np.stack(
        [k0 + kp * pk + kq * qk, ka + kap * pk + kaq * qk, kp * dp + kq * dq, kap * dp + kaq * dq], axis=-1
    )


def _polygon_edges(poly: ConvexPolygon) -> tuple[np.ndarray, np.ndarray]:
    starts, dirs = [], []
    for u, v in poly.edges():
        starts.append(u)
        dirs.append(v - u)
    return np.array(starts).reshape(-1, 2), np.array(dirs).reshape(-1, 2)


def region_min_23(piece: RegionPiece) -> tuple[tuple[float, float, float], float]:
    """Minimum of ``max(F_R, F_C)`` over ``polygon x interval``.

    Returns ``((a, p, q), value)``.
    """
    if piece.polygon.is_empty:
        raise InputError("region_min_23 needs a nonempty polygon")
    starts, dirs = _polygon_edges(piece.polygon)
    kr = _edge_coefficients(piece.fR, starts, dirs)
    kc = _edge_coefficients(piece.fC, starts, dirs)
    a, s, v = grid_min_batch(kr, kc, piece.alpha_range, (0.0, 1.0))
    e = int(np.argmin(v))
    p, q = starts[e] + s[e] * dirs[e]
    return (float(a[e]), float(p), float(q)), float(v[e])


# ----------------------------------------------------------------------------
# mixing problems
# ----------------------------------------------------------------------------


def _solution(game, rows, cols, alpha, beta) -> MixingSolution:
    alpha = np.clip(np.asarray(alpha, dtype=float), 0.0, None)
    beta = np.clip(np.asarray(beta, dtype=float), 0.0, None)
    alpha, beta = alpha / alpha.sum(), beta / beta.sum()
    x = MixedStrategy.mix([MixedStrategy(as_vector(r), Side.ROW) for r in rows], alpha)
    y = MixedStrategy.mix([MixedStrategy(as_vector(c), Side.COL) for c in cols], beta)
    return MixingSolution(alpha, beta, x, y, regrets(game, x, y))


def _swap(sol: MixingSolution, game: BimatrixGame) -> MixingSolution:
    x = MixedStrategy(sol.y.weights, Side.ROW)
    y = MixedStrategy(sol.x.weights, Side.COL)
    return MixingSolution(sol.beta, sol.alpha, x, y, regrets(game, x, y))


def _vectors(game, rows, cols):
    rows = [as_vector(r, game.m) for r in rows]
    cols = [as_vector(c, game.n) for c in cols]
    if not rows or not cols:
        raise InputError("mixing needs at least one strategy per player")
    return rows, cols


def mix_1w(game: BimatrixGame, row: StrategyLike | Sequence[StrategyLike], cols: Sequence[StrategyLike]) -> MixingSolution:
    """Optimal mix of ``cols`` against a single row strategy (one LP)."""
    if isinstance(row, (list, tuple)) and len(row) and not np.isscalar(row[0]):
        if len(row) != 1:
            raise InputError("mix_1w takes exactly one row strategy")
        row = row[0]
    (x,), ys = _vectors(game, [row], cols)
    w = len(ys)
    if w == 1:
        return _solution(game, [x], ys, [1.0], [1.0])
    Y = np.column_stack(ys)  # n x w
    RY = game.R @ Y  # m x w: column l is R y_l
    p = x @ RY  # x' R y_l
    q = x @ game.C @ Y  # x' C y_l
    cmax = float((game.C.T @ x).max())
    bld = program_builder(w + 1)
    row = np.zeros(w + 1)
    row[:w] = q
    row[w] = 1.0
    bld.add(row, ">=", cmax)  # t >= cmax - sum beta_l q_l
    for i in range(game.m):
        row = np.zeros(w + 1)
        row[:w] = -(RY[i] - p)
        row[w] = 1.0
        bld.add(row, ">=", 0.0)
    bld.add(np.r_[np.ones(w), 0.0], "=", 1.0)
    c = np.zeros(w + 1)
    c[w] = 1.0
    sol = solve_lp(bld.program(c, "min", [(0.0, None)] * w + [(None, None)]))
    if not sol.ok:
        raise SolverError(f"(1,w) mixing program returned status {sol.status}")
    return _solution(game, [x], ys, [1.0], sol.primal[:w])


def _bilinear_table(M, xs, ys):
    return np.array([[xa @ M @ yb for yb in ys] for xa in xs])


def pieces_22(game: BimatrixGame, rows, cols) -> list[BilinearPiece]:
    """Bilinear pieces of ``F_R``, ``F_C`` on the grid of linear pieces.

    ``a`` is the weight on ``rows[0]`` and ``b`` the weight on ``cols[0]``.
    """
    (x1, x2), (y1, y2) = _vectors(game, rows, cols)
    R, C = game.R, game.C
    env_b = separate_2m(R, y1, y2)  # row max-term over b
    env_a = separate_2m(C.T, x1, x2)  # column max-term over a
    P = _bilinear_table(R, (x1, x2), (y1, y2))
    Q = _bilinear_table(C, (x1, x2), (y1, y2))
    pr = (P[1, 1], P[0, 1] - P[1, 1], P[1, 0] - P[1, 1], P[0, 0] - P[0, 1] - P[1, 0] + P[1, 1])
    qc = (Q[1, 1], Q[0, 1] - Q[1, 1], Q[1, 0] - Q[1, 1], Q[0, 0] - Q[0, 1] - Q[1, 0] + Q[1, 1])
    out = []
    for b_lo, b_hi, i in env_b.pieces():
        sR, cR = env_b.slopes[i], env_b.intercepts[i]
        fr = (cR - pr[0], -pr[1], sR - pr[2], -pr[3])
        for a_lo, a_hi, j in env_a.pieces():
            sC, cC = env_a.slopes[j], env_a.intercepts[j]
            fc = (cC - qc[0], sC - qc[1], -qc[2], -qc[3])
            out.append(BilinearPiece(fr, fc, (a_lo, a_hi), (b_lo, b_hi)))
    return out


def mix_22(game: BimatrixGame, rows: Sequence[StrategyLike], cols: Sequence[StrategyLike]) -> MixingSolution:
    """Global minimum of ``f`` over two row and two column strategies."""
    if len(rows) != 2 or len(cols) != 2:
        raise InputError("mix_22 needs two row and two column strategies")
    pieces = pieces_22(game, rows, cols)
    fR = np.array([pc.fR for pc in pieces])
    fC = np.array([pc.fC for pc in pieces])
    ar = np.array([pc.alpha_range for pc in pieces])
    br = np.array([pc.beta_range for pc in pieces])
    a, b, v = grid_min_batch(fR, fC, ar, br)
    k = int(np.argmin(v))
    return _solution(game, rows, cols, [a[k], 1 - a[k]], [b[k], 1 - b[k]])


def _six(P):
    """Coefficients of ``x(a)' M y(p, q)`` from the 2 x 3 table ``P``."""
    return np.array(
        [
            P[0, 0] - P[0, 2] - P[1, 0] + P[1, 2],
            P[0, 1] - P[0, 2] - P[1, 1] + P[1, 2],
            P[0, 2] - P[1, 2],
            P[1, 0] - P[1, 2],
            P[1, 1] - P[1, 2],
            P[1, 2],
        ]
    )


def pieces_23(game: BimatrixGame, rows, cols) -> list[RegionPiece]:
    """Regions ``polygon x interval`` on which both regrets are polynomial.

    ``a`` is the weight on ``rows[0]``; ``(p, q)`` are the weights on
    ``cols[0]`` and ``cols[1]``.
    """
    (x1, x2), (y1, y2, y3) = _vectors(game, rows, cols)
    R, C = game.R, game.C
    polys = separate_3m(R, y1, y2, y3)
    env_a = separate_2m(C.T, x1, x2)
    bR = _six(_bilinear_table(R, (x1, x2), (y1, y2, y3)))
    bC = _six(_bilinear_table(C, (x1, x2), (y1, y2, y3)))
    base = R @ y3
    dp = R @ y1 - base
    dq = R @ y2 - base
    out = []
    for poly in polys:
        if poly.is_empty:
            continue
        i = poly.defining_index
        fr = tuple(np.array([0.0, 0.0, 0.0, dp[i], dq[i], base[i]]) - bR)
        for a_lo, a_hi, j in env_a.pieces():
            sC, cC = env_a.slopes[j], env_a.intercepts[j]
            fc = tuple(np.array([0.0, 0.0, sC, 0.0, 0.0, cC]) - bC)
            out.append(RegionPiece(fr, fc, poly, (a_lo, a_hi)))
    return out


def mix_23(game: BimatrixGame, rows: Sequence[StrategyLike], cols: Sequence[StrategyLike]) -> MixingSolution:
    """Global minimum of ``f`` over two row and three column strategies."""
    if len(rows) != 2 or len(cols) != 3:
        raise InputError("mix_23 needs two row and three column strategies")
    pieces = pieces_23(game, rows, cols)
    # one bilinear rectangle per (polygon edge, alpha interval)
    kr, kc, ar, st, di = [], [], [], [], []
    for pc in pieces:
        starts, dirs = _polygon_edges(pc.polygon)
        kr.append(_edge_coefficients(pc.fR, starts, dirs))
        kc.append(_edge_coefficients(pc.fC, starts, dirs))
        ar.append(np.tile(pc.alpha_range, (len(starts), 1)))
        st.append(starts)
        di.append(dirs)
    kr, kc, ar = np.vstack(kr), np.vstack(kc), np.vstack(ar)
    st, di = np.vstack(st), np.vstack(di)
    a, s, v = grid_min_batch(kr, kc, ar, (0.0, 1.0))
    e = int(np.argmin(v))
    p, q = st[e] + s[e] * di[e]
    beta = np.clip([p, q, 1 - p - q], 0.0, None)
    return _solution(game, rows, cols, [a[e], 1 - a[e]], beta)


def mix(game: BimatrixGame, rows: Sequence[StrategyLike], cols: Sequence[StrategyLike]) -> MixingSolution:
    """Dispatch to the exact solver for the shape ``(len(rows), len(cols))``.

    ``(v, 1)`` and ``(3, 2)`` problems are solved on the transposed game with
    the players' roles swapped.
    """
    s, t = len(rows), len(cols)
    if s == 1:
        return mix_1w(game, rows[0], cols)
    if t == 1:
        return _swap(mix_1w(game.transpose(), cols[0], rows), game)
    if (s, t) == (2, 2):
        return mix_22(game, rows, cols)
    if (s, t) == (2, 3):
        return mix_23(game, rows, cols)
    if (s, t) == (3, 2):
        return _swap(mix_23(game.transpose(), cols, rows), game)
    raise InputError(f"no exact mixing solver for shape ({s}, {t})")


def brute_force_mix(game: BimatrixGame, rows, cols, steps: int = 200) -> tuple[float, np.ndarray, np.ndarray]:
    """Grid-search reference: min of ``f`` over a regular simplex grid.

    Intended as a test oracle; the cost grows as ``steps ** (s + t - 2)``.
    """
    rows, cols = _vectors(game, rows, cols)
    X = np.array(rows)
    Y = np.array(cols)
    A = _simplex_grid(len(rows), steps)
    B = _simplex_grid(len(cols), steps)
    xs = A @ X  # (Na, m)
    ys = B @ Y  # (Nb, n)
    Ry = ys @ game.R.T  # (Nb, m)
    Cx = xs @ game.C  # (Na, n)
    xRy = xs @ game.R @ ys.T  # (Na, Nb)
    xCy = Cx @ ys.T
    fR = Ry.max(axis=1)[None, :] - xRy
    fC = Cx.max(axis=1)[:, None] - xCy
    f = np.maximum(fR, fC)
    ia, ib = np.unravel_index(np.argmin(f), f.shape)
    return float(f[ia, ib]), A[ia], B[ib]


def _simplex_grid(k: int, steps: int) -> np.ndarray:
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        t = np.linspace(0.0, 1.0, steps + 1)
        return np.column_stack([t, 1 - t])
    if k == 3:
        pts = [(i, j) for i in range(steps + 1) for j in range(steps + 1 - i)]
        ij = np.array(pts, dtype=float) / steps
        return np.column_stack([ij, 1 - ij.sum(axis=1)])
    raise InputError("grid oracle supports up to three strategies per side")


def onedim_min(fun, lo=0.0, hi=1.0, steps=2000) -> tuple[float, float]:
    """Dense 1-D reference minimum of a vectorized function."""
    t = np.linspace(lo, hi, steps + 1)
    v = fun(t)
    k = int(np.argmin(v))
    return float(t[k]), float(v[k])

