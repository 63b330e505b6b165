"""Search phases of the literature algorithms.

Each ``search_*`` function maps a game to a :class:`SearchOutput`: a short
list of row and column strategies for the mixing phase, plus the scalars the
phase computed along the way.  The outputs also carry the named strategies in
the orientation the algorithm's analysis assumes (some phases swap the players
so that, e.g., ``f_R(x*, y*) >= f_C(x*, y*)``).  :func:`vertex_table` and
:func:`check_relations` use those names to evaluate the regret inequalities
that the analysis relies on.

:func:`run` chains a search phase with the exact mixing solver.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import InputError, SearchError, SolverError
from .game import (
    BimatrixGame,
    MixedStrategy,
    RegretPair,
    Side,
    best_response,
    regrets,
    suppmin,
)
from .geometry import envelope
from .lp import maximin, program_builder, solve_lp, solve_zero_sum
from .mixing import MixingSolution, mix

log = logging.getLogger(__name__)

#: stationarity below this level is not resolvable by the LP tolerances
_DERIVATIVE_FLOOR = 1e-9

ALGORITHMS = ("kps", "dmp06", "dmp07", "bbm38", "cdffjs", "bbm36", "ts", "dfm")


@dataclass(frozen=True)
class SearchOutput:
    """Strategies produced by a search phase.

    ``rows``/``cols`` are in the orientation of the input game and are what the
    mixing phase consumes.  ``named`` maps the analysis' symbols (``"x*"``,
    ``"r1"``, ...) to strategies of the *oriented* game, which is the input game
    transposed when ``transposed`` is set.
    """

    algorithm: str
    game: BimatrixGame
    rows: tuple[MixedStrategy, ...]
    cols: tuple[MixedStrategy, ...]
    named: dict
    metadata: dict = field(default_factory=dict)
    transposed: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    def oriented_game(self) -> BimatrixGame:
        return self.game.transpose() if self.transposed else self.game


def _pure(index: int, size: int, side: Side) -> MixedStrategy:
    return MixedStrategy.pure(index, size, side)


def _as_row(w) -> MixedStrategy:
    return MixedStrategy(_clean(w), Side.ROW)


def _as_col(w) -> MixedStrategy:
    return MixedStrategy(_clean(w), Side.COL)


def _clean(w) -> np.ndarray:
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    return w / w.sum()


def _br(game: BimatrixGame, side: Side, opponent) -> MixedStrategy:
    """Lowest-index pure best response."""
    i = best_response(game, side, opponent)[0]
    return _pure(i, game.size_for(side), side)


def _output(algorithm, game, rows, cols, named, metadata, transposed) -> SearchOutput:
    """Build an output from strategies of the oriented game."""
    if transposed:
        rows, cols = [_as_row(c.weights) for c in cols], [_as_col(r.weights) for r in rows]
    return SearchOutput(algorithm, game, tuple(rows), tuple(cols), named, metadata, transposed)


# ----------------------------------------------------------------------------
# simple search phases
# ----------------------------------------------------------------------------


def search_kps(game: BimatrixGame) -> SearchOutput:
    """Pure strategies at the largest entry of ``R`` and of ``C``."""
    i1, j1 = np.unravel_index(np.argmax(game.R), game.shape)
    i2, j2 = np.unravel_index(np.argmax(game.C), game.shape)
    m, n = game.shape
    named = {
        "i1": _pure(i1, m, Side.ROW),
        "i2": _pure(i2, m, Side.ROW),
        "j1": _pure(j1, n, Side.COL),
        "j2": _pure(j2, n, Side.COL),
    }
    meta = {"R_cell": [int(i1), int(j1)], "C_cell": [int(i2), int(j2)]}
    return _output("kps", game, [named["i1"], named["i2"]], [named["j1"], named["j2"]], named, meta, False)


def search_dmp06(game: BimatrixGame, start_row: int = 0) -> SearchOutput:
    """Row ``i``, the column best response ``j`` to it, and the row best response ``k`` to ``j``."""
    if not 0 <= start_row < game.m:
        raise InputError(f"start row {start_row} out of range")
    ei = _pure(start_row, game.m, Side.ROW)
    ej = _br(game, Side.COL, ei)
    ek = _br(game, Side.ROW, ej)
    named = {"i": ei, "j": ej, "k": ek}
    meta = {"i": start_row, "j": int(np.argmax(ej.weights)), "k": int(np.argmax(ek.weights))}
    return _output("dmp06", game, [ei, ek], [ej], named, meta, False)


def _bbm_core(game: BimatrixGame):
    """Zero-sum equilibrium of ``(R - C, C - R)``, oriented so that ``g1 >= g2``."""
    zs = solve_zero_sum(game)
    g = regrets(game, zs.x, zs.y)
    transposed = g.fR < g.fC
    oriented = game.transpose() if transposed else game
    if transposed:
        xs, ys = _as_row(zs.y), _as_col(zs.x)
    else:
        xs, ys = _as_row(zs.x), _as_col(zs.y)
    g = regrets(oriented, xs, ys)
    return oriented, transposed, xs, ys, g


def search_bbm38(game: BimatrixGame) -> SearchOutput:
    """Zero-sum equilibrium ``(x*, y*)`` plus ``r1 in br_R(y*)``, ``b2 in br_C(r1)``."""
    og, transposed, xs, ys, g = _bbm_core(game)
    r1 = _br(og, Side.ROW, ys)
    b2 = _br(og, Side.COL, r1)
    named = {"x*": xs, "y*": ys, "r1": r1, "b2": b2}
    meta = {"g1": g.fR, "g2": g.fC}
    return _output("bbm38", game, [xs, r1], [ys, b2], named, meta, transposed)


def bbm36_threshold() -> float:
    """Root of ``x^3 - x^2 - 2x + 1`` in ``[1/3, 1/2]``."""
    return brentq(lambda t: t**3 - t**2 - 2 * t + 1, 1 / 3, 0.5, xtol=1e-15)


BBM36_BETA = bbm36_threshold()


def bbm36_delta1(g1: float) -> float:
    """Weight moved from ``x*`` to ``r1`` as a function of ``g1``."""
    if g1 <= 1 / 3:
        return 0.0
    if g1 <= BBM36_BETA:
        return (1 - g1) * (-1 + math.sqrt(1 + 1 / (1 - 2 * g1) - 1 / g1))
    return 1.0


def search_bbm36(game: BimatrixGame) -> SearchOutput:
    og, transposed, xs, ys, g = _bbm_core(game)
    r1 = _br(og, Side.ROW, ys)
    d1 = bbm36_delta1(g.fR)
    xh = _as_row((1 - d1) * xs.weights + d1 * r1.weights)
    b2 = _br(og, Side.COL, xh)
    named = {"x*": xs, "y*": ys, "r1": r1, "b2": b2, "xh": xh}
    meta = {"g1": g.fR, "g2": g.fC, "delta1": d1}
    return _output("bbm36", game, [xh], [ys, b2], named, meta, transposed)


def search_cdffjs(game: BimatrixGame) -> SearchOutput:
    """Maximin strategies of both players plus best-response deviations.

    ``(x*, y*)`` solves the zero-sum game ``R`` and ``(xh, yh)`` the zero-sum
    game ``C`` (the row player minimizing).  The game is oriented so that the
    row player's value ``v_R`` is at least ``v_C``.
    """
    xR, vR = maximin(game.R)
    yC, vC = maximin(game.C.T)
    transposed = vR < vC - 1e-12
    og = game.transpose() if transposed else game
    xs, vR = maximin(og.R)  # row player's safety strategy
    ys, _ = maximin(-og.R.T)  # column player's punishing strategy
    yh, vC = maximin(og.C.T)
    xh, _ = maximin(-og.C)
    xs, ys, xh, yh = _as_row(xs), _as_col(ys), _as_row(xh), _as_col(yh)
    j = _br(og, Side.COL, xs)
    r = _br(og, Side.ROW, j)
    named = {"x*": xs, "y*": ys, "xh": xh, "yh": yh, "j": j, "r": r}
    meta = {"v_R": float(xs.weights @ og.R @ ys.weights), "v_C": float(xh.weights @ og.C @ yh.weights)}
    return _output("cdffjs", game, [xs, xh, r], [ys, j], named, meta, transposed)


# ----------------------------------------------------------------------------
# epsilon-grid search with the (v_R, v_C) relation envelope
# ----------------------------------------------------------------------------


def _capped_strategy(M: np.ndarray, cap: float, weights: Optional[np.ndarray]):
    """A point ``y`` of the simplex with ``M y <= cap``, or ``None``."""
    n = M.shape[1]
    bld = program_builder(n)
    for i in range(M.shape[0]):
        bld.add(M[i], "<=", cap)
    bld.add(np.ones(n), "=", 1.0)
    c = np.zeros(n) if weights is None else weights
    sol = solve_lp(bld.program(c, "max"))
    if not sol.ok:
        return None
    return _clean(sol.primal)


def _dmp07_table(og, a, x, b, y):
    R, C = og.R, og.C
    table = {}
    for name, (r, c) in {"u": (a, b), "v": (a, y), "h": (x, b), "g": (x, y)}.items():
        p = regrets(og, r, c)
        table[name + "1"], table[name + "2"] = p.fR, p.fC
    return table


def _dmp07_witness(t: dict, eps: float):
    """Values ``(v_R, v_C)`` satisfying the envelope for table ``t``, if any."""
    if t["v1"] > 2 * eps or t["h2"] > 2 * eps:
        return None
    lo_R = max(0.0, t["g1"] - eps / 2)
    hi_R = min(1.0, 1 + 1.5 * eps - max(t["u1"], t["h1"]))
    lo_C = max(0.0, t["g2"] - eps / 2)
    hi_C = min(1.0, 1 + 1.5 * eps - max(t["u2"], t["v2"]))
    if lo_R > hi_R or lo_C > hi_C:
        return None
    return lo_R, lo_C


def search_dmp07(game: BimatrixGame, eps: float = 0.05) -> SearchOutput:
    """Profiles ``(x, y)`` with capped opponent payoffs plus best responses.

    For guesses ``v_R``, ``v_C`` on an ``eps``-grid, ``y`` keeps every row
    payoff below ``v_R + eps/2`` and ``x`` keeps every column payoff below
    ``v_C + eps/2``.  Deviations ``alpha`` (to ``y``) and ``beta`` (to ``x``)
    are tried among the pure best responses and ``x``/``y`` themselves; the
    first combination satisfying the relation envelope is returned.
    """
    if not eps > 0:
        raise InputError("eps must be positive")
    R, C = game.R, game.C
    grid = np.unique(np.r_[np.arange(0.0, 1.0, eps), 1.0])
    ys, xs = [], []
    for v in grid:
        for w in (None, C.sum(axis=0)):
            y = _capped_strategy(R, v + eps / 2, w)
            if y is not None:
                ys.append((v, y))
        for w in (None, R.sum(axis=1)):
            x = _capped_strategy(C.T, v + eps / 2, w)
            if x is not None:
                xs.append((v, x))
    if not xs or not ys:
        raise SearchError("no capped strategies found", {"eps": eps})
    tried = 0
    for vR, y in ys:
        yc = _as_col(y)
        alphas = [_pure(i, game.m, Side.ROW) for i in best_response(game, Side.ROW, yc)]
        for vC, x in xs:
            xr = _as_row(x)
            betas = [_pure(j, game.n, Side.COL) for j in best_response(game, Side.COL, xr)]
            for a in alphas + [xr]:
                for b in betas + [yc]:
                    tried += 1
                    t = _dmp07_table(game, a, xr, b, yc)
                    wit = _dmp07_witness(t, eps)
                    if wit is None:
                        continue
                    named = {"alpha": a, "x": xr, "beta": b, "y": yc}
                    meta = {"eps": eps, "v_R": wit[0], "v_C": wit[1], "guess_v_R": float(vR), "guess_v_C": float(vC)}
                    return _output("dmp07", game, [a, xr], [b, yc], named, meta, False)
    raise SearchError("no profile satisfies the relation envelope on this grid", {"eps": eps, "tried": tried})


# ----------------------------------------------------------------------------
# descent to a stationary point of f
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class DescentConfig:
    delta: float = 1e-3
    max_iters: Optional[int] = None  # default 10^4 (m + n)
    tau: Optional[float] = None  # near-activity tolerance, default delta / 10
    start: Optional[tuple] = None  # (x, y); default uniform

    def __post_init__(self):
        if not self.delta > 0:
            raise InputError("delta must be positive")

    def active_tol(self) -> float:
        return self.delta / 10 if self.tau is None else self.tau


@dataclass(frozen=True)
class StationaryCertificate:
    """Dual solution ``(rho, w, z)`` of the steepest-descent program."""

    rho: float
    w: MixedStrategy
    z: MixedStrategy
    delta: float

    def vectors(self, game: BimatrixGame, xs, ys):
        R, C = game.R, game.C
        x, y = _vec(xs), _vec(ys)
        w, z = self.w.weights, self.z.weights
        u = -self.rho * (R @ y) + (1 - self.rho) * (C @ (z - y))
        v = self.rho * (R.T @ (w - x)) - (1 - self.rho) * (C.T @ x)
        return u, v

    def check(self, game: BimatrixGame, xs, ys, tol: Optional[float] = None) -> dict:
        """Relaxed support conditions of a stationary point.

        The exact conditions require ``supp(xs)`` to lie in ``suppmin(u)`` and
        ``supp(ys)`` in ``suppmin(v)``.  At a ``delta``-stationary point the
        losses ``xs'u - min(u)`` and ``ys'v - min(v)`` sum to at most ``delta``,
        which is what is reported and checked here.
        """
        tol = self.delta if tol is None else tol
        u, v = self.vectors(game, xs, ys)
        x, y = _vec(xs), _vec(ys)
        gap_x = float(x @ u - u.min())
        gap_y = float(y @ v - v.min())
        heavy_x = set(np.flatnonzero(x > tol))
        heavy_y = set(np.flatnonzero(y > tol))
        return {
            "gap_x": gap_x,
            "gap_y": gap_y,
            "support_x_ok": heavy_x <= set(suppmin(u, tol)),
            "support_y_ok": heavy_y <= set(suppmin(v, tol)),
            "passed": gap_x + gap_y <= tol + 1e-9,
        }

    def to_json(self) -> dict:
        return {"rho": self.rho, "w": self.w.weights.tolist(), "z": self.z.weights.tolist(), "delta": self.delta}

    def transposed(self) -> "StationaryCertificate":
        return StationaryCertificate(1 - self.rho, _as_row(self.z.weights), _as_col(self.w.weights), self.delta)


def _vec(s) -> np.ndarray:
    return s.weights if isinstance(s, MixedStrategy) else np.asarray(s, dtype=float)


@dataclass(frozen=True)
class DescentResult:
    x: MixedStrategy
    y: MixedStrategy
    certificate: StationaryCertificate
    derivative: float  # optimal value of the last steepest-descent program
    iterations: int
    converged: bool
    history: tuple[float, ...]


def _direction_program(R, C, x, y, tau):
    """Steepest-descent LP at ``(x, y)``.

    Variables ``(x', y', t)``; for every near-active component and near-maximal
    index one row bounds the directional derivative towards ``(x', y')`` by
    ``t``.  Returns the program and the row/column indices per row.
    """
    m, n = R.shape
    Ry, Cx = R @ y, C.T @ x
    xRy, xCy = x @ Ry, Cx @ y
    fR, fC = Ry.max() - xRy, Cx.max() - xCy
    f = max(fR, fC)
    bld = program_builder(m + n + 1)
    kinds = []
    if fR >= f - tau:
        for i in np.flatnonzero(Ry >= Ry.max() - tau):
            row = np.empty(m + n + 1)
            row[:m] = -Ry
            row[m : m + n] = R[i] - R.T @ x
            row[-1] = -1.0
            bld.add(row, "<=", Ry[i] - 2 * xRy)
            kinds.append(("R", int(i)))
    if fC >= f - tau:
        Cy = C @ y
        for j in np.flatnonzero(Cx >= Cx.max() - tau):
            row = np.empty(m + n + 1)
            row[:m] = C[:, j] - Cy
            row[m : m + n] = -Cx
            row[-1] = -1.0
            bld.add(row, "<=", Cx[j] - 2 * xCy)
            kinds.append(("C", int(j)))
    bld.add(np.r_[np.ones(m), np.zeros(n + 1)], "=", 1.0)
    bld.add(np.r_[np.zeros(m), np.ones(n), 0.0], "=", 1.0)
    c = np.zeros(m + n + 1)
    c[-1] = 1.0
    bounds = [(0.0, None)] * (m + n) + [(None, None)]
    return bld.program(c, "min", bounds), kinds


def _segment_values(R, C, x, y, dx, dy, s):
    X = x[None, :] + s[:, None] * dx[None, :]
    Y = y[None, :] + s[:, None] * dy[None, :]
    RY = Y @ R.T
    CX = X @ C
    fR = RY.max(axis=1) - np.einsum("ki,ki->k", X, RY)
    fC = CX.max(axis=1) - np.einsum("kj,kj->k", CX, Y)
    return np.maximum(fR, 0.0), np.maximum(fC, 0.0)


def _line_search(R, C, x, y, dx, dy) -> float:
    """Exact minimizer of ``f`` on the segment ``(x, y) + s (dx, dy)``, ``s in [0, 1]``.

    Each regret along the segment is an upper envelope of lines minus a
    quadratic, so ``f`` is piecewise quadratic with breakpoints given by the two
    envelopes; the minimum is at a breakpoint, a vertex of one of the
    quadratics, or a crossing of the two.
    """
    Ry, Rdy = R @ y, R @ dy
    Cx, Cdx = C.T @ x, C.T @ dx
    qR = (x @ Ry, dx @ Ry + x @ Rdy, dx @ Rdy)
    qC = (Cx @ y, Cdx @ y + Cx @ dy, Cdx @ dy)
    envR = envelope(np.column_stack([Rdy, Ry]))
    envC = envelope(np.column_stack([Cdx, Cx]))
    bps = np.unique(np.r_[envR.breakpoints, envC.breakpoints])
    cands = [bps]
    for lo, hi in zip(bps[:-1], bps[1:]):
        if hi - lo <= 0:
            continue
        mid = 0.5 * (lo + hi)
        i, j = envR.piece_at(mid), envC.piece_at(mid)
        # f_I(s) = A s^2 + B s + K on this interval
        AR, BR, KR = -qR[2], Rdy[i] - qR[1], Ry[i] - qR[0]
        AC, BC, KC = -qC[2], Cdx[j] - qC[1], Cx[j] - qC[0]
        pts = []
        for A, B in ((AR, BR), (AC, BC)):
            if abs(A) > 1e-15:
                pts.append(-B / (2 * A))
        A, B, K = AR - AC, BR - BC, KR - KC
        if abs(A) > 1e-15:
            disc = B * B - 4 * A * K
            if disc >= 0:
                sq = math.sqrt(disc)
                pts += [(-B + sq) / (2 * A), (-B - sq) / (2 * A)]
        elif abs(B) > 1e-15:
            pts.append(-K / B)
        pts = [p for p in pts if lo <= p <= hi]
        if pts:
            cands.append(np.array(pts))
    s = np.concatenate(cands)
    fR, fC = _segment_values(R, C, x, y, dx, dy, s)
    k = int(np.argmin(np.maximum(fR, fC)))
    return float(s[k])


def _certificate(sol, kinds, game, x, y, delta) -> StationaryCertificate:
    m, n = game.shape
    lam = np.clip(-np.asarray(sol.dual[: len(kinds)]), 0.0, None)
    w = np.zeros(m)
    z = np.zeros(n)
    for (kind, idx), val in zip(kinds, lam):
        if kind == "R":
            w[idx] += val
        else:
            z[idx] += val
    total = w.sum() + z.sum()
    rho = float(w.sum() / total) if total > 0 else 1.0
    w = w / w.sum() if w.sum() > 1e-12 else best_response_vec(game, Side.ROW, y)
    z = z / z.sum() if z.sum() > 1e-12 else best_response_vec(game, Side.COL, x)
    return StationaryCertificate(rho, _as_row(w), _as_col(z), delta)


def best_response_vec(game: BimatrixGame, side: Side, opponent) -> np.ndarray:
    i = best_response(game, side, opponent)[0]
    e = np.zeros(game.size_for(side))
    e[i] = 1.0
    return e


def descend_to_stationary(game: BimatrixGame, config: DescentConfig = DescentConfig()) -> DescentResult:
    """Steepest descent on ``f`` until the directional derivative is ``>= -delta``.

    Each iteration solves the steepest-descent LP and moves to the exact
    minimizer of ``f`` along the chosen segment, so ``f`` never increases.  The
    dual of the final LP yields the certificate ``(rho, w, z)``.
    """
    R, C = game.R, game.C
    m, n = game.shape
    cap = config.max_iters if config.max_iters is not None else 10_000 * (m + n)
    base_tau = config.active_tol()
    tau = base_tau
    if config.start is None:
        x, y = np.full(m, 1.0 / m), np.full(n, 1.0 / n)
    else:
        x, y = _clean(config.start[0]), _clean(config.start[1])
    f = regrets(game, x, y).f
    history = [f]
    converged = False
    it = 0
    while True:
        lp, kinds = _direction_program(R, C, x, y, tau)
        sol = solve_lp(lp)
        if not sol.ok:
            raise SolverError(f"steepest-descent program returned status {sol.status}")
        V = float(sol.objective)
        if V >= -max(min(config.delta, 0.5 * f), _DERIVATIVE_FLOOR):
            converged = True
            break
        if it >= cap:
            log.warning("descent hit the iteration cap (%d) with derivative %.3g", cap, V)
            break
        xp, yp = _clean(sol.primal[:m]), _clean(sol.primal[m : m + n])
        dx, dy = xp - x, yp - y
        s = _line_search(R, C, x, y, dx, dy)
        x_new, y_new = _clean(x + s * dx), _clean(y + s * dy)
        f_new = regrets(game, x_new, y_new).f
        it += 1
        if not f_new < f:
            # a component or index just outside the near-active set blocks the
            # step; widen the set and retry
            if tau >= 1.0:
                log.warning("descent stalled at f=%.6g with derivative %.3g", f, V)
                break
            tau = min(1.0, 10 * tau)
            continue
        tau = base_tau
        x, y, f = x_new, y_new, f_new
        history.append(f)
    cert = _certificate(sol, kinds, game, x, y, config.delta)
    return DescentResult(_as_row(x), _as_col(y), cert, V, it, converged, tuple(history))


def _orient_descent(game, res: DescentResult):
    """Swap players when ``f_R(w, z) < f_C(w, z)``."""
    cert = res.certificate
    p = regrets(game, cert.w, cert.z)
    if p.fR >= p.fC:
        return game, False, res.x, res.y, cert
    return game.transpose(), True, _as_row(res.y.weights), _as_col(res.x.weights), cert.transposed()


def _descent_meta(res: DescentResult, cert, config) -> dict:
    return {
        "rho": cert.rho,
        "delta": config.delta,
        "derivative": res.derivative,
        "iterations": res.iterations,
        "converged": res.converged,
        "f_stationary": res.history[-1],
    }


def search_ts(game: BimatrixGame, config: DescentConfig = DescentConfig()) -> SearchOutput:
    res = descend_to_stationary(game, config)
    og, transposed, xs, ys, cert = _orient_descent(game, res)
    named = {"xs": xs, "ys": ys, "w": cert.w, "z": cert.z}
    meta = _descent_meta(res, cert, config)
    out = _output("ts", game, [xs, cert.w], [ys, cert.z], named, meta, transposed)
    return out


TIE_BREAKS = ("lowest", "highest")


def search_dfm(
    game: BimatrixGame, config: DescentConfig = DescentConfig(), theta: float = 0.5, tie_break: str = "lowest"
) -> SearchOutput:
    """Stationary point plus the extra row ``wh``, a best response to ``yh``.

    ``yh = theta z + (1 - theta) ys``.  In the orientation with
    ``f_R(w, z) >= f_C(w, z)`` the output is rows ``{xs, w, wh}`` and columns
    ``{ys, z}``.  ``tie_break`` picks the lowest or highest index among tied
    best responses to ``yh``; the analysis holds for any choice, and adversarial
    instances may need ``"highest"`` to reach their worst case.
    """
    if not 0 < theta < 1:
        raise InputError("theta must lie in (0, 1)")
    if tie_break not in TIE_BREAKS:
        raise InputError(f"tie_break must be one of {TIE_BREAKS}")
    res = descend_to_stationary(game, config)
    og, transposed, xs, ys, cert = _orient_descent(game, res)
    yh = _as_col(theta * cert.z.weights + (1 - theta) * ys.weights)
    ties = best_response(og, Side.ROW, yh)
    wh = _pure(ties[0] if tie_break == "lowest" else ties[-1], og.m, Side.ROW)
    named = {"xs": xs, "ys": ys, "w": cert.w, "z": cert.z, "yh": yh, "wh": wh}
    meta = _descent_meta(res, cert, config)
    meta["theta"] = theta
    return _output("dfm", game, [xs, cert.w, wh], [ys, cert.z], named, meta, transposed)


# ----------------------------------------------------------------------------
# vertex tables and relation sets
# ----------------------------------------------------------------------------

# alias -> (regret component, row strategy name, column strategy name)
VERTEX_ALIASES: dict[str, dict[str, tuple[str, str, str]]] = {
    "kps": {
        "u1": ("R", "i1", "j1"), "v1": ("R", "i1", "j2"), "h1": ("R", "i2", "j1"), "g1": ("R", "i2", "j2"),
        "u2": ("C", "i1", "j1"), "v2": ("C", "i1", "j2"), "h2": ("C", "i2", "j1"), "g2": ("C", "i2", "j2"),
    },
    "dmp06": {"a": ("R", "i", "j"), "b": ("R", "k", "j"), "c": ("C", "i", "j"), "d": ("C", "k", "j")},
    "dmp07": {
        "u1": ("R", "alpha", "beta"), "v1": ("R", "alpha", "y"), "h1": ("R", "x", "beta"), "g1": ("R", "x", "y"),
        "u2": ("C", "alpha", "beta"), "v2": ("C", "alpha", "y"), "h2": ("C", "x", "beta"), "g2": ("C", "x", "y"),
    },
    "bbm38": {
        "g1": ("R", "x*", "y*"), "g2": ("C", "x*", "y*"), "h1": ("R", "x*", "b2"), "h2": ("C", "x*", "b2"),
        "v1": ("R", "r1", "b2"), "v2": ("C", "r1", "b2"), "u1": ("R", "r1", "y*"), "u2": ("C", "r1", "y*"),
    },
    "cdffjs": {
        "u1": ("R", "xh", "j"), "v1": ("R", "xh", "y*"), "h1": ("R", "x*", "j"), "g1": ("R", "x*", "y*"),
        "s1": ("R", "r", "j"), "t1": ("R", "r", "y*"),
        "u2": ("C", "xh", "j"), "v2": ("C", "xh", "y*"), "h2": ("C", "x*", "j"), "g2": ("C", "x*", "y*"),
        "s2": ("C", "r", "j"), "t2": ("C", "r", "y*"),
    },
    "bbm36": {
        "a": ("R", "xh", "y*"), "b": ("R", "xh", "b2"), "c": ("C", "xh", "y*"), "d": ("C", "xh", "b2"),
        "g1": ("R", "x*", "y*"), "g2": ("C", "x*", "y*"), "fC_x*_b2": ("C", "x*", "b2"),
    },
    "ts": {
        "za": ("R", "xs", "ys"), "zb": ("C", "xs", "ys"), "zc": ("R", "xs", "z"), "zd": ("C", "xs", "z"),
        "ze": ("R", "w", "ys"), "zf": ("C", "w", "ys"), "zg": ("R", "w", "z"), "zh": ("C", "w", "z"),
    },
}
VERTEX_ALIASES["dfm"] = dict(
    VERTEX_ALIASES["ts"],
    zi=("R", "wh", "z"), zj=("R", "wh", "ys"), zk=("C", "wh", "z"), zl=("C", "wh", "ys"),
    zm=("R", "w", "yh"), zn=("R", "xs", "yh"), fR_hat=("R", "wh", "yh"), fC_hat=("C", "wh", "yh"),
)  # fmt: skip


def vertex_table(out: SearchOutput) -> dict[str, float]:
    """Regrets at the named vertex pairs, plus the phase's scalar parameters."""
    og = out.oriented_game()
    table = {}
    for alias, (comp, r, c) in VERTEX_ALIASES[out.algorithm].items():
        p = regrets(og, out.named[r], out.named[c])
        table[alias] = p.fR if comp == "R" else p.fC
    for k, v in out.metadata.items():
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            table.setdefault(k, float(v))
    if out.algorithm == "bbm36":
        # the column player's gain x*'C b2 - x*'C y*; the analysis' bounds on b
        # and c are stated in terms of this quantity
        table["h2"] = table["g2"] - table["fC_x*_b2"]
    return table


# Each relation is (name, residual function); the relation holds when the
# residual is <= 0.  Equalities contribute their absolute difference.
Relation = tuple[str, Callable[[dict], float]]


def _le(a: str, b: str) -> Relation:
    return f"{a} <= {b}", lambda t: t[a] - t[b]


def _zero(a: str) -> Relation:
    return f"{a} = 0", lambda t: abs(t[a])


def _eq(a: str, b: str) -> Relation:
    return f"{a} = {b}", lambda t: abs(t[a] - t[b])


def _unit_box(names) -> list[Relation]:
    out = []
    for a in names:
        out.append((f"0 <= {a} <= 1", lambda t, a=a: max(-t[a], t[a] - 1)))
    return out


RELATIONS: dict[str, list[Relation]] = {
    "kps": [_zero("u1"), _zero("g2")],
    "dmp06": [_zero("b"), _zero("c")],
    "dmp07": [
        ("u1 <= 1 + 3eps/2 - v_R", lambda t: t["u1"] - (1 + 1.5 * t["eps"] - t["v_R"])),
        ("v1 <= 2eps", lambda t: t["v1"] - 2 * t["eps"]),
        ("h1 <= 1 + 3eps/2 - v_R", lambda t: t["h1"] - (1 + 1.5 * t["eps"] - t["v_R"])),
        ("g1 <= v_R + eps/2", lambda t: t["g1"] - (t["v_R"] + t["eps"] / 2)),
        ("u2 <= 1 + 3eps/2 - v_C", lambda t: t["u2"] - (1 + 1.5 * t["eps"] - t["v_C"])),
        ("v2 <= 1 + 3eps/2 - v_C", lambda t: t["v2"] - (1 + 1.5 * t["eps"] - t["v_C"])),
        ("h2 <= 2eps", lambda t: t["h2"] - 2 * t["eps"]),
        ("g2 <= v_C + eps/2", lambda t: t["g2"] - (t["v_C"] + t["eps"] / 2)),
        ("0 <= v_R <= 1", lambda t: max(-t["v_R"], t["v_R"] - 1)),
        ("0 <= v_C <= 1", lambda t: max(-t["v_C"], t["v_C"] - 1)),
    ],
    "bbm38": [
        _zero("u1"),
        _zero("v2"),
        _le("g2", "g1"),
        ("u2 <= 1 - g1", lambda t: t["u2"] - (1 - t["g1"])),
    ],
    "cdffjs": [
        _le("v1", "v_R"),
        _le("v2", "v_C"),
        _zero("g1"),
        _zero("h2"),
        _zero("s1"),
        ("h1 <= 1 - v_R", lambda t: t["h1"] - (1 - t["v_R"])),
        _le("v_C", "v_R"),
    ],
    "bbm36": [
        ("a <= (1 - delta1) g1", lambda t: t["a"] - (1 - t["delta1"]) * t["g1"]),
        ("b <= 1 - (1 - delta1) h2", lambda t: t["b"] - (1 - (1 - t["delta1"]) * t["h2"])),
        (
            "c <= (1 - delta1) h2 + delta1 (1 - g1)",
            lambda t: t["c"] - ((1 - t["delta1"]) * t["h2"] + t["delta1"] * (1 - t["g1"])),
        ),
        _zero("d"),
        _le("g2", "g1"),
        _le("h2", "g2"),
    ],
    "ts": [
        _eq("za", "zb"),
        _zero("zd"),
        _zero("ze"),
        _le("zg", "zc"),
        _le("za", "zc"),
        _le("zh", "zf"),
        _le("zb", "zf"),
        _le("zh", "zg"),
        ("za <= rho (zc - zg)", lambda t: t["za"] - t["rho"] * (t["zc"] - t["zg"])),
        ("za <= (1 - rho)(zf - zh)", lambda t: t["za"] - (1 - t["rho"]) * (t["zf"] - t["zh"])),
    ]
    + _unit_box(["z" + c for c in "abcdefgh"]),
    "dfm": [
        _zero("zd"),
        _zero("ze"),
        _eq("za", "zb"),
        _le("zg", "zc"),
        _le("zm", "zg"),
        _le("zn", "zc"),
        _le("za", "zn"),
        _le("zh", "zf"),
        _le("zb", "zf"),
        _le("zh", "zg"),
        ("za <= rho (zc - zg)", lambda t: t["za"] - t["rho"] * (t["zc"] - t["zg"])),
        ("zb <= (1 - rho)(zf - zh)", lambda t: t["zb"] - (1 - t["rho"]) * (t["zf"] - t["zh"])),
        (
            "za <= rho zj + (1 - rho)(zl - zk)",
            lambda t: t["za"] - (t["rho"] * t["zj"] + (1 - t["rho"]) * (t["zl"] - t["zk"])),
        ),
        _zero("fR_hat"),
        # for theta = 1/2 these read zg >= zi + zj and fC_hat = (zl + zk)/2
        ("theta (zg - zi) >= (1 - theta) zj", lambda t: (1 - t["theta"]) * t["zj"] - t["theta"] * (t["zg"] - t["zi"])),
        (
            "fC_hat = (1 - theta) zl + theta zk",
            lambda t: abs(t["fC_hat"] - ((1 - t["theta"]) * t["zl"] + t["theta"] * t["zk"])),
        ),
    ]
    + _unit_box(["z" + c for c in "abcfghijklmn"]),
}


def check_relations(out: SearchOutput, tol: float = 1e-9) -> list[tuple[str, float]]:
    """Relations of the phase violated by more than ``tol``, with residuals."""
    table = vertex_table(out)
    bad = []
    for name, fn in RELATIONS[out.algorithm]:
        r = fn(table)
        if r > tol:
            bad.append((name, float(r)))
    return bad


# ----------------------------------------------------------------------------
# end-to-end
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    algorithm: str
    search: SearchOutput
    mixing: MixingSolution
    wall_time: float

    @property
    def value(self) -> RegretPair:
        return self.mixing.value


def search(
    game: BimatrixGame,
    algorithm: str,
    *,
    delta: float = 1e-3,
    eps: float = 0.05,
    theta: float = 0.5,
    start: Optional[tuple] = None,
    tie_break: str = "lowest",
) -> SearchOutput:
    """Dispatch to a search phase by id.

    ``start`` (an ``(x, y)`` pair) and ``tie_break`` only affect the descent
    based phases ``ts`` and ``dfm``.
    """
    alg = algorithm.lower()
    if alg == "kps":
        return search_kps(game)
    if alg == "dmp06":
        return search_dmp06(game)
    if alg == "dmp07":
        return search_dmp07(game, eps)
    if alg == "bbm38":
        return search_bbm38(game)
    if alg == "bbm36":
        return search_bbm36(game)
    if alg == "cdffjs":
        return search_cdffjs(game)
    if alg == "ts":
        return search_ts(game, DescentConfig(delta=delta, start=start))
    if alg == "dfm":
        return search_dfm(game, DescentConfig(delta=delta, start=start), theta, tie_break)
    raise InputError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")


def run(game: BimatrixGame, algorithm: str, **kwargs) -> RunResult:
    """Search phase followed by the exact mixing phase."""
    t0 = time.perf_counter()
    out = search(game, algorithm, **kwargs)
    sol = mix(game, list(out.rows), list(out.cols))
    return RunResult(out.algorithm, out, sol, time.perf_counter() - t0)
