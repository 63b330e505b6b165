"""A small dense two-phase simplex solver with dual values.

The programs solved inside this package are tiny (tens of variables), but
their dual multipliers are needed exactly -- the descent procedure reads its
stationarity certificate off the dual of the steepest-descent program.  A
textbook tableau simplex gives basic optimal duals directly, so that is what
lives here.

Pricing uses Dantzig's most-negative-reduced-cost rule and switches
permanently to Bland's rule after a run of degenerate pivots, which rules out
cycling.

Dual sign convention: ``dual[i]`` is the derivative of the optimal objective
with respect to ``rhs[i]``.  For a minimization, ``<=`` rows therefore carry
nonpositive multipliers and ``>=`` rows nonnegative ones; for maximization the
signs flip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, SolverError
from .game import BimatrixGame

FEAS_TOL = 1e-8
DUAL_TOL = 1e-7
_PIVOT_TOL = 1e-11
_COST_TOL = 1e-11

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RELATIONS = ("<=", "=", ">=")


@dataclass(frozen=True)
class LinearProgram:
    """``min/max c'x`` subject to ``A x (rel) b`` and per-variable bounds.

    ``bounds`` holds one ``(lower, upper)`` pair per variable, ``None`` meaning
    unbounded in that direction.  The default is ``x >= 0``.
    """

    c: np.ndarray
    A: np.ndarray
    relations: tuple
    b: np.ndarray
    sense: str = "min"
    bounds: Optional[tuple] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, c.size)
        b = np.asarray(self.b, dtype=float).ravel()
        rel = tuple(self.relations)
        if A.ndim != 2 or A.shape[1] != c.size:
            raise InputError(f"constraint matrix shape {A.shape} does not match {c.size} variables")
        if A.shape[0] != b.size or len(rel) != b.size:
            raise InputError("need one relation and one rhs per constraint row")
        bad = [r for r in rel if r not in _RELATIONS]
        if bad:
            raise InputError(f"unknown relation(s) {bad}; use one of {_RELATIONS}")
        if self.sense not in ("min", "max"):
            raise InputError("sense must be 'min' or 'max'")
        bounds = self.bounds
        if bounds is None:
            bounds = tuple((0.0, None) for _ in range(c.size))
        bounds = tuple(tuple(bd) for bd in bounds)
        if len(bounds) != c.size:
            raise InputError("need one (lower, upper) bound pair per variable")
        for lo, hi in bounds:
            if lo is not None and hi is not None and lo > hi:
                raise InputError(f"empty variable bound [{lo}, {hi}]")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InputError("program data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "relations", rel)
        object.__setattr__(self, "bounds", bounds)

    @property
    def num_vars(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: str
    primal: Optional[np.ndarray] = None
    dual: Optional[np.ndarray] = None
    objective: Optional[float] = None
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0
    bland: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class _Builder:
    """Accumulates rows of a program: ``add(coeffs, rel, rhs)``."""

    def __init__(self, num_vars: int):
        self.num_vars = num_vars
        self.rows: list[np.ndarray] = []
        self.rel: list[str] = []
        self.rhs: list[float] = []

    def add(self, coeffs, rel: str, rhs: float):
        row = np.asarray(coeffs, dtype=float)
        if row.shape != (self.num_vars,):
            raise InputError("row length mismatch")
        self.rows.append(row)
        self.rel.append(rel)
        self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def program(self, c, sense="min", bounds=None) -> LinearProgram:
        A = np.array(self.rows) if self.rows else np.zeros((0, self.num_vars))
        return LinearProgram(c, A, tuple(self.rel), np.array(self.rhs), sense, bounds)


def program_builder(num_vars: int) -> _Builder:
    return _Builder(num_vars)


def solve_lp(lp: LinearProgram, max_iter: Optional[int] = None, degenerate_limit: int = 50) -> LpSolution:
    """Solve ``lp`` and return primal, duals and status."""
    n = lp.num_vars
    # --- variable substitution x = offset + T z, z >= 0 -------------------
    cols = []  # (original index, sign)
    offset = np.zeros(n)
    upper_rows = []  # (std column, upper span)
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo is not None:
            offset[j] = lo
            cols.append((j, 1.0))
            if hi is not None:
                upper_rows.append((len(cols) - 1, hi - lo))
        elif hi is not None:
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nz = len(cols)
    T = np.zeros((n, nz))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s

    A = lp.A @ T
    b = lp.b - lp.A @ offset
    rel = list(lp.relations)
    n_orig_rows = A.shape[0]
    if upper_rows:
        extra = np.zeros((len(upper_rows), nz))
        for r, (k, span) in enumerate(upper_rows):
            extra[r, k] = 1.0
        A = np.vstack([A, extra])
        b = np.concatenate([b, [span for _, span in upper_rows]])
        rel += ["<="] * len(upper_rows)

    c = lp.c @ T
    if lp.sense == "max":
        c = -c
    const = float(lp.c @ offset)

    # --- slack columns --------------------------------------------------
    k_rows = A.shape[0]
    n_slack = sum(r != "=" for r in rel)
    S = np.zeros((k_rows, n_slack))
    s = 0
    for i, r in enumerate(rel):
        if r == "<=":
            S[i, s] = 1.0
            s += 1
        elif r == ">=":
            S[i, s] = -1.0
            s += 1
    A_std = np.hstack([A, S])
    c_std = np.concatenate([c, np.zeros(n_slack)])
    flip = np.where(b < 0, -1.0, 1.0)
    A_std = A_std * flip[:, None]
    b_std = b * flip

    res = _two_phase(A_std, b_std, c_std, max_iter, degenerate_limit)
    if res["status"] != OPTIMAL:
        return LpSolution(res["status"], iterations=res["iterations"], bland=res["bland"])

    z = res["x"][:nz]
    x = offset + T @ z
    y_std = res["y"]  # derivative of the minimized objective wrt b_std
    y = (y_std * flip)[:n_orig_rows]
    if lp.sense == "max":
        y = -y
    obj = float(lp.c @ x)
    reduced = lp.c - lp.A.T @ y
    return LpSolution(
        OPTIMAL,
        primal=x,
        dual=y,
        objective=obj,
        reduced_costs=reduced,
        iterations=res["iterations"],
        bland=res["bland"],
    )


def _two_phase(A, b, c, max_iter, degenerate_limit):
    k, N = A.shape
    if max_iter is None:
        max_iter = 200 * (k + N) + 1000
    # Phase 1 tableau with one artificial per row.
    tab = np.zeros((k + 1, N + k + 1))
    tab[:k, :N] = A
    tab[:k, N : N + k] = np.eye(k)
    tab[:k, -1] = b
    basis = list(range(N, N + k))
    tab[k, :N] = -A.sum(axis=0)
    tab[k, -1] = -b.sum()
    state = {"iterations": 0, "bland": False, "degenerate": 0}

    status = _simplex(tab, basis, N + k, state, max_iter, degenerate_limit)
    if status != OPTIMAL:  # phase 1 is bounded below by zero
        raise SolverError("phase 1 failed unexpectedly", state)
    scale = max(1.0, float(np.abs(b).max()) if b.size else 1.0)
    if -tab[k, -1] > FEAS_TOL * scale:
        return {"status": INFEASIBLE, **state}

    # Drive artificial variables out of the basis; drop redundant rows.
    keep = list(range(k))
    for r in range(k):
        if basis[r] >= N:
            row = tab[r, :N]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                _pivot(tab, basis, r, int(cand[np.argmax(np.abs(row[cand]))]))
            else:
                keep.remove(r)
    rows = keep
    tab2 = np.zeros((len(rows) + 1, N + 1))
    tab2[:-1, :N] = tab[rows, :N]
    tab2[:-1, -1] = tab[rows, -1]
    basis2 = [basis[r] for r in rows]
    # Phase 2 objective row: reduced costs c - c_B B^-1 A.
    cb = c[basis2]
    tab2[-1, :N] = c - cb @ tab2[:-1, :N]
    tab2[-1, -1] = -cb @ tab2[:-1, -1]
    state["degenerate"] = 0
    status = _simplex(tab2, basis2, N, state, max_iter, degenerate_limit)
    if status != OPTIMAL:
        return {"status": status, **state}

    x = np.zeros(N)
    for r, j in enumerate(basis2):
        x[j] = tab2[r, -1]
    # duals from B' y = c_B using the original data of the kept rows
    B = A[np.ix_(rows, basis2)]
    y = np.zeros(k)
    if rows:
        try:
            y_rows = np.linalg.solve(B.T, c[basis2])
        except np.linalg.LinAlgError:
            y_rows = np.linalg.lstsq(B.T, c[basis2], rcond=None)[0]
        y[rows] = y_rows
    return {"status": OPTIMAL, "x": x, "y": y, **state}


def _pivot(tab, basis, r, j):
    tab[r] /= tab[r, j]
    col = tab[:, j].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])
    basis[r] = j


def _simplex(tab, basis, n_cols, state, max_iter, degenerate_limit):
    k = tab.shape[0] - 1
    while True:
        if state["iterations"] >= max_iter:
            raise SolverError(
                "simplex iteration limit exceeded",
                {"iterations": state["iterations"], "rows": k, "cols": n_cols, "bland": state["bland"]},
            )
        cost = tab[k, :n_cols]
        if state["bland"]:
            neg = np.flatnonzero(cost < -_COST_TOL)
            if neg.size == 0:
                return OPTIMAL
            j = int(neg[0])
        else:
            j = int(np.argmin(cost))
            if cost[j] >= -_COST_TOL:
                return OPTIMAL
        column = tab[:k, j]
        pos = np.flatnonzero(column > _PIVOT_TOL)
        if pos.size == 0:
            return UNBOUNDED
        ratios = tab[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        if state["bland"]:
            r = int(min(ties, key=lambda i: basis[i]))
        else:
            r = int(ties[np.argmax(column[ties])])
        if tab[r, -1] <= 1e-12:
            state["degenerate"] += 1
            if state["degenerate"] > degenerate_limit:
                state["bland"] = True
        else:
            state["degenerate"] = 0
        _pivot(tab, basis, r, j)
        state["iterations"] += 1


def check_solution(lp: LinearProgram, sol: LpSolution) -> dict:
    """Primal feasibility, dual sign and complementary-slackness residuals."""
    x, y = sol.primal, sol.dual
    Ax = lp.A @ x
    prim = 0.0
    for i, r in enumerate(lp.relations):
        gap = Ax[i] - lp.b[i]
        if r == "<=":
            prim = max(prim, gap)
        elif r == ">=":
            prim = max(prim, -gap)
        else:
            prim = max(prim, abs(gap))
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo is not None:
            prim = max(prim, lo - x[j])
        if hi is not None:
            prim = max(prim, x[j] - hi)
    sgn = 1.0 if lp.sense == "min" else -1.0
    dual_sign = 0.0
    cs = 0.0
    for i, r in enumerate(lp.relations):
        if r == "<=":
            dual_sign = max(dual_sign, sgn * y[i])
        elif r == ">=":
            dual_sign = max(dual_sign, -sgn * y[i])
        if r != "=":
            cs = max(cs, abs(y[i] * (Ax[i] - lp.b[i])))
    d = sol.reduced_costs
    for j, (lo, hi) in enumerate(lp.bounds):
        at_lo = lo is not None and abs(x[j] - lo) <= FEAS_TOL
        at_hi = hi is not None and abs(x[j] - hi) <= FEAS_TOL
        dj = sgn * d[j]
        if at_lo and at_hi:
            continue
        if at_lo:
            dual_sign = max(dual_sign, -dj)
        elif at_hi:
            dual_sign = max(dual_sign, dj)
        else:
            cs = max(cs, abs(d[j]))
    # dual objective: b'y plus bound multipliers times the bounds they price
    dual_obj = float(lp.b @ y)
    for j, (lo, hi) in enumerate(lp.bounds):
        if abs(d[j]) > 0:
            bound = lo if (lo is not None and (hi is None or abs(x[j] - lo) <= abs(x[j] - hi))) else hi
            dual_obj += d[j] * (bound if bound is not None else x[j])
    return {
        "primal_residual": float(prim),
        "dual_sign_residual": float(dual_sign),
        "complementary_slackness": float(cs),
        "duality_gap": abs(float(sol.objective) - dual_obj),
    }


@dataclass(frozen=True)
class ZeroSumSolution:
    x: np.ndarray
    y: np.ndarray
    value: float
    matrix: np.ndarray

    def residual(self) -> float:
        A = self.matrix
        row_gain = (A @ self.y).max() - self.x @ A @ self.y
        col_gain = self.x @ A @ self.y - (A.T @ self.x).min()
        return float(max(row_gain, col_gain))


def maximin(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Optimal mixed strategy of the maximizing (row) player of matrix ``A``."""
    m, n = A.shape
    bld = program_builder(m + 1)
    for j in range(n):
        row = np.zeros(m + 1)
        row[:m] = A[:, j]
        row[m] = -1.0
        bld.add(row, ">=", 0.0)
    bld.add(np.r_[np.ones(m), 0.0], "=", 1.0)
    c = np.zeros(m + 1)
    c[m] = 1.0
    bounds = [(0.0, None)] * m + [(None, None)]
    sol = solve_lp(bld.program(c, "max", bounds))
    if not sol.ok:
        raise SolverError(f"maximin program returned status {sol.status}")
    x = np.clip(sol.primal[:m], 0.0, None)
    return x / x.sum(), float(sol.primal[m])


def solve_zero_sum(game: BimatrixGame | np.ndarray, t: float | None = None) -> ZeroSumSolution:
    """Equilibrium of the zero-sum game ``(R - C/t, C/t - R)``.

    ``t=None`` (or ``t=1``) is the plain ``(R - C, C - R)`` game.  A bare
    matrix is treated as the row player's payoff of a zero-sum game.
    """
    if isinstance(game, BimatrixGame):
        if t is None:
            t = 1.0
        if not t > 0:
            raise InputError("parameter t must be positive")
        A = game.R - game.C / t
    else:
        A = np.asarray(game, dtype=float)
    x, v_row = maximin(A)
    y, v_col = maximin(-A.T)
    sol = ZeroSumSolution(x, y, 0.5 * (v_row - v_col), A)
    if sol.residual() > DUAL_TOL * max(1.0, float(np.abs(A).max())):
        raise SolverError("zero-sum solution failed its regret check", {"residual": sol.residual()})
    return sol
