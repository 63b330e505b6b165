"""Approximation-bound analysis by upper-bound constructors.

A search phase guarantees relations between the regrets at the vertices of
its mixing domain.  Replacing the convex max-terms of ``f`` by linear
interpolation of their vertex values gives an explicit upper bound on the
mixing optimum in terms of those vertex regrets; maximizing that bound over
every table allowed by the relations yields the algorithm's approximation
bound.

The pieces here:

* :func:`upper_bound_12` -- exact ``min_a max(a aR + (1-a) bR, a aC + (1-a) bC)``
  (the bound along one edge of a mixing domain);
* :func:`constructor_simple` / :func:`constructor_strong` -- edge terms or a
  bilinear term built from a table of vertex regrets;
* :class:`BoundProgram` -- a declarative, JSON-serializable max-min program:
  boxed variables, relations written as expression strings, and terms;
* :func:`build_bound_program` -- the programs of the eight supported search
  phases;
* :func:`solve_bound_program` -- differential evolution plus a batched
  multistart direction search for the outer maximum;
* :func:`tightness_report` and :func:`verify_tight_instance`.
"""

from __future__ import annotations

import ast
import functools
import logging
import math
import operator
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, differential_evolution, minimize_scalar

from .errors import InputError, SolverError
from .game import BimatrixGame, Side, best_response, suppmin
from .mixing import grid_min_batch, mix, mix_22
from .search import BBM36_BETA

log = logging.getLogger(__name__)

#: relation slack tolerated at a feasible point
FEASIBILITY_TOL = 1e-12
#: constraints with smaller slack are reported as active
ACTIVE_TOL = 1e-6

BOUND_IDS = ("kps", "dmp06", "dmp07", "bbm38", "cdffjs", "bbm36", "ts", "dfm")


# ----------------------------------------------------------------------------
# the (1,2) bound
# ----------------------------------------------------------------------------


def minmax_case(aR: float, aC: float, bR: float, bC: float) -> int:
    """Case number (1-4) of the quadruple in the closed-form case analysis.

    1: the row line dominates at both ends; 2: the column line does; 3: the
    two lines are parallel; 4: they cross inside ``(0, 1)``.
    """
    if aC <= aR and bC <= bR:
        return 1
    if aR <= aC and bR <= bC:
        return 2
    if aR + bC - aC - bR == 0:
        return 3
    return 4


def closed_form_12(aR: float, aC: float, bR: float, bC: float) -> float:
    """The four-case formula for the (1,2) bound, taken literally.

    In case 4 it returns the value at the crossing of the two lines.  That
    value is the minimum only when the upper envelope is V-shaped; when both
    lines slope the same way the minimum sits at an endpoint and the formula
    overestimates it.  :func:`upper_bound_12` is the exact version.
    """
    case = minmax_case(aR, aC, bR, bC)
    if case == 1:
        return min(aR, bR)
    if case == 2:
        return min(aC, bC)
    if case == 3:
        return min(max(aC, bC), max(aR, bR))
    return (aR * bC - aC * bR) / (aR + bC - aC - bR)


def upper_bound_12(aR: float, aC: float, bR: float, bC: float) -> tuple[float, float]:
    """Exact ``min`` over ``a`` in ``[0, 1]`` of ``max(a aR + (1-a) bR, a aC + (1-a) bC)``.

    Returns ``(h, a)``.  ``aR, aC`` are the values at ``a = 1``, ``bR, bC`` those
    at ``a = 0``.  The minimum of the maximum of two lines is attained at an
    endpoint or at their crossing.
    """
    h, a = upper_bound_12_vec(aR, aC, bR, bC)
    return float(h), float(a)


def upper_bound_12_vec(aR, aC, bR, bC) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`upper_bound_12`; returns ``(h, a)`` arrays."""
    aR, aC, bR, bC = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (aR, aC, bR, bC)))
    at1 = np.maximum(aR, aC)
    at0 = np.maximum(bR, bC)
    den = aR - bR - aC + bC
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (bC - bR) / den
    inside = (den != 0) & (t > 0) & (t < 1)
    with np.errstate(invalid="ignore"):
        cross = np.where(inside, bR + t * (aR - bR), np.inf)
        cross = np.maximum(cross, np.where(inside, bC + t * (aC - bC), np.inf))
    h = np.minimum(np.minimum(at0, at1), cross)
    a = np.where(h == at0, 0.0, np.where(h == at1, 1.0, np.where(inside, t, 0.0)))
    return h, a


def _strong_coefficients(corners: np.ndarray) -> np.ndarray:
    """``(u, v, h, g)`` corner values -> bilinear coefficients in ``(a, b)``.

    ``u`` is the value at ``a = b = 1``, ``v`` at ``(1, 0)``, ``h`` at ``(0, 1)``
    and ``g`` at ``(0, 0)``.
    """
    u, v, h, g = (corners[..., k] for k in range(4))
    return np.stack([g, v - g, h - g, u - v - h + g], axis=-1)


def strong_bound_22(R_corners, C_corners) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``min`` over the unit square of the max of two bilinear interpolants.

    Corner arrays have a trailing axis of length 4 ordered ``(u, v, h, g)``.
    Returns ``(h, a, b)`` arrays.
    """
    kr = _strong_coefficients(np.atleast_2d(np.asarray(R_corners, dtype=float)))
    kc = _strong_coefficients(np.atleast_2d(np.asarray(C_corners, dtype=float)))
    a, b, v = grid_min_batch(kr, kc)
    return v, a, b


def strong_bound_diagonal(R_corners, C_corners) -> tuple[np.ndarray, np.ndarray]:
    """As :func:`strong_bound_22` restricted to ``a = b``; returns ``(h, a)``."""
    kr = _strong_coefficients(np.atleast_2d(np.asarray(R_corners, dtype=float)))
    kc = _strong_coefficients(np.atleast_2d(np.asarray(C_corners, dtype=float)))
    # along a = b each side is k0 + (k1 + k2) a + k3 a^2
    qr = np.stack([kr[:, 0], kr[:, 1] + kr[:, 2], kr[:, 3]], axis=1)
    qc = np.stack([kc[:, 0], kc[:, 1] + kc[:, 2], kc[:, 3]], axis=1)
    d = qr - qc
    cands = [np.zeros(len(qr)), np.ones(len(qr))]
    with np.errstate(divide="ignore", invalid="ignore"):
        for q in (qr, qc):
            cands.append(np.where(q[:, 2] > 0, -q[:, 1] / (2 * q[:, 2]), np.nan))
        disc = d[:, 1] ** 2 - 4 * d[:, 2] * d[:, 0]
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        quad = np.abs(d[:, 2]) > 1e-15
        cands.append(np.where(quad, (-d[:, 1] + sq) / (2 * d[:, 2]), -d[:, 0] / d[:, 1]))
        cands.append(np.where(quad, (-d[:, 1] - sq) / (2 * d[:, 2]), np.nan))
    A = np.column_stack(cands)
    A = np.where((A >= 0) & (A <= 1), A, np.nan)

    def val(q):
        return q[:, :1] + q[:, 1:2] * A + q[:, 2:3] * A * A

    with np.errstate(invalid="ignore"):
        v = np.where(np.isnan(A), np.inf, np.maximum(val(qr), val(qc)))
    k = np.argmin(v, axis=1)
    rows = np.arange(len(qr))
    return v[rows, k], A[rows, k]


# ----------------------------------------------------------------------------
# expressions
# ----------------------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {"sqrt": np.sqrt, "min": np.minimum, "max": np.maximum, "abs": np.abs}
_COMPARE = {ast.LtE: "<=", ast.GtE: ">=", ast.Eq: "=="}


class Expr:
    """Arithmetic expression over named scalars, evaluated elementwise.

    Supports numbers, names, ``+ - * / **``, unary minus and the functions
    ``sqrt``, ``min``, ``max``, ``abs``.  Parsed with :mod:`ast` and evaluated
    by walking the tree, never with ``eval``.
    """

    def __init__(self, source: str | float | int):
        self.source = str(source)
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise InputError(f"cannot parse expression {self.source!r}: {exc.msg}") from None
        self._tree = tree.body
        self.names = frozenset(_check_node(self._tree, self.source))

    def __repr__(self) -> str:
        return f"Expr({self.source!r})"

    def __call__(self, env: Mapping[str, Any]):
        return _eval_node(self._tree, env)


def _check_node(node, source) -> set[str]:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return set()
    if isinstance(node, ast.Name):
        return {node.id}
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _check_node(node.left, source) | _check_node(node.right, source)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return _check_node(node.operand, source)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords:
        out: set[str] = set()
        for arg in node.args:
            out |= _check_node(arg, source)
        return out
    raise InputError(f"unsupported syntax in expression {source!r}")


def _eval_node(node, env):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval_node(node.left, env), _eval_node(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval_node(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    args = [_eval_node(a, env) for a in node.args]
    fn = _FUNCS[node.func.id]
    if node.func.id in ("min", "max"):
        return functools.reduce(fn, args)
    return fn(*args)


@dataclass(frozen=True)
class Relation:
    """``lhs op rhs`` with ``op`` one of ``<=``, ``>=``, ``==``."""

    lhs: Expr
    op: str
    rhs: Expr
    source: str

    def slack(self, env):
        """Non-negative exactly when the relation holds (``==`` gives ``-|d|``)."""
        d = self.rhs(env) - self.lhs(env)
        if self.op == "<=":
            return d
        if self.op == ">=":
            return -d
        return -np.abs(d)


def parse_relations(source: str) -> list[Relation]:
    """Parse ``"a <= b"`` or a chain ``"a >= b >= c"`` into binary relations."""
    try:
        tree = ast.parse(source, mode="eval").body
    except SyntaxError as exc:
        raise InputError(f"cannot parse relation {source!r}: {exc.msg}") from None
    if not isinstance(tree, ast.Compare):
        raise InputError(f"relation {source!r} has no comparison")
    terms = [tree.left, *tree.comparators]
    out = []
    for k, op in enumerate(tree.ops):
        if type(op) not in _COMPARE:
            raise InputError(f"relation {source!r} uses an unsupported comparison")
        lhs = Expr(ast.unparse(terms[k]))
        rhs = Expr(ast.unparse(terms[k + 1]))
        text = source if len(tree.ops) == 1 else f"{lhs.source} {_COMPARE[type(op)]} {rhs.source}"
        out.append(Relation(lhs, _COMPARE[type(op)], rhs, text))
    return out


# ----------------------------------------------------------------------------
# terms and constructors
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeTerm:
    """(1,2) bound along one edge: ``R = (value at a=1, value at a=0)``, same for ``C``."""

    name: str
    R: tuple[str, str]
    C: tuple[str, str]
    kind: str = "edge"

    def expressions(self) -> list[Expr]:
        return [Expr(s) for s in (*self.R, *self.C)]

    def evaluate(self, env) -> tuple[np.ndarray, np.ndarray]:
        aR, bR, aC, bC = (e(env) for e in self.expressions())
        return upper_bound_12_vec(aR, aC, bR, bC)

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name, "R": list(self.R), "C": list(self.C)}


@dataclass(frozen=True)
class StrongTerm:
    """Bilinear (2,2) bound; corners ordered ``(u, v, h, g)`` (see :func:`strong_bound_22`).

    With ``diagonal`` the two mixing weights are tied together.
    """

    name: str
    R: tuple[str, str, str, str]
    C: tuple[str, str, str, str]
    diagonal: bool = False

    @property
    def kind(self) -> str:
        return "strong22-diag" if self.diagonal else "strong22"

    def expressions(self) -> list[Expr]:
        return [Expr(s) for s in (*self.R, *self.C)]

    def evaluate(self, env) -> tuple[np.ndarray, np.ndarray]:
        vals = [np.asarray(e(env), dtype=float) for e in self.expressions()]
        vals = np.broadcast_arrays(*vals)
        shape = vals[0].shape
        stack = np.stack([v.ravel() for v in vals], axis=1)
        if self.diagonal:
            h, a = strong_bound_diagonal(stack[:, :4], stack[:, 4:])
        else:
            h, a, _ = strong_bound_22(stack[:, :4], stack[:, 4:])
        return h.reshape(shape), a.reshape(shape)

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name, "R": list(self.R), "C": list(self.C)}


Term = EdgeTerm | StrongTerm


def _term_from_json(d: Mapping) -> Term:
    kind = d.get("kind", "edge")
    if kind == "edge":
        return EdgeTerm(d["name"], tuple(map(str, d["R"])), tuple(map(str, d["C"])))
    if kind in ("strong22", "strong22-diag"):
        return StrongTerm(d["name"], tuple(map(str, d["R"])), tuple(map(str, d["C"])), kind == "strong22-diag")
    raise InputError(f"unknown term kind {kind!r}")


def _table_entry(table, i, j, what):
    try:
        return table[i][j]
    except (IndexError, KeyError, TypeError):
        raise InputError(f"vertex table is missing the {what} entry at ({i}, {j})") from None


def _complete_edges(k: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(k) for j in range(i + 1, k)]


def constructor_simple(
    fR: Sequence[Sequence],
    fC: Sequence[Sequence],
    row_edges: Optional[Sequence[tuple[int, int]]] = None,
    col_edges: Optional[Sequence[tuple[int, int]]] = None,
    names: Optional[Sequence[str]] = None,
) -> list[EdgeTerm]:
    """One (1,2) edge term per edge of a product mixing domain.

    ``fR[i][j]`` / ``fC[i][j]`` hold the regrets (numbers or expression strings)
    at row vertex ``i`` and column vertex ``j``.  Each side is a simplex by
    default (every pair of vertices is an edge); pass ``row_edges`` or
    ``col_edges`` for other shapes, e.g. a path when a column vertex lies on the
    segment between two others.  Terms come in the order: column edges at each
    row vertex, then row edges at each column vertex.
    """
    v = len(fR)
    w = len(fR[0]) if v else 0
    row_edges = _complete_edges(v) if row_edges is None else list(row_edges)
    col_edges = _complete_edges(w) if col_edges is None else list(col_edges)
    pairs = []
    for i in range(v):
        for j, k in col_edges:
            pairs.append(((i, j), (i, k)))
    for j in range(w):
        for i, k in row_edges:
            pairs.append(((i, j), (k, j)))
    if names is not None and len(names) != len(pairs):
        raise InputError(f"expected {len(pairs)} term names, got {len(names)}")
    out = []
    for n, ((i1, j1), (i2, j2)) in enumerate(pairs):
        r = (str(_table_entry(fR, i1, j1, "f_R")), str(_table_entry(fR, i2, j2, "f_R")))
        c = (str(_table_entry(fC, i1, j1, "f_C")), str(_table_entry(fC, i2, j2, "f_C")))
        out.append(EdgeTerm(names[n] if names else f"b{n + 1}", r, c))
    return out


def constructor_strong(
    fR: Sequence[Sequence], fC: Sequence[Sequence], diagonal: bool = False, name: str = "h"
) -> StrongTerm:
    """Bilinear term for a 2x2 vertex table.

    Weight ``a`` is on row vertex 0 and ``b`` on column vertex 0, so the
    corners ``(u, v, h, g)`` are the entries ``[0][0], [0][1], [1][0], [1][1]``.
    """
    if len(fR) != 2 or any(len(r) != 2 for r in fR):
        raise InputError("the strong constructor is implemented for 2x2 tables")
    corners = [(0, 0), (0, 1), (1, 0), (1, 1)]
    r = tuple(str(_table_entry(fR, i, j, "f_R")) for i, j in corners)
    c = tuple(str(_table_entry(fC, i, j, "f_C")) for i, j in corners)
    return StrongTerm(name, r, c, diagonal)


def evaluate_terms(terms: Sequence[Term], env: Mapping[str, Any]) -> np.ndarray:
    """Minimum over terms (the bound the constructor gives for one table)."""
    vals = [np.asarray(t.evaluate(env)[0], dtype=float) for t in terms]
    return functools.reduce(np.minimum, vals)


# ----------------------------------------------------------------------------
# programs
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Branch:
    """Extra relations and box overrides for one case of a case split."""

    name: str
    constraints: tuple[str, ...] = ()
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "constraints": list(self.constraints),
            "bounds": {k: list(v) for k, v in self.bounds.items()},
        }


@dataclass(frozen=True)
class BoundProgram:
    """``max`` over boxed variables subject to relations of ``min`` over terms.

    A constraint ``name == expr`` whose left side is a declared variable
    defines that variable; it is eliminated from the optimizer and its box
    becomes a relation.  ``derived`` entries are reported, never optimized.
    ``branches`` enumerate a case split; the bound is the max over branches.
    """

    algorithm: str
    variables: Mapping[str, tuple[float, float]]
    constraints: tuple[str, ...]
    terms: tuple[Term, ...]
    parameters: Mapping[str, float] = field(default_factory=dict)
    derived: Mapping[str, str] = field(default_factory=dict)
    branches: tuple[Branch, ...] = ()

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        declared = set(self.variables) | set(self.parameters) | set(self.derived)
        for name, (lo, hi) in self.variables.items():
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise InputError(f"variable {name!r} needs a finite box, got [{lo}, {hi}]")
        sources = list(self.constraints) + [c for b in self.branches for c in b.constraints]
        for src in sources:
            for rel in parse_relations(src):
                _require_declared(rel.lhs.names | rel.rhs.names, declared, src)
        for term in self.terms:
            for e in term.expressions():
                _require_declared(e.names, declared, f"term {term.name}")
        for name, src in self.derived.items():
            _require_declared(Expr(src).names, declared - {name}, f"derived {name}")
        for b in self.branches:
            for name in b.bounds:
                if name not in self.variables:
                    raise InputError(f"branch {b.name!r} bounds undeclared variable {name!r}")
        if not self.terms:
            raise InputError("a bound program needs at least one term")

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "variables": {k: list(v) for k, v in self.variables.items()},
            "parameters": dict(self.parameters),
            "constraints": list(self.constraints),
            "derived": dict(self.derived),
            "terms": [t.to_json() for t in self.terms],
            "branches": [b.to_json() for b in self.branches],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "BoundProgram":
        try:
            return cls(
                algorithm=str(data["algorithm"]),
                variables={k: (float(v[0]), float(v[1])) for k, v in data["variables"].items()},
                constraints=tuple(data.get("constraints", ())),
                terms=tuple(_term_from_json(t) for t in data["terms"]),
                parameters={k: float(v) for k, v in data.get("parameters", {}).items()},
                derived=dict(data.get("derived", {})),
                branches=tuple(
                    Branch(b["name"], tuple(b.get("constraints", ())),
                           {k: (float(v[0]), float(v[1])) for k, v in b.get("bounds", {}).items()})
                    for b in data.get("branches", ())
                ),
            )  # fmt: skip
        except (KeyError, TypeError, IndexError) as exc:
            raise InputError(f"malformed bound program: {exc}") from None

    def compile(self, branch: Optional[Branch] = None) -> "CompiledProgram":
        return CompiledProgram(self, branch)


def _require_declared(names, declared, where):
    missing = sorted(set(names) - set(declared))
    if missing:
        raise InputError(f"{where} references undeclared name(s): {', '.join(missing)}")


class CompiledProgram:
    """A program (one branch) ready for vectorized evaluation.

    ``free`` are the optimizer's coordinates; :meth:`assign` expands a batch of
    points into every variable, parameter and derived value.
    """

    def __init__(self, program: BoundProgram, branch: Optional[Branch] = None):
        self.program = program
        self.branch = branch
        boxes = dict(program.variables)
        if branch is not None:
            boxes.update(branch.bounds)
        self.boxes = boxes
        sources = list(program.constraints) + (list(branch.constraints) if branch else [])
        definitions: dict[str, Expr] = {}
        relations: list[Relation] = []
        for src in sources:
            for rel in parse_relations(src):
                target = rel.lhs.source.strip()
                if rel.op == "==" and target in program.variables and target not in definitions:
                    definitions[target] = rel.rhs
                else:
                    relations.append(rel)
        self.definitions = _order_definitions(definitions, program.parameters)
        for name, _ in self.definitions:
            lo, hi = boxes[name]
            relations.append(Relation(Expr(lo), "<=", Expr(name), f"{name} >= {lo:g}"))
            relations.append(Relation(Expr(name), "<=", Expr(hi), f"{name} <= {hi:g}"))
        self.relations = relations
        self.free = [v for v in program.variables if v not in definitions]
        self.lower = np.array([boxes[v][0] for v in self.free])
        self.upper = np.array([boxes[v][1] for v in self.free])

    @property
    def dimension(self) -> int:
        return len(self.free)

    def assign(self, X) -> dict[str, Any]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        env: dict[str, Any] = dict(self.program.parameters)
        for k, name in enumerate(self.free):
            env[name] = X[:, k]
        with np.errstate(all="ignore"):
            for name, expr in self.definitions:
                env[name] = np.broadcast_to(np.asarray(expr(env), dtype=float), (X.shape[0],))
            for name, src in self.program.derived.items():
                env[name] = np.broadcast_to(np.asarray(Expr(src)(env), dtype=float), (X.shape[0],))
        return env

    def violation(self, env) -> np.ndarray:
        total = 0.0
        with np.errstate(all="ignore"):
            for rel in self.relations:
                s = np.asarray(rel.slack(env), dtype=float)
                total = total + np.where(np.isnan(s), np.inf, np.maximum(-s, 0.0))
        return np.asarray(total, dtype=float)

    def objective(self, env) -> np.ndarray:
        with np.errstate(all="ignore"):
            v = evaluate_terms(self.program.terms, env)
        return np.where(np.isnan(v), -np.inf, v)

    def evaluate(self, X) -> tuple[np.ndarray, np.ndarray]:
        """``(objective, violation)`` for a batch of free-variable points."""
        env = self.assign(X)
        n = np.atleast_2d(X).shape[0]
        return np.broadcast_to(self.objective(env), (n,)), np.broadcast_to(self.violation(env), (n,))

    def fitness(self, X) -> np.ndarray:
        """Value to maximize: the objective when feasible, below ``-10`` otherwise."""
        obj, viol = self.evaluate(X)
        return np.where(viol <= FEASIBILITY_TOL, obj, -10.0 - np.minimum(viol, 1e6))


def _order_definitions(defs: dict[str, Expr], parameters) -> list[tuple[str, Expr]]:
    ordered: list[tuple[str, Expr]] = []
    pending = dict(defs)
    while pending:
        ready = [n for n, e in pending.items() if not (e.names & set(pending))]
        if not ready:
            raise InputError(f"circular variable definitions among {', '.join(sorted(pending))}")
        for n in ready:
            ordered.append((n, pending.pop(n)))
    return ordered


# ----------------------------------------------------------------------------
# the programs of the supported search phases
# ----------------------------------------------------------------------------


def _box(names: str) -> dict[str, tuple[float, float]]:
    return {n: (0.0, 1.0) for n in names.split()}


def _edges(spec: Iterable[tuple[str, str, str, str, str]]) -> tuple[EdgeTerm, ...]:
    return tuple(EdgeTerm(n, (ra, rb), (ca, cb)) for n, ra, rb, ca, cb in spec)


def build_bound_program(algorithm: str, *, eps: float = 0.0, theta: float = 0.5) -> BoundProgram:
    """The max-min program bounding the given search phase.

    ``eps`` is the grid width of the ``dmp07`` search (0 gives the limiting
    bound) and ``theta`` the mixing weight defining the extra column of the
    ``dfm`` search.
    """
    alg = algorithm.lower()
    builders = {
        "kps": _program_kps,
        "dmp06": _program_dmp06,
        "dmp07": lambda: _program_dmp07(eps),
        "bbm38": _program_bbm38,
        "cdffjs": _program_cdffjs,
        "bbm36": _program_bbm36,
        "ts": _program_ts,
        "dfm": lambda: _program_dfm(theta),
    }
    if alg not in builders:
        raise InputError(f"unknown algorithm {algorithm!r}; choose from {', '.join(BOUND_IDS)}")
    return builders[alg]()


def _program_kps() -> BoundProgram:
    return BoundProgram(
        "kps",
        _box("u1 v1 h1 g1 u2 v2 h2 g2"),
        ("u1 == 0", "g2 == 0"),
        (StrongTerm("h", ("u1", "v1", "h1", "g1"), ("u2", "v2", "h2", "g2")),),
    )


def _program_dmp06() -> BoundProgram:
    return BoundProgram("dmp06", _box("a b c d"), ("b == 0", "c == 0"), _edges([("h", "a", "b", "c", "d")]))


def _program_dmp07(eps: float) -> BoundProgram:
    if not eps >= 0:
        raise InputError("eps must be non-negative")
    return BoundProgram(
        "dmp07",
        _box("v_R v_C u1 v1 h1 g1 u2 v2 h2 g2"),
        (
            "u1 <= 1 + 3*eps/2 - v_R",
            "v1 <= 2*eps",
            "h1 <= 1 + 3*eps/2 - v_R",
            "g1 <= v_R + eps/2",
            "u2 <= 1 + 3*eps/2 - v_C",
            "v2 <= 1 + 3*eps/2 - v_C",
            "h2 <= 2*eps",
            "g2 <= v_C + eps/2",
        ),
        (StrongTerm("h", ("u1", "v1", "h1", "g1"), ("u2", "v2", "h2", "g2")),),
        parameters={"eps": float(eps)},
    )


def _program_bbm38() -> BoundProgram:
    return BoundProgram(
        "bbm38",
        _box("g1 g2 h1 h2 u1 u2 v1 v2"),
        ("u1 == 0", "v2 == 0", "g1 >= g2", "u2 <= 1 - g1"),
        _edges([
            ("s1", "g1", "u1", "g2", "u2"),
            ("s2", "g1", "h1", "g2", "h2"),
            ("s3", "v1", "h1", "v2", "h2"),
            ("s4", "v1", "u1", "v2", "u2"),
        ]),
    )  # fmt: skip


def _program_cdffjs() -> BoundProgram:
    return BoundProgram(
        "cdffjs",
        _box("v_R v_C v1 u1 g1 h1 t1 s1 v2 u2 g2 h2 t2 s2"),
        ("v1 <= v_R", "v2 <= v_C", "g1 == 0", "h2 == 0", "s1 == 0", "h1 <= 1 - v_R", "v_C <= v_R"),
        _edges([
            ("b1", "u1", "v1", "u2", "v2"),
            ("b2", "h1", "g1", "h2", "g2"),
            ("b3", "s1", "t1", "s2", "t2"),
            ("b4", "g1", "v1", "g2", "v2"),
            ("b5", "t1", "v1", "t2", "v2"),
            ("b6", "t1", "g1", "t2", "g2"),
            ("b7", "h1", "u1", "h2", "u2"),
            ("b8", "s1", "u1", "s2", "u2"),
            ("b9", "s1", "h1", "s2", "h2"),
        ]),
    )  # fmt: skip


def _program_bbm36() -> BoundProgram:
    beta = BBM36_BETA
    # a, c: the row / column regret at (xh, b2); b, d: at (xh, y*)
    return BoundProgram(
        "bbm36",
        _box("g1 g2 h2 delta1 a b c d"),
        (
            "a <= 1 - (1 - delta1)*h2",
            "b <= (1 - delta1)*g1",
            "c == 0",
            "d <= (1 - delta1)*h2 + delta1*(1 - g1)",
            "g1 >= g2",
            "g2 >= h2",
        ),
        _edges([("h", "a", "b", "c", "d")]),
        parameters={"beta": beta},
        branches=(
            Branch("low", ("delta1 == 0",), {"g1": (0.0, 1 / 3)}),
            Branch(
                "middle",
                ("delta1 == (1 - g1)*(-1 + sqrt(1 + 1/(1 - 2*g1) - 1/g1))",),
                {"g1": (1 / 3, beta)},
            ),
            Branch("high", ("delta1 == 1", "h2 == g2"), {"g1": (beta, 1.0)}),
        ),
    )


_TS_RELATIONS = (
    "za == zb",
    "zd == 0",
    "ze == 0",
    "zc >= zg",
    "zc >= za",
    "zf >= zh",
    "zf >= zb",
    "zg >= zh",
    "za <= rho*(zc - zg)",
    "za <= (1 - rho)*(zf - zh)",
)


def _program_ts() -> BoundProgram:
    return BoundProgram(
        "ts",
        _box("za zb zc zd ze zf zg zh rho"),
        _TS_RELATIONS,
        _edges([
            ("b1", "za", "ze", "zb", "zf"),
            ("b2", "za", "zc", "zb", "zd"),
            ("b3", "zg", "zc", "zh", "zd"),
            ("b4", "zg", "ze", "zh", "zf"),
        ]),
        derived={"lambda": "zc - zg", "mu": "zf - zh"},
    )  # fmt: skip


def dfm_vertex_table(theta: str = "theta") -> tuple[list[list[str]], list[list[str]]]:
    """Row/column regret tables of the prism searched by ``dfm``.

    Rows ``(xs, w, wh)``, columns ``(ys, yh, z)`` with ``yh`` on the segment
    from ``ys`` to ``z``.  The column regret is linear in the column strategy,
    so its ``yh`` column is interpolated; the row regret at ``(wh, yh)`` is zero.
    """
    t = theta
    fR = [["za", "zn", "zc"], ["ze", "zm", "zg"], ["zj", "0", "zi"]]
    fC = [
        ["zb", f"(1 - {t})*zb + {t}*zd", "zd"],
        ["zf", f"(1 - {t})*zf + {t}*zh", "zh"],
        ["zl", f"(1 - {t})*zl + {t}*zk", "zk"],
    ]
    return fR, fC


#: edge numbering of the dfm prism
DFM_ROW_EDGES = ((0, 1), (1, 2), (0, 2))
DFM_COL_EDGES = ((0, 1), (1, 2))


def _program_dfm(theta: float) -> BoundProgram:
    if not 0 < theta < 1:
        raise InputError("theta must lie in (0, 1)")
    fR, fC = dfm_vertex_table()
    terms = constructor_simple(fR, fC, DFM_ROW_EDGES, DFM_COL_EDGES)
    return BoundProgram(
        "dfm",
        _box("za zb zc zd ze zf zg zh zi zj zk zl zm zn rho"),
        (
            "zg >= zh",
            "zd == 0",
            "ze == 0",
            "za == zb",
            "zc >= zg",
            "zg >= zm",
            "zc >= zn >= za",
            "zf >= zh",
            "zf >= zb",
            "za <= rho*(zc - zg)",
            "zb <= (1 - rho)*(zf - zh)",
            "za <= rho*zj + (1 - rho)*(zl - zk)",
            "theta*(zg - zi) >= (1 - theta)*zj",
        ),
        tuple(terms),
        parameters={"theta": float(theta)},
        derived={"lambda": "zc - zg", "mu": "zf - zh"},
    )


# ----------------------------------------------------------------------------
# solver
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the outer maximization.

    ``population`` is the total differential-evolution population; ``starts``
    local refinements are run from the best population members topped up with
    random feasible points.  The result counts as converged when at least
    ``min_agree`` starts end within ``agree_tol`` of the best value.
    """

    seed: int = 0
    population: int = 40
    generations: int = 2000
    starts: int = 64
    refine_iters: int = 400
    agree_tol: float = 1e-6
    min_agree: int = 2


@dataclass(frozen=True)
class BoundResult:
    """Maximum of a bound program.

    ``argmax`` has every variable, parameter and derived value at the optimum.
    """

    algorithm: str
    value: float
    argmax: dict[str, float]
    branch: Optional[str]
    converged: bool
    agreeing_starts: int
    branch_values: dict[str, float]
    seed: int
    wall_time: float

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "value": self.value,
            "argmax": self.argmax,
            "branch": self.branch,
            "converged": self.converged,
            "agreeing_starts": self.agreeing_starts,
            "branch_values": self.branch_values,
            "seeds": [self.seed],
            "wall_time": self.wall_time,
        }


def _random_directions(rng, S, K, N):
    D = rng.standard_normal((S, K, N))
    return D / np.linalg.norm(D, axis=2, keepdims=True)


def refine(cp: CompiledProgram, X0: np.ndarray, rng: np.random.Generator, iters: int = 400,
           samples: int = 8, step: float = 0.05, min_step: float = 1e-11) -> tuple[np.ndarray, np.ndarray]:
    """Batched direction search from several starts; box projection by clipping.

    Each round tries the coordinate directions and as many random ones, each at
    ``samples`` step lengths up to the start's current step.  A start moves to
    its best improving candidate and grows its step, or halves it otherwise.
    """  # fmt: skip
    X = np.array(X0, dtype=float, copy=True)
    S, N = X.shape
    F = cp.fitness(X)
    s = np.full(S, step)
    eye = np.eye(N)
    frac = np.linspace(1.0 / samples, 1.0, samples)
    for _ in range(iters):
        active = s > min_step
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        A = len(idx)
        D = np.concatenate([np.broadcast_to(np.concatenate([eye, -eye]), (A, 2 * N, N)),
                            _random_directions(rng, A, 2 * N, N)], axis=1)  # fmt: skip
        T = s[idx, None] * frac[None, :]  # (A, samples)
        cand = X[idx, None, None, :] + T[:, None, :, None] * D[:, :, None, :]
        cand = np.clip(cand, cp.lower, cp.upper).reshape(A, -1, N)
        vals = cp.fitness(cand.reshape(-1, N)).reshape(A, -1)
        best = np.argmax(vals, axis=1)
        bv = vals[np.arange(A), best]
        up = bv > F[idx]
        moved = idx[up]
        X[moved] = cand[np.flatnonzero(up), best[up]]
        F[moved] = bv[up]
        s[moved] = np.minimum(2 * s[moved], 0.25)
        s[idx[~up]] *= 0.5
    return X, F


def _solve_branch(cp: CompiledProgram, config: SolverConfig, seed: int):
    N = cp.dimension
    rng = np.random.default_rng(seed)
    if N == 0:
        X = np.zeros((1, 0))
        return X[0], float(cp.fitness(X)[0]), 1
    width = cp.upper - cp.lower
    fixed = width <= 0
    popsize = max(1, math.ceil(config.population / N))

    def neg(X):  # DE passes shape (N, S)
        return -cp.fitness(X.T)

    lo = cp.lower.copy()
    hi = np.where(fixed, np.nextafter(cp.lower, np.inf), cp.upper)
    res = differential_evolution(
        neg, list(zip(lo, hi)), popsize=popsize, maxiter=config.generations, tol=1e-12, atol=0.0,
        seed=int(rng.integers(2**31)), polish=False, vectorized=True, updating="deferred", init="sobol",
    )  # fmt: skip
    pop = np.asarray(res.population)
    order = np.argsort(res.population_energies)
    starts = [np.asarray(res.x)]
    starts += [pop[k] for k in order[: config.starts // 2]]
    # top up with random feasible points
    need = config.starts - len(starts)
    tries = 0
    extra: list[np.ndarray] = []
    while need > 0 and tries < 50:
        U = cp.lower + rng.random((max(256, 4 * need), N)) * width
        ok = U[cp.fitness(U) > -10.0]
        extra.extend(ok[:need])
        need -= min(need, len(ok))
        tries += 1
    X0 = np.array(starts + extra)
    X, F = refine(cp, X0, rng, iters=config.refine_iters)
    k = int(np.argmax(F))
    agree = int(np.sum(F >= F[k] - config.agree_tol))
    return X[k], float(F[k]), agree


def solve_bound_program(program: BoundProgram, config: SolverConfig = SolverConfig()) -> BoundResult:
    """Global maximum of the program via differential evolution and multistart refinement.

    The inner minimum over mixing weights is never optimized numerically: each
    edge term is the exact (1,2) bound and each strong term the exact bilinear
    minimizer.
    """
    t0 = time.perf_counter()
    branches = program.branches or (None,)
    best = None
    branch_values: dict[str, float] = {}
    for k, br in enumerate(branches):
        cp = program.compile(br)
        x, val, agree = _solve_branch(cp, config, config.seed + 7919 * k)
        name = br.name if br is not None else None
        feasible = val > -10.0
        branch_values[name or "main"] = val if feasible else float("-inf")
        if best is None or (feasible and val > best[1]):
            best = (cp, val, agree, x, name, feasible)
    cp, val, agree, x, name, feasible = best
    if not feasible:
        raise SolverError("no feasible point found for the bound program", {"algorithm": program.algorithm})
    env = cp.assign(x[None, :])
    argmax = {k: float(np.asarray(v).ravel()[0]) for k, v in env.items()}
    converged = agree >= config.min_agree
    if not converged:
        log.warning("bound program %s: only %d start(s) reached the best value", program.algorithm, agree)
    return BoundResult(
        program.algorithm, val, argmax, name, converged, agree, branch_values, config.seed,
        time.perf_counter() - t0,
    )  # fmt: skip


def evaluate_program(program: BoundProgram, assignment: Mapping[str, float],
                     branch: Optional[str] = None) -> tuple[float, float]:
    """``(objective, violation)`` at a full or free-variable assignment."""  # fmt: skip
    br = None
    if branch is not None:
        matches = [b for b in program.branches if b.name == branch]
        if not matches:
            raise InputError(f"program has no branch {branch!r}")
        br = matches[0]
    cp = program.compile(br)
    try:
        x = np.array([[float(assignment[v]) for v in cp.free]])
    except KeyError as exc:
        raise InputError(f"assignment is missing variable {exc.args[0]!r}") from None
    obj, viol = cp.evaluate(x)
    return float(obj[0]), float(viol[0])


def tightness_report(result: BoundResult, program: BoundProgram, tol: float = ACTIVE_TOL) -> dict:
    """Relations, boxes and terms active at the optimum, plus the variable values."""
    br = next((b for b in program.branches if b.name == result.branch), None)
    cp = program.compile(br)
    env = {k: np.array([v]) for k, v in result.argmax.items()}
    active = []
    for rel in cp.relations:
        slack = float(np.asarray(rel.slack(env)).ravel()[0])
        if slack <= tol:
            active.append({"constraint": rel.source, "slack": slack})
    at_bounds = []
    for name in cp.free:
        lo, hi = cp.boxes[name]
        v = result.argmax[name]
        if v - lo <= tol:
            at_bounds.append({"variable": name, "bound": "lower", "value": lo})
        if hi - v <= tol:
            at_bounds.append({"variable": name, "bound": "upper", "value": hi})
    terms = []
    for term in program.terms:
        h, a = term.evaluate(env)
        h, a = float(np.asarray(h).ravel()[0]), float(np.asarray(a).ravel()[0])
        if h - result.value <= tol:
            terms.append({"term": term.name, "value": h, "alpha": a})
    return {
        "algorithm": program.algorithm,
        "branch": result.branch,
        "value": result.value,
        "variables": dict(result.argmax),
        "defined": [n for n, _ in cp.definitions],
        "active_constraints": active,
        "active_bounds": at_bounds,
        "active_terms": terms,
    }


# ----------------------------------------------------------------------------
# tight instances
# ----------------------------------------------------------------------------


def _ts_pair_value(lam: float, mu: float) -> float:
    return min(lam * mu / (lam + mu), (1 - lam) / (1 + mu - lam))


def _ts_balanced_mu(lam: float) -> float:
    """``mu`` equalizing the two terms (the first grows and the second shrinks in ``mu``)."""
    g = lambda mu: lam * mu / (lam + mu) - (1 - lam) / (1 + mu - lam)  # noqa: E731
    if g(1.0) <= 0:
        return 1.0
    return float(brentq(g, 1e-15, 1.0, xtol=1e-15))


@functools.lru_cache(maxsize=None)
def ts_constants() -> tuple[float, float, float]:
    """``(b, lambda*, mu*)`` maximizing ``min{lm/(l+m), (1-l)/(1+m-l)}`` over the unit square."""
    res = minimize_scalar(lambda lam: -_ts_pair_value(lam, _ts_balanced_mu(lam)),
                          bounds=(1e-9, 1 - 1e-9), method="bounded", options={"xatol": 1e-13})  # fmt: skip
    lam = float(res.x)
    mu = _ts_balanced_mu(lam)
    return _ts_pair_value(lam, mu), lam, mu


@dataclass(frozen=True)
class TightInstance:
    """A game with the strategies the analysis predicts for the worst case."""

    name: str
    game: BimatrixGame
    xs: np.ndarray
    ys: np.ndarray
    w: np.ndarray
    z: np.ndarray
    rho: float
    claimed: float
    wh: Optional[np.ndarray] = None
    theta: float = 0.5


def tight_instance(name: str) -> TightInstance:
    """The embedded worst-case instances ``"ts"`` and ``"dfm"``."""
    e1, e3 = np.eye(3)[0], np.eye(3)[2]
    key = name.lower()
    if key == "ts":
        b, lam, mu = ts_constants()
        R = np.array([[0.1, 0, 0], [0.1 + b, 1, 1], [0.1 + b, lam, lam]])
        C = np.array([[0.1, 0.1 + b, 0.1 + b], [0, 1, mu], [0, 1, mu]])
        rho = mu / (lam + mu)
        return TightInstance("ts", BimatrixGame(R, C), e1, e1, e3, e3, rho, b)
    if key == "dfm":
        R = np.array([[0, 0, 0], [0, 0, 1], [1 / 3, 2 / 3, 2 / 3]])
        C = np.array([[0, 1 / 3, 1 / 3], [0, 0, 1 / 3], [0, 1, 2 / 3]])
        return TightInstance("dfm", BimatrixGame(R, C), e1, e1, e3, e3, 0.5, 1 / 3, wh=e3)
    raise InputError(f"no tight instance named {name!r}; choose ts or dfm")


def _check(checks: list, name: str, passed: bool, **detail) -> None:
    checks.append({"check": name, "passed": bool(passed), **detail})


def verify_tight_instance(name: str, tol: float = 1e-6) -> dict:
    """Check that an embedded instance attains its claimed bound.

    Verifies the stationarity certificate through the support-inclusion test,
    the declared best responses, and the mixing minimum over the declared
    region.  Every failing check is listed with its numbers.
    """
    inst = tight_instance(name)
    g = inst.game
    R, C = g.R, g.C
    checks: list[dict] = []
    u = -inst.rho * (R @ inst.ys) + (1 - inst.rho) * (C @ (inst.z - inst.ys))
    v = inst.rho * (R.T @ (inst.w - inst.xs)) - (1 - inst.rho) * (C.T @ inst.xs)
    for label, vec, supp_of in (("row", u, inst.xs), ("column", v, inst.ys)):
        smin = suppmin(vec, tol)
        supp = [i for i, p in enumerate(supp_of) if p > tol]
        _check(checks, f"{label} support inside suppmin", set(supp) <= set(smin),
               vector=vec.tolist(), suppmin=list(smin), support=supp)  # fmt: skip
    brs = [
        ("w best response to ys", Side.ROW, inst.w, inst.ys),
        ("z best response to xs", Side.COL, inst.z, inst.xs),
    ]
    if inst.wh is not None:
        yh = inst.theta * inst.z + (1 - inst.theta) * inst.ys
        brs.append(("wh best response to yh", Side.ROW, inst.wh, yh))
    for label, side, strat, opp in brs:
        br = best_response(g, side, opp, tol)
        supp = [i for i, p in enumerate(strat) if p > tol]
        _check(checks, label, set(supp) <= set(br), best_responses=list(br), support=supp)
    sol = mix_22(g, [inst.xs, inst.w], [inst.ys, inst.z])
    _check(checks, "mixing minimum equals the claimed bound", abs(sol.value.f - inst.claimed) <= tol,
           minimum=sol.value.f, claimed=inst.claimed, alpha=sol.alpha, beta=sol.beta)  # fmt: skip
    report = {
        "instance": inst.name,
        "R": R.tolist(),
        "C": C.tolist(),
        "rho": inst.rho,
        "minimum": sol.value.f,
        "claimed": inst.claimed,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    if inst.name == "ts":
        b, lam, mu = ts_constants()
        report.update({"b": b, "lambda": lam, "mu": mu})
    if inst.wh is not None:
        prism = mix(g, [inst.xs, inst.w, inst.wh], [inst.ys, inst.z])
        report["prism_minimum"] = prism.value.f
    return report
