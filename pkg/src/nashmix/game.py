"""Bimatrix games, mixed strategies, regrets and best responses.

Everything else in the package speaks in terms of the objects defined here:

* :class:`BimatrixGame` -- payoff matrices ``R`` (row player) and ``C``
  (column player), both ``m x n`` with entries in ``[0, 1]``.
* :class:`MixedStrategy` -- a probability vector tagged with the player it
  belongs to.
* :class:`RegretPair` -- the two regrets ``f_R``, ``f_C`` of a profile and
  their maximum ``f``.  A profile is an ``eps``-approximate Nash equilibrium
  exactly when ``f <= eps``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InputError

#: absolute tolerance used for best-response ties (payoffs live in [0, 1])
TIE_TOL = 1e-9
#: tolerance on the sum of a probability vector
SIMPLEX_TOL = 1e-9


class Side(str, Enum):
    ROW = "row"
    COL = "col"

    @property
    def other(self) -> "Side":
        return Side.COL if self is Side.ROW else Side.ROW


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BimatrixGame:
    """A two-player game given by payoff matrices normalized to ``[0, 1]``."""

    R: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        R = _frozen(self.R)
        C = _frozen(self.C)
        if R.ndim != 2 or R.size == 0:
            raise InputError("payoff matrices must be nonempty 2-D arrays")
        if R.shape != C.shape:
            raise InputError(f"R has shape {R.shape} but C has shape {C.shape}")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(C))):
            raise InputError("payoff entries must be finite")
        lo = min(R.min(), C.min())
        hi = max(R.max(), C.max())
        if lo < -1e-12 or hi > 1 + 1e-12:
            raise InputError("payoffs must lie in [0, 1]; use normalize() on raw data")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "C", C)

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def n(self) -> int:
        return self.R.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.R.shape

    def transpose(self) -> "BimatrixGame":
        """The same game with the roles of the two players exchanged."""
        return BimatrixGame(self.C.T, self.R.T)

    def size_for(self, side: Side) -> int:
        return self.m if Side(side) is Side.ROW else self.n

    def digest(self) -> str:
        """Short content hash, stable across runs and platforms."""
        h = hashlib.sha256()
        h.update(np.asarray(self.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.R).tobytes())
        h.update(np.ascontiguousarray(self.C).tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        return {"R": self.R.tolist(), "C": self.C.tolist(), "normalized": True}

    @classmethod
    def from_json(cls, data: dict) -> "BimatrixGame":
        if not isinstance(data, dict) or "R" not in data or "C" not in data:
            raise InputError('game JSON must be an object with keys "R" and "C"')
        try:
            R = np.array(data["R"], dtype=float)
            C = np.array(data["C"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"could not parse payoff matrices: {exc}") from None
        if data.get("normalized", False):
            return cls(R, C)
        return normalize(R, C)


@dataclass(frozen=True)
class MixedStrategy:
    """A point of the probability simplex for one player.

    Dense storage is used even for pure strategies so that mixing arithmetic
    treats every strategy uniformly.
    """

    weights: np.ndarray
    side: Side = Side.ROW

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise InputError("empty strategy")
        if not np.all(np.isfinite(w)) or np.any(w < -SIMPLEX_TOL):
            raise InputError("strategy weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL * max(1, w.size):
            raise InputError(f"strategy weights sum to {w.sum()!r}, not 1")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "side", Side(self.side))

    def __len__(self):
        return self.weights.size

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.weights > 0))

    @classmethod
    def pure(cls, index: int, size: int, side: Side = Side.ROW) -> "MixedStrategy":
        w = np.zeros(size)
        w[index] = 1.0
        return cls(w, side)

    @classmethod
    def uniform(cls, size: int, side: Side = Side.ROW) -> "MixedStrategy":
        return cls(np.full(size, 1.0 / size), side)

    @classmethod
    def mix(cls, strategies: Sequence["MixedStrategy"], coefficients) -> "MixedStrategy":
        """Convex combination ``sum_k coefficients[k] * strategies[k]``."""
        coefficients = np.asarray(coefficients, dtype=float)
        if len(strategies) != coefficients.size:
            raise InputError("one coefficient per strategy is required")
        w = sum(c * s.weights for c, s in zip(coefficients, strategies))
        return cls(_renormalize(w), strategies[0].side)


StrategyLike = Union[MixedStrategy, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class RegretPair:
    fR: float
    fC: float
    f: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "fR", float(max(self.fR, 0.0)))
        object.__setattr__(self, "fC", float(max(self.fC, 0.0)))
        object.__setattr__(self, "f", max(self.fR, self.fC))

    def to_json(self) -> dict:
        return {"fR": self.fR, "fC": self.fC, "f": self.f}


def _renormalize(w: np.ndarray) -> np.ndarray:
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    s = w.sum()
    if s <= 0:
        raise InputError("cannot renormalize a zero vector")
    return w / s


def as_vector(s: StrategyLike, size: int | None = None) -> np.ndarray:
    """Return the weight vector of ``s``, validating it as a simplex point."""
    if isinstance(s, MixedStrategy):
        w = s.weights
    else:
        w = MixedStrategy(s).weights
    if size is not None and w.size != size:
        raise InputError(f"strategy has {w.size} entries, expected {size}")
    return w


def normalize(R, C) -> BimatrixGame:
    """Map raw payoffs into ``[0, 1]``, one affine map per matrix.

    Each matrix is sent through ``v -> (v - min) / (max - min)``; a constant
    matrix becomes all zeros (that player is indifferent everywhere).
    """
    R = np.array(R, dtype=float)
    C = np.array(C, dtype=float)
    if R.ndim != 2 or R.size == 0 or C.ndim != 2 or C.size == 0:
        raise InputError("payoff matrices must be nonempty 2-D arrays")
    if R.shape != C.shape:
        raise InputError(f"R has shape {R.shape} but C has shape {C.shape}")
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(C))):
        raise InputError("payoff entries must be finite")
    return BimatrixGame(_unit_scale(R), _unit_scale(C))


def _unit_scale(M: np.ndarray) -> np.ndarray:
    lo, hi = M.min(), M.max()
    if hi - lo <= 0:
        return np.zeros_like(M)
    out = (M - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0)


def regrets(game: BimatrixGame, x: StrategyLike, y: StrategyLike) -> RegretPair:
    """Regrets ``f_R = max(Ry) - x'Ry`` and ``f_C = max(C'x) - x'Cy``."""
    xv = as_vector(x, game.m)
    yv = as_vector(y, game.n)
    Ry = game.R @ yv
    Cx = game.C.T @ xv
    return RegretPair(Ry.max() - xv @ Ry, Cx.max() - Cx @ yv)


def regrets_vec(R: np.ndarray, C: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Unvalidated fast path of :func:`regrets` for inner loops."""
    Ry = R @ y
    Cx = C.T @ x
    return max(Ry.max() - x @ Ry, 0.0), max(Cx.max() - Cx @ y, 0.0)


def payoff_vector(game: BimatrixGame, side: Side, opponent: StrategyLike) -> np.ndarray:
    """Payoffs of every pure strategy of ``side`` against ``opponent``."""
    side = Side(side)
    if side is Side.ROW:
        return game.R @ as_vector(opponent, game.n)
    return game.C.T @ as_vector(opponent, game.m)


def suppmax(values: np.ndarray, tol: float = TIE_TOL) -> tuple[int, ...]:
    values = np.asarray(values, dtype=float)
    return tuple(int(i) for i in np.flatnonzero(values >= values.max() - tol))


def suppmin(values: np.ndarray, tol: float = TIE_TOL) -> tuple[int, ...]:
    values = np.asarray(values, dtype=float)
    return tuple(int(i) for i in np.flatnonzero(values <= values.min() + tol))


def best_response(
    game: BimatrixGame, side: Side, opponent: StrategyLike, tol: float = TIE_TOL
) -> tuple[int, ...]:
    """Indices of the pure best responses of ``side`` to ``opponent``.

    Ties within ``tol`` are all included; the result is sorted, so its first
    element is the lowest-index best response.
    """
    return suppmax(payoff_vector(game, side, opponent), tol)


def pure_best_response(game: BimatrixGame, side: Side, opponent: StrategyLike) -> MixedStrategy:
    side = Side(side)
    i = best_response(game, side, opponent)[0]
    return MixedStrategy.pure(i, game.size_for(side), side)


def random_game(rng: np.random.Generator, m: int, n: int | None = None) -> BimatrixGame:
    """Uniform random game, normalized per matrix (a test utility)."""
    n = m if n is None else n
    return normalize(rng.random((m, n)), rng.random((m, n)))


def load_game(path: str | Path) -> BimatrixGame:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read game file {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"game file {path} is not valid JSON: {exc}") from None
    return BimatrixGame.from_json(data)


def pure_equilibria(game: BimatrixGame) -> list[tuple[int, int]]:
    out = []
    for i in range(game.m):
        for j in range(game.n):
            if game.R[i, j] >= game.R[:, j].max() - TIE_TOL and game.C[i, j] >= game.C[i, :].max() - TIE_TOL:
                out.append((i, j))
    return out


def support_enumeration(game: BimatrixGame, tol: float = 1e-10) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    """All equal-size-support Nash equilibria of a nondegenerate game.

    Exponential in the game size; only used as a reference on tiny games.
    """
    import itertools

    m, n = game.shape
    R, C = game.R, game.C
    for k in range(1, min(m, n) + 1):
        for I in itertools.combinations(range(m), k):
            for J in itertools.combinations(range(n), k):
                # column mix y on J makes rows in I indifferent
                A = np.zeros((k + 1, k + 1))
                A[:k, :k] = R[np.ix_(I, J)]
                A[:k, k] = -1.0
                A[k, :k] = 1.0
                B = np.zeros((k + 1, k + 1))
                B[:k, :k] = C[np.ix_(I, J)].T
                B[:k, k] = -1.0
                B[k, :k] = 1.0
                rhs = np.zeros(k + 1)
                rhs[k] = 1.0
                try:
                    ys = np.linalg.solve(A, rhs)
                    xs = np.linalg.solve(B, rhs)
                except np.linalg.LinAlgError:
                    continue
                if ys[:k].min() < -tol or xs[:k].min() < -tol:
                    continue
                x = np.zeros(m)
                y = np.zeros(n)
                x[list(I)] = xs[:k]
                y[list(J)] = ys[:k]
                if (R @ y).max() <= ys[k] + tol and (C.T @ x).max() <= xs[k] + tol:
                    yield _renormalize(x), _renormalize(y)
