"""Shared fixtures and reference oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.optimize import minimize

from nashmix.bounds import BOUND_IDS, build_bound_program, solve_bound_program
from nashmix.game import random_game, regrets

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def game_stream(seed: int, count: int, lo: int = 2, hi: int = 8):
    """``count`` uniform random games with both sizes drawn from ``[lo, hi]``."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        m, n = rng.integers(lo, hi + 1, size=2)
        yield random_game(rng, int(m), int(n))


class _Bounds:
    """Lazily solved bound programs, shared by the whole session."""

    def __init__(self):
        self._cache: dict[tuple, object] = {}

    def result(self, alg: str, **kw):
        key = (alg, tuple(sorted(kw.items())))
        if key not in self._cache:
            self._cache[key] = solve_bound_program(build_bound_program(alg, **kw))
        return self._cache[key]

    def value(self, alg: str, **kw) -> float:
        return self.result(alg, **kw).value


@pytest.fixture(scope="session")
def bounds():
    return _Bounds()


@pytest.fixture(scope="session")
def bound_ids():
    return BOUND_IDS


# ----------------------------------------------------------------------------
# mixing oracle: dense grid followed by a derivative-free polish
# ----------------------------------------------------------------------------


def _simplex_point(t: np.ndarray, k: int) -> np.ndarray:
    """Map ``k - 1`` unconstrained numbers onto the ``k``-simplex (softmax-free clip)."""
    if k == 1:
        return np.ones(1)
    if k == 2:
        a = float(np.clip(t[0], 0.0, 1.0))
        return np.array([a, 1 - a])
    p, q = np.clip(t[:2], 0.0, 1.0)
    if p + q > 1:
        s = p + q
        p, q = p / s, q / s
    return np.array([p, q, 1 - p - q])


def _grid(k: int, steps: int) -> np.ndarray:
    if k == 1:
        return np.ones((1, 1))
    t = np.linspace(0, 1, steps + 1)
    if k == 2:
        return np.column_stack([t, 1 - t])
    P, Q = np.meshgrid(t, t, indexing="ij")
    keep = P + Q <= 1 + 1e-12
    p, q = P[keep], Q[keep]
    return np.column_stack([p, q, np.clip(1 - p - q, 0, None)])


def oracle_mix(game, rows, cols, steps: int = 40, polish: int = 6) -> float:
    """Minimum of ``f`` over the mixing domain by grid search and Nelder-Mead polish.

    Independent of the exact mixing solver: it only evaluates regrets.
    """
    X = np.array([getattr(r, "weights", r) for r in rows], dtype=float)
    Y = np.array([getattr(c, "weights", c) for c in cols], dtype=float)
    A = _grid(len(X), steps)
    B = _grid(len(Y), steps)
    xs = A @ X  # (Na, m)
    ys = B @ Y  # (Nb, n)
    R, C = game.R, game.C
    Ry = ys @ R.T  # (Nb, m)
    Cx = xs @ C  # (Na, n)
    xRy = xs @ R @ ys.T  # (Na, Nb)
    xCy = xs @ C @ ys.T
    fR = Ry.max(axis=1)[None, :] - xRy
    fC = Cx.max(axis=1)[:, None] - xCy
    F = np.maximum(fR, fC)
    best = float(F.min())
    flat = np.argsort(F, axis=None)[:polish]
    ka, kb = len(X), len(Y)

    def fun(t):
        a = _simplex_point(t[: max(ka - 1, 0)], ka)
        b = _simplex_point(t[max(ka - 1, 0):], kb)
        return regrets(game, a @ X, b @ Y).f

    for idx in flat:
        i, j = np.unravel_index(idx, F.shape)
        t0 = np.r_[A[i, : ka - 1], B[j, : kb - 1]]
        if t0.size == 0:
            continue
        res = minimize(fun, t0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best
