import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import oracle_mix
from nashmix.errors import InputError
from nashmix.game import BimatrixGame, MixedStrategy, random_game, regrets
from nashmix.mixing import brute_force_mix, grid_min_batch, mix, mix_1w, mix_22, mix_23, onedim_min


def _strategies(rng, k, size):
    return [rng.dirichlet(np.ones(size)) if rng.random() < 0.5 else np.eye(size)[rng.integers(size)] for _ in range(k)]


def test_dmp_style_half_bound():
    # one row strategy, two columns: the (1,2) mix of a best-response pair
    R = np.array([[1.0, 0.0], [0.0, 1.0]])
    g = BimatrixGame(R, R.copy())
    sol = mix_1w(g, [1, 0], [[0, 1], [1, 0]])
    assert sol.f == pytest.approx(0.0)


def test_reported_profile_reproduces_value():
    rng = np.random.default_rng(4)
    g = random_game(rng, 5, 6)
    sol = mix_22(g, _strategies(rng, 2, 5), _strategies(rng, 2, 6))
    assert regrets(g, sol.x, sol.y).f == pytest.approx(sol.f, abs=1e-12)
    assert sol.alpha.sum() == pytest.approx(1) and sol.beta.sum() == pytest.approx(1)


def test_dispatch_and_shape_errors():
    g = random_game(np.random.default_rng(0), 3, 3)
    e = np.eye(3)
    assert mix(g, [e[0]], [e[0], e[1], e[2]]).f >= 0
    assert mix(g, [e[0], e[1], e[2]], [e[0]]).f >= 0
    with pytest.raises(InputError):
        mix_22(g, [e[0]], [e[0], e[1]])


def test_accepts_mixed_strategy_objects():
    g = random_game(np.random.default_rng(2), 3, 3)
    rows = [MixedStrategy.pure(0, 3), MixedStrategy.uniform(3)]
    cols = [np.eye(3)[1], np.eye(3)[2]]
    assert mix(g, rows, cols).f == pytest.approx(mix(g, [r.weights for r in rows], cols).f)


def test_grid_min_of_crossing_planes():
    # F_R = a, F_C = 1 - a: minimum of the max is 1/2 along a = 1/2
    a, b, v = grid_min_batch([[0, 1, 0, 0]], [[1, -1, 0, 0]])
    assert v[0] == pytest.approx(0.5)
    assert a[0] == pytest.approx(0.5)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 2), (1, 3), (2, 2), (2, 3), (3, 2)]))
def test_never_above_the_grid_oracle(seed, shape):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(2, 7, size=2)
    g = random_game(rng, int(m), int(n))
    rows, cols = _strategies(rng, shape[0], int(m)), _strategies(rng, shape[1], int(n))
    sol = mix(g, rows, cols)
    ref, _, _ = brute_force_mix(g, rows, cols, steps=30)
    assert sol.f <= ref + 1e-9
    assert regrets(g, sol.x, sol.y).f == pytest.approx(sol.f, abs=1e-12)


def test_matches_polished_oracle_on_23():
    rng = np.random.default_rng(21)
    for _ in range(5):
        g = random_game(rng, 5, 5)
        rows, cols = _strategies(rng, 2, 5), _strategies(rng, 3, 5)
        sol = mix_23(g, rows, cols)
        ref = oracle_mix(g, rows, cols)
        assert sol.f <= ref + 1e-9
        assert ref - sol.f <= 1e-3


def test_onedim_helper():
    t, v = onedim_min(lambda t: (t - 0.25) ** 2)
    assert t == pytest.approx(0.25, abs=1e-3) and v == pytest.approx(0.0, abs=1e-6)
