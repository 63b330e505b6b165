import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nashmix.errors import InputError
from nashmix.game import (
    BimatrixGame,
    MixedStrategy,
    Side,
    best_response,
    load_game,
    normalize,
    pure_equilibria,
    random_game,
    regrets,
    support_enumeration,
    suppmin,
)

unit = st.floats(0, 1, allow_nan=False)


def matrices(m, n):
    return arrays(float, (m, n), elements=unit)


@st.composite
def games(draw, max_size=5):
    m = draw(st.integers(1, max_size))
    n = draw(st.integers(1, max_size))
    return BimatrixGame(draw(matrices(m, n)), draw(matrices(m, n)))


@st.composite
def game_and_profile(draw):
    g = draw(games())
    x = draw(arrays(float, g.m, elements=st.floats(0.01, 1)))
    y = draw(arrays(float, g.n, elements=st.floats(0.01, 1)))
    return g, x / x.sum(), y / y.sum()


def test_regrets_of_matching_pennies():
    R = np.array([[1.0, 0.0], [0.0, 1.0]])
    g = BimatrixGame(R, 1 - R)
    assert regrets(g, [0.5, 0.5], [0.5, 0.5]).f == pytest.approx(0.0)
    p = regrets(g, [1, 0], [1, 0])
    assert (p.fR, p.fC) == (0.0, 1.0)


def test_normalize_maps_each_matrix_to_unit_interval():
    g = normalize([[2, 4], [6, 10]], [[-1, -1], [-1, -1]])
    assert g.R.min() == 0 and g.R.max() == 1
    assert np.all(g.C == 0)


def test_rejects_payoffs_outside_unit_interval():
    with pytest.raises(InputError):
        BimatrixGame([[2.0]], [[0.0]])
    with pytest.raises(InputError):
        BimatrixGame([[0.0, 1.0]], [[0.0]])


def test_strategy_validation():
    with pytest.raises(InputError):
        MixedStrategy([0.5, 0.6])
    with pytest.raises(InputError):
        MixedStrategy([-0.1, 1.1])
    s = MixedStrategy.mix([MixedStrategy.pure(0, 3), MixedStrategy.uniform(3)], [0.5, 0.5])
    assert s.weights == pytest.approx([2 / 3, 1 / 6, 1 / 6])


def test_best_response_ties_resolve_to_lowest_index():
    g = BimatrixGame([[0.5, 0.0], [0.5, 1.0]], np.zeros((2, 2)))
    assert best_response(g, Side.ROW, [1, 0]) == (0, 1)
    assert best_response(g, Side.ROW, [0, 1]) == (1,)
    assert suppmin([1 / 6, 1 / 6, 1 / 6]) == (0, 1, 2)


def test_json_round_trip(tmp_path):
    g = random_game(np.random.default_rng(0), 3, 4)
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_json()))
    h = load_game(path)
    assert h.digest() == g.digest()
    assert np.array_equal(h.R, g.R)


def test_unnormalized_json_is_rescaled(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"R": [[0, 5]], "C": [[1, 3]]}))
    g = load_game(path)
    assert g.R.tolist() == [[0, 1]] and g.C.tolist() == [[0, 1]]


def test_bad_game_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_game(bad)
    with pytest.raises(InputError):
        load_game(tmp_path / "missing.json")


@given(game_and_profile())
def test_regrets_are_nonnegative_and_transpose_symmetric(data):
    g, x, y = data
    p = regrets(g, x, y)
    q = regrets(g.transpose(), y, x)
    assert p.fR >= 0 and p.fC >= 0
    assert p.fR == pytest.approx(q.fC, abs=1e-12)
    assert p.fC == pytest.approx(q.fR, abs=1e-12)
    assert p.f == max(p.fR, p.fC)


@given(game_and_profile())
def test_pure_best_response_has_zero_regret(data):
    g, x, y = data
    i = best_response(g, Side.ROW, y)[0]
    assert regrets(g, np.eye(g.m)[i], y).fR == pytest.approx(0.0, abs=1e-12)
    j = best_response(g, Side.COL, x)[0]
    assert regrets(g, x, np.eye(g.n)[j]).fC == pytest.approx(0.0, abs=1e-12)


def test_support_enumeration_finds_exact_equilibria():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = random_game(rng, 3, 3)
        found = list(support_enumeration(g))
        assert found, "every nondegenerate game has an equilibrium"
        for x, y in found:
            assert regrets(g, x, y).f <= 1e-9
        for i, j in pure_equilibria(g):
            assert regrets(g, np.eye(3)[i], np.eye(3)[j]).f <= 1e-9
