import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nashmix.errors import InputError
from nashmix.game import random_game
from nashmix.geometry import TRIANGLE, ConvexPolygon, clip_halfplane, envelope, separate_2m, separate_3m, separate_affine

line = st.tuples(st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False))


def test_two_crossing_lines():
    env = envelope([(1.0, 0.0), (-1.0, 1.0)])
    assert env.breakpoints == pytest.approx([0.0, 0.5, 1.0])
    assert env.piece_index == (1, 0)
    assert env.values == pytest.approx([1.0, 0.5, 1.0])


def test_equal_slopes_keep_the_highest_line():
    env = envelope([(0.0, 0.2), (0.0, 0.7), (0.0, 0.7)])
    assert env.piece_index == (1,)


def test_line_winning_only_outside_domain_is_dropped():
    env = envelope([(0.0, 1.0), (1.0, -0.5)])  # second overtakes at x = 1.5
    assert env.piece_index == (0,)


def test_empty_input_rejected():
    with pytest.raises(InputError):
        envelope([])


@given(st.lists(line, min_size=1, max_size=12))
def test_envelope_matches_pointwise_max(lines):
    env = envelope(lines)
    xs = np.linspace(0, 1, 257)
    a = np.array([l[0] for l in lines])
    b = np.array([l[1] for l in lines])
    ref = np.max(np.outer(xs, a) + b, axis=1)
    # the piece structure, not just __call__, must reproduce the max
    pieces = np.array([env.piece_at(x) for x in xs])
    got = a[pieces] * xs + b[pieces]
    assert np.max(np.abs(got - ref)) <= 1e-9
    assert np.all(np.diff(env.breakpoints) > 0)


def test_identical_column_strategies_give_one_piece():
    g = random_game(np.random.default_rng(1), 5, 4)
    env = separate_2m(g, [0.3, 0.3, 0.2, 0.2], [0.3, 0.3, 0.2, 0.2])
    assert len(env) == 1


def test_clip_keeps_orientation():
    half = clip_halfplane(TRIANGLE, 0.5, -1.0, 0.0)  # p <= 0.5
    poly = ConvexPolygon(half, 0)
    assert poly.signed_area < 0  # clockwise
    assert poly.area == pytest.approx(0.5 - 0.125)


def test_identical_functions_go_to_lowest_index():
    polys = separate_affine([0.1, 0.1], [0.2, 0.2], [0.3, 0.3])
    assert not polys[0].is_empty and polys[1].is_empty


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_polygons_tile_the_triangle(seed, m):
    rng = np.random.default_rng(seed)
    g = random_game(rng, m, 4)
    ys = [rng.dirichlet(np.ones(4)) for _ in range(3)]
    polys = separate_3m(g, *ys)
    total = sum(p.area for p in polys if not p.is_degenerate)
    assert total == pytest.approx(0.5, abs=1e-9)
    for p in polys:
        if p.vertices.shape[0] >= 3 and not p.is_degenerate:
            assert p.signed_area < 0


def test_polygon_membership_agrees_with_argmax():
    rng = np.random.default_rng(9)
    g = random_game(rng, 6, 5)
    ys = [rng.dirichlet(np.ones(5)) for _ in range(3)]
    polys = separate_3m(g, *ys)
    pts = rng.random((2000, 2))
    pts = pts[pts.sum(axis=1) <= 1]
    for p, q in pts:
        y = p * ys[0] + q * ys[1] + (1 - p - q) * ys[2]
        i = int(np.argmax(g.R @ y))
        assert polys[i].contains((p, q), tol=1e-7)
