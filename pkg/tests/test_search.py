import numpy as np
import pytest

from conftest import game_stream
from nashmix.errors import InputError
from nashmix.game import BimatrixGame, random_game, regrets
from nashmix.mixing import brute_force_mix
from nashmix.search import (
    ALGORITHMS,
    RELATIONS,
    DescentConfig,
    check_relations,
    descend_to_stationary,
    run,
    search,
    search_dfm,
    vertex_table,
)

DFM_R = np.array([[0, 0, 0], [0, 0, 1], [1 / 3, 2 / 3, 2 / 3]])
DFM_C = np.array([[0, 1 / 3, 1 / 3], [0, 0, 1 / 3], [0, 1, 2 / 3]])


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_relations_hold_on_random_games(alg):
    tol = 1e-7 if alg not in ("ts", "dfm") else 1e-2
    for g in game_stream(100 + ALGORITHMS.index(alg), 12, 2, 6):
        out = search(g, alg)
        assert check_relations(out, tol) == [], alg
        table = vertex_table(out)
        for name, _ in RELATIONS[alg]:
            assert isinstance(name, str)
        assert all(np.isfinite(v) for v in table.values())


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_run_reports_consistent_profile(alg):
    g = random_game(np.random.default_rng(8), 4, 5)
    res = run(g, alg)
    p = regrets(g, res.mixing.x, res.mixing.y)
    assert p.f == pytest.approx(res.value.f, abs=1e-9)


def test_kps_picks_the_largest_entries():
    R = np.array([[0.2, 1.0], [0.0, 0.3]])
    C = np.array([[0.0, 0.1], [1.0, 0.4]])
    out = search(BimatrixGame(R, C), "kps")
    assert out.metadata == {"R_cell": [0, 1], "C_cell": [1, 0]}
    t = vertex_table(out)
    assert t["u1"] == 0 and t["g2"] == 0


def test_dmp06_result_is_at_most_one_half():
    for g in game_stream(5, 30, 2, 6):
        assert run(g, "dmp06").value.f <= 0.5 + 1e-12


def test_zero_game_is_solved_exactly():
    g = BimatrixGame(np.zeros((2, 2)), np.zeros((2, 2)))
    for alg in ALGORITHMS:
        assert run(g, alg).value.f == 0.0


def test_transposed_bbm_orientation():
    # the row player has the bigger zero-sum regret only after transposition
    for g in game_stream(77, 20, 2, 5):
        out = search(g, "bbm38")
        t = vertex_table(out)
        assert t["g1"] >= t["g2"] - 1e-12
        assert len(out.rows) == 2 and all(r.weights.size == g.m for r in out.rows)
        assert all(c.weights.size == g.n for c in out.cols)


def test_descent_certificate_passes_its_check():
    for g in game_stream(31, 10, 2, 6):
        res = descend_to_stationary(g, DescentConfig(delta=1e-3))
        assert res.converged
        chk = res.certificate.check(g, res.x, res.y)
        assert chk["passed"], chk
        # f never increases along the descent
        assert np.all(np.diff(res.history) <= 1e-15)


def test_descent_config_rejects_nonpositive_delta():
    with pytest.raises(InputError):
        DescentConfig(delta=0)


def test_unknown_algorithm():
    with pytest.raises(InputError):
        search(random_game(np.random.default_rng(0), 2, 2), "nope")


def test_dfm_tie_break_reaches_the_worst_case():
    g = BimatrixGame(DFM_R, DFM_C)
    e1 = np.eye(3)[0]
    cfg = DescentConfig(start=(e1, e1))
    low = search_dfm(g, cfg)
    high = search_dfm(g, cfg, tie_break="highest")
    assert np.argmax(low.named["wh"].weights) == 1
    assert np.argmax(high.named["wh"].weights) == 2
    assert run(g, "dfm", start=(e1, e1), tie_break="highest").value.f == pytest.approx(1 / 3, abs=1e-6)
    assert run(g, "dfm", start=(e1, e1)).value.f <= 1 / 3
    with pytest.raises(InputError):
        search_dfm(g, cfg, tie_break="random")


def test_dfm_theta_changes_the_extra_column():
    g = random_game(np.random.default_rng(2), 4, 4)
    out = search(g, "dfm", theta=0.25)
    z, ys, yh = (out.named[k].weights for k in ("z", "ys", "yh"))
    assert yh == pytest.approx(0.25 * z + 0.75 * ys)
    assert check_relations(out, 1e-2) == []


def test_ts_mixing_matches_brute_force_on_its_output():
    g = random_game(np.random.default_rng(11), 5, 5)
    res = run(g, "ts")
    ref, _, _ = brute_force_mix(g, list(res.search.rows), list(res.search.cols), steps=200)
    assert res.value.f <= ref + 1e-9
