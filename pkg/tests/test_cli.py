import json
from pathlib import Path

import numpy as np
import pytest

from nashmix.cli import EXIT_FAILED, EXIT_INPUT, EXIT_OK, main
from nashmix.game import load_game
from nashmix.mixing import brute_force_mix

DATA = Path(__file__).resolve().parent.parent / "data"


def invoke(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_dfm_tight_game_reaches_one_third(capsys):
    code, rep = invoke(capsys, "run", "--game", DATA / "dfm_tight.json", "--alg", "dfm",
                       "--config", DATA / "dfm_tight.config.json")  # fmt: skip
    assert code == EXIT_OK
    assert rep["regrets"]["f"] == pytest.approx(1 / 3, abs=1e-6)
    assert rep["config"]["tie_break"] == "highest"


def test_zero_game(capsys):
    code, rep = invoke(capsys, "run", "--game", DATA / "zero.json", "--alg", "dmp06")
    assert code == EXIT_OK and rep["regrets"]["f"] == 0.0
    assert "wall_time" in rep


def test_ts_on_the_stored_random_game(capsys):
    code, rep = invoke(capsys, "run", "--game", DATA / "random_5x5.json", "--alg", "ts")
    assert code == EXIT_OK
    f = rep["regrets"]["f"]
    assert f <= 0.339331 + 1e-3
    game = load_game(DATA / "random_5x5.json")
    ref, _, _ = brute_force_mix(game, rep["search"]["rows"], rep["search"]["cols"], steps=100)
    assert f <= ref + 1e-9


def test_bound_commands(capsys):
    code, rep = invoke(capsys, "bound", "--alg", "kps", "--no-timing")
    assert code == EXIT_OK
    assert rep["value"] == pytest.approx(0.75, abs=1e-4)
    assert rep["converged"] and rep["seeds"] == [0]
    assert "wall_time" not in rep
    code, rep = invoke(capsys, "bound", "--alg", "bbm38", "--dump-program")
    assert rep["value"] == pytest.approx((3 - 5**0.5) / 2, abs=1e-4)
    assert rep["program"]["algorithm"] == "bbm38"
    assert {c["constraint"] for c in rep["active_constraints"]} >= {"g1 >= g2"}


def test_bound_from_program_file(capsys, tmp_path):
    code, rep = invoke(capsys, "bound", "--alg", "dmp06", "--dump-program")
    path = tmp_path / "p.json"
    path.write_text(json.dumps(rep["program"]))
    code, again = invoke(capsys, "bound", "--program", path)
    assert code == EXIT_OK and again["value"] == pytest.approx(rep["value"], abs=1e-12)


@pytest.mark.parametrize("instance", ["ts", "dfm"])
def test_verify_tight(capsys, instance):
    code, rep = invoke(capsys, "verify-tight", instance)
    assert code == EXIT_OK and rep["passed"]


def test_input_errors_exit_two(capsys, tmp_path):
    assert main(["verify-tight", "kps"]) == EXIT_INPUT
    assert main(["run", "--game", str(tmp_path / "missing.json"), "--alg", "kps"]) == EXIT_INPUT
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"colour": 1}))
    assert main(["run", "--game", str(DATA / "zero.json"), "--alg", "kps", "--config", str(bad)]) == EXIT_INPUT
    bad.write_text("{not json")
    assert main(["bound", "--alg", "kps", "--config", str(bad)]) == EXIT_INPUT
    assert main(["bound"]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_output_is_byte_stable(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["bound", "--alg", "dmp06", "--no-timing", "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    for path in (a, b):
        main(["run", "--game", str(DATA / "random_5x5.json"), "--alg", "dfm", "--no-timing", "--out", str(path)])
    assert a.read_bytes() == b.read_bytes()


def test_seed_precedence(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("NASHMIX_SEED", "7")
    _, rep = invoke(capsys, "bound", "--alg", "dmp06", "--no-timing")
    assert rep["config"]["seed"] == 7
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "starts": 16}))
    _, rep = invoke(capsys, "bound", "--alg", "dmp06", "--config", cfg)
    assert rep["config"]["seed"] == 3 and rep["config"]["starts"] == 16
    _, rep = invoke(capsys, "bound", "--alg", "dmp06", "--config", cfg, "--seed", 11)
    assert rep["config"]["seed"] == 11 and rep["seeds"] == [11]
    monkeypatch.setenv("NASHMIX_SEED", "x")
    assert main(["bound", "--alg", "dmp06"]) == EXIT_INPUT


def test_dump_partition(capsys, tmp_path):
    game = load_game(DATA / "random_5x5.json")
    s = np.full(game.n, 1 / game.n).tolist()
    strat = tmp_path / "s.json"
    strat.write_text(json.dumps({"rows": [np.eye(game.m)[0].tolist()], "cols": [s, s]}))
    code, rep = invoke(capsys, "dump-partition", "--game", DATA / "random_5x5.json", "--strategies", strat)
    assert code == EXIT_OK
    part = rep["partition"]["row_max_term"]
    assert part["kind"] == "envelope" and len(part["piece_index"]) == 1
    assert rep["partition"]["column_max_term"]["kind"] == "single"
    _, again = invoke(capsys, "dump-partition", "--game", DATA / "random_5x5.json", "--strategies", strat)
    assert again == rep


def test_dump_partition_from_a_search(capsys):
    code, rep = invoke(capsys, "dump-partition", "--game", DATA / "random_5x5.json", "--alg", "ts")
    assert code == EXIT_OK and rep["source"] == "ts"
    assert {rep["partition"]["row_max_term"]["kind"], rep["partition"]["column_max_term"]["kind"]} <= {
        "envelope", "polygons", "single",
    }


def test_run_with_partition(capsys):
    code, rep = invoke(capsys, "run", "--game", DATA / "random_5x5.json", "--alg", "bbm38", "--dump-partition")
    assert code == EXIT_OK
    assert rep["partition"]["row_max_term"]["kind"] == "envelope"


def test_verify_failure_code_is_distinct():
    assert EXIT_FAILED not in (EXIT_OK, EXIT_INPUT)
