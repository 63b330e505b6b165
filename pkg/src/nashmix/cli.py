"""Command-line interface.

Subcommands::

    nashmix run --game G.json --alg ts          # search + exact mixing
    nashmix bound --alg dfm                     # approximation bound
    nashmix verify-tight dfm                    # worst-case instance checks
    nashmix dump-partition --game G.json --alg bbm38

Every command prints one JSON document (or writes it to ``--out``).  Settings
come from flags, then a ``--config`` JSON file, then defaults; the seed also
falls back to ``$NASHMIX_SEED``.  The merged settings are echoed in the report.

Exit codes: 0 success, 1 failed verification, 2 input error, 3 solver error,
4 unconverged result.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .bounds import BOUND_IDS, BoundProgram, SolverConfig, build_bound_program, solve_bound_program, tightness_report
from .bounds import verify_tight_instance
from .errors import InputError, NashmixError, SolverError
from .game import BimatrixGame, as_vector, load_game, regrets
from .geometry import separate_2m, separate_3m
from .mixing import mix
from .search import ALGORITHMS, TIE_BREAKS, search

log = logging.getLogger("nashmix")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_UNCONVERGED = 4

DEFAULTS: dict[str, Any] = {
    "delta": 1e-3,
    "eps": None,  # per command: search grid 0.05, bound limit 0.0
    "theta": 0.5,
    "tie_break": "lowest",
    "start": None,
    "seed": 0,
    "starts": 64,
    "population": 40,
    "generations": 2000,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "weights"):
        return _jsonable(obj.weights)
    return obj


def _emit(report: dict, out: Optional[str]) -> None:
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("config file must hold a JSON object")
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise InputError(f"unknown config key(s): {', '.join(unknown)}")
    return data


def _settings(args: argparse.Namespace, keys: Sequence[str]) -> dict:
    """Merge flags > config file > environment (seed only) > defaults."""
    config = _load_config(getattr(args, "config", None))
    merged = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in config:
            merged[key] = config[key]
        elif key == "seed" and os.environ.get("NASHMIX_SEED"):
            try:
                merged[key] = int(os.environ["NASHMIX_SEED"])
            except ValueError:
                raise InputError("NASHMIX_SEED must be an integer") from None
        else:
            merged[key] = DEFAULTS[key]
    return merged


def _start_vectors(start, game: BimatrixGame):
    if start is None:
        return None
    try:
        return as_vector(start["x"], game.m), as_vector(start["y"], game.n)
    except (KeyError, TypeError):
        raise InputError('"start" must be an object with keys "x" and "y"') from None


def _partition(game: BimatrixGame, rows, cols) -> dict:
    out = {}
    for label, M, strategies in (("row_max_term", game.R, cols), ("column_max_term", game.C.T, rows)):
        vecs = [s.weights if hasattr(s, "weights") else np.asarray(s, dtype=float) for s in strategies]
        if len(vecs) == 2:
            out[label] = {"kind": "envelope", **separate_2m(M, vecs[0], vecs[1]).to_json()}
        elif len(vecs) == 3:
            polys = separate_3m(M, vecs[0], vecs[1], vecs[2])
            out[label] = {"kind": "polygons", "polygons": [p.to_json() for p in polys if not p.is_empty]}
        else:
            out[label] = {"kind": "single", "strategies": len(vecs)}
    return out


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_run(args) -> tuple[dict, int]:
    game = load_game(args.game)
    cfg = _settings(args, ["delta", "eps", "theta", "tie_break", "start", "seed"])
    if cfg["eps"] is None:
        cfg["eps"] = 0.05
    if cfg["tie_break"] not in TIE_BREAKS:
        raise InputError(f"tie_break must be one of {', '.join(TIE_BREAKS)}")
    t0 = time.perf_counter()
    out = search(
        game, args.alg, delta=float(cfg["delta"]), eps=float(cfg["eps"]), theta=float(cfg["theta"]),
        start=_start_vectors(cfg["start"], game), tie_break=cfg["tie_break"],
    )  # fmt: skip
    sol = mix(game, list(out.rows), list(out.cols))
    elapsed = time.perf_counter() - t0
    check = regrets(game, sol.x, sol.y)
    report = {
        "command": "run",
        "algorithm": out.algorithm,
        "game": {"digest": game.digest(), "shape": list(game.shape)},
        "profile": {"x": sol.x.weights, "y": sol.y.weights},
        "regrets": {"fR": check.fR, "fC": check.fC, "f": check.f},
        "mixing": {"alpha": sol.alpha, "beta": sol.beta},
        "search": {
            "rows": [r.weights for r in out.rows],
            "cols": [c.weights for c in out.cols],
            "transposed": out.transposed,
            "metadata": out.metadata,
        },
        "config": cfg,
    }
    if args.dump_partition:
        report["partition"] = _partition(game, out.rows, out.cols)
    if not args.no_timing:
        report["wall_time"] = elapsed
    code = EXIT_OK
    if out.metadata.get("converged") is False:
        log.warning("the descent did not reach the stationarity threshold")
        code = EXIT_UNCONVERGED
    return report, code


def cmd_bound(args) -> tuple[dict, int]:
    cfg = _settings(args, ["eps", "theta", "seed", "starts", "population", "generations"])
    if cfg["eps"] is None:
        cfg["eps"] = 0.0
    if args.program:
        try:
            program = BoundProgram.from_json(json.loads(Path(args.program).read_text()))
        except OSError as exc:
            raise InputError(f"cannot read program {args.program}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"program file is not valid JSON: {exc}") from None
    elif args.alg:
        program = build_bound_program(args.alg, eps=float(cfg["eps"]), theta=float(cfg["theta"]))
    else:
        raise InputError("bound needs --alg or --program")
    solver = SolverConfig(
        seed=int(cfg["seed"]), population=int(cfg["population"]), generations=int(cfg["generations"]),
        starts=int(cfg["starts"]),
    )  # fmt: skip
    result = solve_bound_program(program, solver)
    report = result.to_json()
    report["command"] = "bound"
    report["tightness"] = tightness_report(result, program)
    report["active_constraints"] = report["tightness"]["active_constraints"]
    report["config"] = cfg
    if args.dump_program:
        report["program"] = program.to_json()
    if args.no_timing:
        report.pop("wall_time", None)
    if not result.converged:
        return report, EXIT_UNCONVERGED
    return report, EXIT_OK


def cmd_verify_tight(args) -> tuple[dict, int]:
    report = verify_tight_instance(args.instance)
    report["command"] = "verify-tight"
    for c in report["checks"]:
        if not c["passed"]:
            log.error("check failed: %s", c["check"])
    return report, EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_dump_partition(args) -> tuple[dict, int]:
    game = load_game(args.game)
    if args.strategies:
        try:
            data = json.loads(Path(args.strategies).read_text())
            rows = [as_vector(r, game.m) for r in data["rows"]]
            cols = [as_vector(c, game.n) for c in data["cols"]]
        except OSError as exc:
            raise InputError(f"cannot read strategies file: {exc}") from None
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f'strategies file must be JSON with "rows" and "cols": {exc}') from None
        source = "file"
    elif args.alg:
        cfg = _settings(args, ["delta", "eps", "theta", "tie_break", "start"])
        out = search(
            game, args.alg, delta=float(cfg["delta"]), eps=float(cfg["eps"] or 0.05), theta=float(cfg["theta"]),
            start=_start_vectors(cfg["start"], game), tie_break=cfg["tie_break"],
        )  # fmt: skip
        rows, cols = list(out.rows), list(out.cols)
        source = out.algorithm
    else:
        raise InputError("dump-partition needs --strategies or --alg")
    report = {
        "command": "dump-partition",
        "game": {"digest": game.digest(), "shape": list(game.shape)},
        "source": source,
        "rows": [np.asarray(getattr(r, "weights", r)) for r in rows],
        "cols": [np.asarray(getattr(c, "weights", c)) for c in cols],
        "partition": _partition(game, rows, cols),
    }
    return report, EXIT_OK


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nashmix", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON file with default settings")
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, help="random seed (default $NASHMIX_SEED or 0)")
    common.add_argument("--no-timing", action="store_true", help="omit wall times for byte-stable output")
    common.add_argument("-v", "--verbose", action="store_true")

    search_opts = argparse.ArgumentParser(add_help=False)
    search_opts.add_argument("--delta", type=float, help="stationarity threshold of the descent phases")
    search_opts.add_argument("--eps", type=float, help="grid width of the dmp07 search")
    search_opts.add_argument("--theta", type=float, help="weight on z of the extra dfm column")
    search_opts.add_argument("--tie-break", dest="tie_break", choices=TIE_BREAKS,
                             help="best-response tie rule for the extra dfm row")  # fmt: skip

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common, search_opts], help="search phase plus exact mixing")
    p.add_argument("--game", required=True, metavar="PATH")
    p.add_argument("--alg", required=True, choices=ALGORITHMS)
    p.add_argument("--dump-partition", action="store_true", help="include the linear pieces of the mixing domain")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("bound", parents=[common], help="approximation bound of a search phase")
    p.add_argument("--alg", choices=BOUND_IDS)
    p.add_argument("--program", metavar="PATH", help="solve a bound program from JSON instead")
    p.add_argument("--eps", type=float, help="dmp07 grid width (default 0: the limiting bound)")
    p.add_argument("--theta", type=float, help="dfm column weight")
    p.add_argument("--starts", type=int, help="local refinement starts")
    p.add_argument("--population", type=int, help="differential evolution population")
    p.add_argument("--generations", type=int, help="differential evolution generation cap")
    p.add_argument("--dump-program", action="store_true", help="include the program JSON")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("verify-tight", parents=[common], help="check a worst-case instance")
    p.add_argument("instance", choices=("ts", "dfm"))
    p.set_defaults(handler=cmd_verify_tight)

    p = sub.add_parser("dump-partition", parents=[common, search_opts], help="linear pieces of a mixing domain")
    p.add_argument("--game", required=True, metavar="PATH")
    p.add_argument("--alg", choices=ALGORITHMS, help="take the strategies from this search phase")
    p.add_argument("--strategies", metavar="PATH", help='JSON {"rows": [...], "cols": [...]}')
    p.set_defaults(handler=cmd_dump_partition)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")  # fmt: skip
    try:
        report, code = args.handler(args)
        _emit(report, args.out)
        return code
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except NashmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
