"""``dcowc`` command line: simulate, sweep, oracle, optimize.

Exit status is 0 on success, 1 for usage errors, 2 when a scene or problem
fails to parse or validate, and 3 when the oracle check disagrees with the
kernel. Failures print a single JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import run
from .optimize import InfeasibleAiming, optimize_aiming
from .oracle import OracleTooLarge
from .scene import ADR, WFOV, SceneError
from .scenefile import load_scene

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_ORACLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_scene_args(p, out_default):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", metavar="PATH", help="scene description file")
    src.add_argument("--builtin", metavar="NAME", choices=run.BUILTINS,
                     help="shipped scene (%(choices)s)")
    p.add_argument("--out", metavar="DIR", default=out_default, help="output directory")
    p.add_argument("--max-order", type=int, choices=(0, 1, 2), help="highest reflection order")
    p.add_argument("--bitrate", metavar="RATE", help="OOK bit rate, e.g. 2.5Gbps")
    p.add_argument("--receiver-kind", choices=("adr", "wfov", "both"), default="both")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker threads (results do not depend on N)")
    p.add_argument("--mrc", action="store_true", help="maximal-ratio combining of ADR branches")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dcowc", description="Data-centre optical wireless downlink simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="trace every link and write result tables")
    _add_scene_args(p, "results")

    p = sub.add_parser("sweep", help="repeat simulate over one parameter")
    _add_scene_args(p, "sweep")
    p.add_argument("parameter", choices=tuple(run.SWEEPS))
    p.add_argument("range", nargs="+",
                   help="'A..B [step S]' (S may be *F or /F) or a comma list")

    p = sub.add_parser("oracle", help="cross-check the kernel against path enumeration")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", metavar="PATH")
    src.add_argument("--builtin", metavar="NAME", choices=run.BUILTINS)
    p.add_argument("--out", metavar="DIR", help="also write oracle.json here")
    p.add_argument("--max-order", type=int, choices=(0, 1, 2))

    p = sub.add_parser("optimize", help="search ADT branch aiming")
    p.add_argument("problem", metavar="PROBLEM", help="problem file")
    p.add_argument("--out", metavar="DIR", default="optimized")
    p.add_argument("--threads", type=int, default=1, metavar="N")
    return parser


def _scene(args):
    scene = run.builtin_scene(args.builtin) if args.builtin else load_scene(args.scene)
    changes = {}
    if getattr(args, "max_order", None) is not None:
        changes["max_order"] = args.max_order
    if getattr(args, "bitrate", None):
        changes["bit_rate"] = run.quantity(args.bitrate, "rate")
    if getattr(args, "mrc", False):
        changes["combining"] = "mrc"
    scene = run.with_params(scene, **changes)
    scene.validate()
    return scene


def _kinds(args):
    return {"adr": (ADR,), "wfov": (WFOV,), "both": (ADR, WFOV)}[args.receiver_kind]


def _check_threads(n):
    if n < 1:
        raise UsageError("--threads must be at least 1")


def cmd_simulate(args):
    _check_threads(args.threads)
    rep = run.simulate(_scene(args), args.out, _kinds(args), args.threads)
    s = rep.summary
    print(f"{s['rows']} links, SNR {s['min_snr_db']:.2f}..{s['max_snr_db']:.2f} dB, "
          f"{rep.duration:.1f} s -> {args.out}")
    return EXIT_OK


def cmd_sweep(args):
    _check_threads(args.threads)
    family = run.SWEEPS[args.parameter][0]
    values = run.parse_range(" ".join(args.range), family)
    reps = run.sweep(_scene(args), args.parameter, values, args.out, _kinds(args), args.threads)
    for v, rep in zip(values, reps):
        print(f"{args.parameter}={v:.6g}: min SNR {rep.summary['min_snr_db']:.2f} dB")
    return EXIT_OK


def cmd_oracle(args):
    report = run.oracle_check(_scene(args))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.json").write_text(json.dumps(report, indent=2) + "\n")
    verdict = "ok" if report["passed"] else "MISMATCH"
    print(f"{len(report['pairs'])} responses, max relative deviation "
          f"{report['max_relative_deviation']:.3e} ({verdict})")
    return EXIT_OK if report["passed"] else EXIT_ORACLE


def cmd_optimize(args):
    _check_threads(args.threads)
    path = Path(args.problem)
    problem = run.parse_problem(path.read_text(), base=path.parent)
    if args.threads != 1:
        import dataclasses
        problem = dataclasses.replace(problem, threads=args.threads)
    problem.scene.validate()
    sol = optimize_aiming(problem)
    summary = run.write_solution(sol, problem, args.out)
    print(f"min SNR {summary['min_snr_db_before']:.2f} -> {summary['min_snr_db_after']:.2f} dB, "
          f"{summary['evaluations']} evaluations -> {args.out}")
    if not sol.feasible:
        _error("infeasible", f"{len(sol.violations)} branches see more than their target",
               violations=summary["violations"])
        return EXIT_VALIDATION
    return EXIT_OK


def _error(kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "oracle": cmd_oracle,
            "optimize": cmd_optimize}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        _error("usage", str(exc))
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _error("usage", str(exc))
        return EXIT_USAGE
    except (SceneError, OracleTooLarge, InfeasibleAiming, KeyError) as exc:
        extra = {"line": exc.line} if getattr(exc, "line", None) is not None else {}
        msg = exc.args[0] if exc.args else str(exc)
        _error("validation", str(msg), type=type(exc).__name__, **extra)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        _error("validation", f"cannot read {exc.filename}", type="FileNotFoundError")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
