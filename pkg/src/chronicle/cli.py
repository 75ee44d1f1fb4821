"""Command line entry point: ``chronicle run`` and ``chronicle verify-paper``."""

from __future__ import annotations

import argparse
import os
import sys

from . import scenario
from .checks import UnknownCheck, run_checks
from .errors import ChronicleError
from .linalg import DEFAULT_TOL

ENV_TOL = "CHRONICLE_TOL"


def _tolerance(flag: float | None) -> float:
    if flag is not None:
        return flag
    env = os.environ.get(ENV_TOL)
    if env:
        try:
            return float(env)
        except ValueError:
            raise SystemExit(f"error: {ENV_TOL}={env!r} is not a number")
    return DEFAULT_TOL


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def _cmd_run(args) -> int:
    tol = _tolerance(args.tol)
    report = scenario.run(args.file, tol if (args.tol is not None or os.environ.get(ENV_TOL)) else None)
    if args.output == "json":
        print(scenario.dumps(report))
        return 0
    rows = [["history", "probability"]]
    rows += [[" ; ".join(h["history"]), format(h["probability"], ".12g")] for h in report["histories"]]
    print(_table(rows))
    print(f"total {report['total_probability']:.12g}  worst overlap {report['consistency']['worst_overlap']:.3e}")
    for q in report["queries"]:
        print(f"{scenario.dumps(q['query'])} -> {scenario.dumps(q['result'])}")
    return 0


def _cmd_verify(args) -> int:
    tol = _tolerance(args.tol)
    try:
        results = run_checks(args.only, args.theta, tol)
    except UnknownCheck as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.output == "json":
        print(scenario.dumps({
            "tolerance": tol,
            "theta": args.theta,
            "checks": [{"name": r.name, "description": r.description, "deviation": r.deviation
                        if r.deviation != float("inf") else "inf", "passed": r.passed} for r in results],
        }))
    else:
        rows = [["check", "status", "deviation", "description"]]
        rows += [[r.name, "PASS" if r.passed else "FAIL", f"{r.deviation:.3e}", r.description] for r in results]
        print(_table(rows))
        failed = sum(not r.passed for r in results)
        print(f"{len(results) - failed}/{len(results)} checks passed at tolerance {tol:g}")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chronicle", description="Consistent-histories engine.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate a scenario document")
    r.add_argument("file")
    r.add_argument("--tol", type=float, default=None, help=f"consistency tolerance (default {DEFAULT_TOL:g}, env {ENV_TOL})")
    r.add_argument("--output", choices=("json", "table"), default="json")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify-paper", help="recompute the reference results and report pass/fail")
    v.add_argument("--only", action="append", metavar="NAME", help="run only this check (repeatable)")
    v.add_argument("--theta", type=float, default=None, help="single angle in radians for angle-dependent checks")
    v.add_argument("--tol", type=float, default=None, help=f"pass threshold (default {DEFAULT_TOL:g}, env {ENV_TOL})")
    v.add_argument("--output", choices=("json", "table"), default="table")
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ChronicleError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
