"""Command-line entry point.

Exit codes: 0 on success, 2 on a detected blow-up (scriptable), 1 on any
error, 64 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness, stepper
from .errors import KsnbcError
from .harness import EXIT_BLOWUP, EXIT_ERROR, EXIT_OK, EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ksnbc",
                     description="Chemotaxis / nonlinear-boundary-flux simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "single chemotaxis run"),
        ("nbc", "scalar boundary-flux run"),
        ("sweep", "(p, mu) parameter sweep"),
        ("ineq", "inequality-lab campaign"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="TOML config file")
        sp.add_argument("--out", help="output directory override")
        sp.add_argument("--workers", type=int, help="sweep worker pool width")
        sp.add_argument("--seed", type=int, help="seed override")
        sp.add_argument("--strict", action="store_true",
                        help="strict config keys (always on; accepted for scripts)")
    rp = sub.add_parser("report", help="summarize a run directory")
    rp.add_argument("dir", help="run output directory")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "report":
            summary = harness.report_dir(args.dir)
            print(json.dumps(summary, indent=2, default=str))
            return EXIT_OK
        cfg = harness.load_config(args.config)
        if args.out:
            if isinstance(cfg, harness.SweepConfig):
                cfg.base.out = Path(args.out)
            else:
                cfg.out = Path(args.out)
        if args.command in ("run", "nbc"):
            if not isinstance(cfg, harness.RunConfig):
                raise KsnbcError(f"config {args.config} is not a single-run config")
            if args.seed is not None:
                cfg.seed = args.seed
            outcome, _series = harness.execute_run(cfg)
            print(f"{outcome.status} at t={outcome.t:.6g} "
                  f"({outcome.steps} steps, {outcome.wall_time:.2f}s) -> {cfg.out}")
            return EXIT_BLOWUP if outcome.status == stepper.BLOW_UP else EXIT_OK
        if args.command == "sweep":
            if not isinstance(cfg, harness.SweepConfig):
                raise KsnbcError(f"config {args.config} is not a sweep config")
            if args.workers is not None:
                cfg.workers = args.workers
            rows = harness.execute_sweep(cfg)
            print(f"sweep: {len(rows)} cells -> {cfg.base.out / 'sweep.csv'}")
            return EXIT_OK
        if args.command == "ineq":
            if not isinstance(cfg, harness.IneqConfig):
                raise KsnbcError(f"config {args.config} is not an ineq config")
            results = harness.execute_ineq(cfg)
            for lemma, rows in results.items():
                fitted = ", ".join(f"{'x'.join(map(str, cells))}: {rep.fitted:.4g}"
                                   for cells, rep in rows)
                print(f"{lemma}: {fitted}")
            return EXIT_OK
        raise KsnbcError(f"unknown command {args.command!r}")
    except KsnbcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
