"""Command-line entry point: ``agct run program.imp [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import corpus
from .concolic import DEFAULT_RAND_RANGE, DEFAULT_STEP_CAP, STRATEGIES, Strategy
from .driver import BudgetConfig, crabs_run, ratio_sweep, serialize_suite
from .ir import ParseError, ProgramError, parse_program

EXIT_ERROR = 3


def _ratios(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "/" in part:
            a, b = (float(x) for x in part.split("/"))
            out.append(a / (a + b))
        else:
            v = float(part)
            out.append(v / 100 if v > 1 else v)
    return out


def _load(arg: str):
    if arg.startswith("corpus:"):
        name = arg.split(":", 1)[1]
        if name.replace("-", "_") not in corpus.NAMES:
            raise ProgramError(f"unknown corpus program {name!r}; try one of {', '.join(corpus.NAMES)}")
        return corpus.load(name)
    return parse_program(Path(arg).read_text())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="agct", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="generate tests for a program")
    run.add_argument("file", help="source file, or corpus:<name>")
    run.add_argument("--budget-total", type=int, default=200_000)
    run.add_argument("--budget-concolic", type=int, default=8_000)
    run.add_argument("--budget-mc", type=int, default=2_000)
    run.add_argument("--strategy", choices=STRATEGIES, default="cfg")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--rand-range", type=int, default=DEFAULT_RAND_RANGE)
    run.add_argument("--step-cap", type=int, default=DEFAULT_STEP_CAP)
    run.add_argument("--report", type=Path)
    run.add_argument("--suite", type=Path)
    run.add_argument("--dump-arg", type=Path)
    run.add_argument("--dump-monitor", type=Path)
    run.add_argument("--baseline-concolic", action="store_true",
                     help="plain concolic testing with the whole budget")
    run.add_argument("--ratio-sweep", type=_ratios, metavar="LIST",
                     help="comma-separated testing shares, e.g. 100/0,80/20,50/50")
    run.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        p = _load(args.file)
        strat = Strategy(args.strategy, args.seed, args.rand_range, args.step_cap)
        if args.ratio_sweep:
            per_iter = args.budget_concolic + args.budget_mc
            rows = ratio_sweep(p, args.ratio_sweep, args.budget_total, per_iter, strat)
            text = json.dumps([asdict(r) for r in rows], indent=1)
            if args.report:
                args.report.write_text(text + "\n")
            for r in rows:
                fuel = r.fuel_spent if r.all_covered else "-"
                print(f"ratio {r.ratio:.2f}: {r.covered}/{r.denominator} fuel-to-finish {fuel}")
            return 0
        cfg = BudgetConfig(args.budget_total, args.budget_concolic, args.budget_mc)
        rep = crabs_run(p, None, cfg, strat, baseline=args.baseline_concolic,
                        dump_arg=args.dump_arg, dump_monitor=args.dump_monitor)
    except (ParseError, ProgramError, ValueError, OSError) as exc:
        print(f"agct: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.report:
        args.report.write_text(rep.to_json() + "\n")
    if args.suite:
        args.suite.write_text(serialize_suite(rep.suite, p, args.step_cap) + "\n")
    print(f"coverage {rep.ratio_text}; unreachable {len(rep.unreachable)}; "
          f"tests {len(rep.suite)}; fuel {rep.fuel_spent}; exit {rep.exit_code}")
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
