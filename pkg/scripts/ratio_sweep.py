"""Testing/checking fuel split sweep on the motivating example family.

Runs crabs on the loop-bound variants of the motivating example for each
ratio and prints the fuel needed to cover every goal (``-`` when the budget
ran out or the loop stalled first).

    python scripts/ratio_sweep.py --bounds 10 30 50 --scale 8 --json sweep.json
"""
import argparse
import json
import time
from dataclasses import asdict

from agct import corpus
from agct.concolic import Strategy
from agct.driver import DEFAULT_RATIOS, ratio_sweep


def per_iteration(bound: int, scale: float) -> int:
    # one testing phase must afford about `bound` runs of about 5 * bound steps
    return int(scale * bound * bound)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--bounds", type=int, nargs="+", default=[10, 30, 50])
    ap.add_argument("--ratios", type=float, nargs="+", default=list(DEFAULT_RATIOS))
    ap.add_argument("--total", type=int, default=200_000)
    ap.add_argument("--scale", type=float, default=8.0, help="per-iteration fuel = scale * bound^2")
    ap.add_argument("--strategy", default="cfg")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="write all rows here")
    args = ap.parse_args()

    out = []
    for b in args.bounds:
        t0 = time.perf_counter()
        pi = per_iteration(b, args.scale)
        rows = ratio_sweep(corpus.load("motivating", bound=b), args.ratios, args.total, pi,
                           Strategy(args.strategy, seed=args.seed))
        cells = " ".join(f"{r.ratio:.1f}:{r.fuel_spent if r.all_covered else '-'}" for r in rows)
        print(f"bound {b:3d} per-iteration {pi:6d}  {cells}  ({time.perf_counter() - t0:.1f}s)", flush=True)
        out += [dict(bound=b, per_iteration=pi, **asdict(r)) for r in rows]
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=1)


if __name__ == "__main__":
    main()
