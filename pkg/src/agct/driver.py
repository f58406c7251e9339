"""Alternation of concolic testing and model checking, plus replay and reporting."""
from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .cegar import abstract_mc
from .concolic import DEFAULT_RAND_RANGE, DEFAULT_STEP_CAP, Strategy, TestCase, concolic_test
from .expr import FALSE
from .ir import Program, enumerate_branches, graph_reachable_branches
from .monitor import ProductView, lift_goals, monitor_from_arg, monitor_to_dot

log = logging.getLogger(__name__)

EXIT_DONE = 0
EXIT_BUDGET = 1
EXIT_STALL = 2


@dataclass(frozen=True)
class BudgetConfig:
    """Fuel budgets: ``total`` for the run, ``concolic`` and ``mc`` per iteration."""

    total: int = 200_000
    concolic: int = 8_000
    mc: int = 2_000

    def __post_init__(self):
        if self.total <= 0:
            raise ValueError("total budget must be positive")
        if self.concolic < 0 or self.mc < 0 or self.concolic + self.mc == 0:
            raise ValueError("per-iteration budgets must be non-negative and not both zero")
        if self.concolic > self.total or self.mc > self.total:
            raise ValueError("per-iteration budget exceeds the total")

    @staticmethod
    def split(total: int, ratio: float, per_iteration: int) -> "BudgetConfig":
        """Budget giving ``ratio`` of each iteration to testing and the rest to checking."""
        tc = round(per_iteration * ratio)
        return BudgetConfig(total, tc, per_iteration - tc)


# ---------------------------------------------------------------- replay


@dataclass
class ReplayResult:
    path: list[str]
    covered: set[str]
    inputs: TestCase
    capped: bool = False


def replay(p: Program, test: Sequence[int], step_cap: int = DEFAULT_STEP_CAP,
           rng: random.Random | None = None, rand_range: int = DEFAULT_RAND_RANGE) -> ReplayResult:
    """Concrete run of ``p`` on ``test``; missing inputs are drawn from ``rng``."""
    rng = rng if rng is not None else random.Random(0)
    branches = enumerate_branches(p)
    inputs = list(test)
    env: dict[str, int] = {}
    loc = p.init
    path: list[str] = []
    k = 0
    capped = False
    while True:
        e = p.step(loc, env)
        if e is None:
            break
        if len(path) >= step_cap:
            capped = True
            break
        path.append(e.id)
        cmd = e.cmd
        if cmd.input_var is not None:
            if k == len(inputs):
                inputs.append(rng.randint(-rand_range, rand_range))
            env[cmd.input_var] = inputs[k]
            k += 1
        elif cmd.updates:
            env.update({v: x.evaluate(env) for v, x in cmd.updates})
        loc = e.dst
    covered = {t for t in path if t in branches}
    return ReplayResult(path, covered, tuple(inputs), capped)


# ---------------------------------------------------------------- suites


def serialize_suite(suite: Iterable[Sequence[int]], p: Program | None = None,
                    step_cap: int = DEFAULT_STEP_CAP) -> str:
    rows = []
    for t in suite:
        row: dict = {"inputs": [int(v) for v in t]}
        if p is not None:
            row["covers"] = sorted(replay(p, t, step_cap).covered)
        rows.append(row)
    return json.dumps(rows, indent=1)


def load_suite(text: str) -> list[TestCase]:
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed suite file: {exc}") from None
    if not isinstance(rows, list):
        raise ValueError("malformed suite file: expected a JSON array")
    out = []
    for r in rows:
        vals = r.get("inputs") if isinstance(r, dict) else r
        if not isinstance(vals, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
            raise ValueError(f"malformed suite entry: {r!r}")
        out.append(tuple(vals))
    return out


# ---------------------------------------------------------------- reports


@dataclass
class IterationRecord:
    iteration: int
    concolic_fuel: int = 0
    mc_fuel: int = 0
    new_covered: list[str] = field(default_factory=list)
    new_unreachable: list[str] = field(default_factory=list)
    predicates_added: int = 0
    predicates: int = 0
    arg_size: int = 0
    monitor_states: int = 0
    lifted_goals: int = 0
    tests: int = 0
    fuel_spent: int = 0


@dataclass
class RunReport:
    branches: list[str]
    covered: list[str]
    unreachable: list[str]
    iterations: list[IterationRecord]
    suite: list[TestCase]
    exit_code: int
    fuel_spent: int
    baseline: bool = False
    reachable: int | None = None   # denominator used by the baseline
    # (ARG, monitor) per model-checking call; kept in memory only
    artifacts: list = field(default_factory=list, repr=False)

    @property
    def denominator(self) -> int:
        if self.reachable is not None:
            return self.reachable
        return len(self.branches) - len(self.unreachable)

    @property
    def ratio(self) -> float:
        r = self.denominator
        return 1.0 if r == 0 else len(self.covered) / r

    @property
    def ratio_text(self) -> str:
        return f"{len(self.covered)}/{self.denominator} ({100 * self.ratio:.1f}%)"

    def to_dict(self) -> dict:
        return {
            "branches": self.branches,
            "covered": self.covered,
            "unreachable": self.unreachable,
            "ratio": round(self.ratio, 6),
            "iterations": [asdict(it) for it in self.iterations],
            "coverage": self.ratio_text,
            "exit_code": self.exit_code,
            "fuel_spent": self.fuel_spent,
            "tests": [list(t) for t in self.suite],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def coverage_report(p: Program, suite: Iterable[Sequence[int]], unreachable: Iterable[str] = (),
                    step_cap: int = DEFAULT_STEP_CAP, baseline: bool = False) -> RunReport:
    """Coverage of ``suite`` by replay alone."""
    covered: set[str] = set()
    suite = [tuple(t) for t in suite]
    for t in suite:
        covered |= replay(p, t, step_cap).covered
    br = enumerate_branches(p)
    return RunReport(sorted(br), sorted(covered), sorted(set(unreachable)), [], suite, EXIT_DONE, 0,
                     baseline, len(graph_reachable_branches(p)) if baseline else None)


# ---------------------------------------------------------------- the loop


def iteration_seed(seed: int, i: int) -> int:
    return seed + 1_000_003 * i


@dataclass
class _State:
    goals: set[str]
    covered: set[str] = field(default_factory=set)
    unreachable: set[str] = field(default_factory=set)
    suite: dict = field(default_factory=dict)
    spent: int = 0

    def add_tests(self, p: Program, tests: Iterable[TestCase], step_cap: int) -> set[str]:
        new: set[str] = set()
        for t in tests:
            r = replay(p, t, step_cap)
            self.suite.setdefault(r.inputs, None)
            new |= r.covered - self.covered
            self.covered |= r.covered
        self.goals -= self.covered
        return new


def crabs_run(p: Program, goals: Iterable[str] | None = None, cfg: BudgetConfig = BudgetConfig(),
              strat: Strategy = Strategy("cfg"), *, baseline: bool = False,
              dump_arg: Path | None = None, dump_monitor: Path | None = None) -> RunReport:
    """Alternate testing on the refined product with model checking on the original program."""
    branches = enumerate_branches(p)
    goals = set(branches if goals is None else goals)
    if not goals <= branches:
        raise ValueError(f"goals are not branches: {sorted(goals - branches)}")
    st = _State(set(goals))
    iters: list[IterationRecord] = []
    cap = strat.step_cap

    if baseline:
        res = concolic_test(p, goals, cfg.total, strat)
        st.spent = res.fuel_spent
        new = st.add_tests(p, res.suite, cap)
        iters.append(IterationRecord(0, concolic_fuel=res.fuel_spent, new_covered=sorted(new),
                                     tests=len(res.suite), fuel_spent=st.spent))
        if not st.goals:
            code = EXIT_DONE
        elif res.fuel_spent >= cfg.total:
            code = EXIT_BUDGET
        else:
            code = EXIT_STALL
        return RunReport(sorted(branches), sorted(st.covered), [], iters, list(st.suite), code,
                         st.spent, True, len(graph_reachable_branches(p)))

    preds = frozenset()
    artifacts: list = []
    view = ProductView(p)
    code = EXIT_BUDGET
    i = 0
    while st.goals and st.spent < cfg.total:
        rec = IterationRecord(i)
        left = cfg.total - st.spent
        if cfg.concolic > 0:
            s_i = replace(strat, seed=iteration_seed(strat.seed, i))
            res = concolic_test(view, st.goals, min(cfg.concolic, left), s_i)
            rec.concolic_fuel = res.fuel_spent
            st.spent += res.fuel_spent
            rec.new_covered += sorted(st.add_tests(p, res.suite, cap))
            rec.tests += len(res.suite)
        if st.goals and cfg.mc > 0 and st.spent < cfg.total:
            out = abstract_mc(p, preds, st.goals, min(cfg.mc, cfg.total - st.spent))
            rec.mc_fuel = out.fuel_spent
            st.spent += out.fuel_spent
            rec.new_covered += sorted(st.add_tests(p, out.suite, cap))
            rec.tests += len(out.suite)
            new_u = out.unreachable - st.covered - st.unreachable
            st.unreachable |= new_u
            st.goals -= new_u
            rec.new_unreachable = sorted(new_u)
            new_preds = out.predicates - {FALSE}
            rec.predicates_added = len(new_preds - preds)
            preds = new_preds
            rec.predicates = len(preds)
            rec.arg_size = len(out.arg.reach)
            mon = monitor_from_arg(out.arg)
            rec.monitor_states = len(mon.locs)
            view = view.extend(mon)
            artifacts.append((out.arg, mon))
            if dump_arg is not None:
                dump_arg.mkdir(parents=True, exist_ok=True)
                (dump_arg / f"arg_{i}.dot").write_text(out.arg.to_dot(f"arg_{i}"))
            if dump_monitor is not None:
                dump_monitor.mkdir(parents=True, exist_ok=True)
                (dump_monitor / f"monitor_{i}.dot").write_text(monitor_to_dot(mon, out.arg, f"monitor_{i}"))
            if st.goals:
                rec.lifted_goals = len(lift_goals(st.goals, view.materialize()))
        rec.new_covered = sorted(set(rec.new_covered))
        rec.predicates = len(preds)
        rec.fuel_spent = st.spent
        iters.append(rec)
        log.info("iteration %d: +%d covered, +%d unreachable, %d predicates, fuel %d",
                 i, len(rec.new_covered), len(rec.new_unreachable), rec.predicates, st.spent)
        i += 1
        if not st.goals:
            break
        if not (rec.new_covered or rec.new_unreachable or rec.predicates_added):
            code = EXIT_STALL
            break
    if not st.goals:
        code = EXIT_DONE
    return RunReport(sorted(branches), sorted(st.covered), sorted(st.unreachable), iters,
                     list(st.suite), code, st.spent, artifacts=artifacts)


# ---------------------------------------------------------------- ratio sweep


DEFAULT_RATIOS = (1.0, 0.8, 0.5, 0.2, 0.0)


@dataclass
class SweepRow:
    ratio: float
    covered: int
    denominator: int
    coverage: float
    fuel_spent: int
    all_covered: bool
    exit_code: int


def ratio_sweep(p: Program, ratios: Sequence[float] = DEFAULT_RATIOS, total: int = 200_000,
                per_iteration: int = 10_000, strat: Strategy = Strategy("cfg")) -> list[SweepRow]:
    """One run per testing/checking ratio; fuel spent is meaningful when all goals were settled."""
    rows = []
    for r in ratios:
        rep = crabs_run(p, None, BudgetConfig.split(total, r, per_iteration), strat)
        rows.append(SweepRow(r, len(rep.covered), rep.denominator, round(rep.ratio, 6),
                             rep.fuel_spent, rep.exit_code == EXIT_DONE, rep.exit_code))
    return rows

