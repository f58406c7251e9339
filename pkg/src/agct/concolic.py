"""Concolic exploration with pluggable branch-selection strategies."""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .expr import Atom, LinExpr, _canon
from .ir import Loc, Program, Transition
from .logic import Fuel, Solver, input_sym, input_ordinal, is_input_sym

TestCase = tuple[int, ...]

STRATEGIES = ("dfs", "rnd-branch", "unf-rnd", "cfg")
DEFAULT_STEP_CAP = 10_000
DEFAULT_RAND_RANGE = 1000


class ProgramView(Protocol):
    """What the engine needs from a program or an on-the-fly product."""

    vars: tuple[str, ...]
    init: Loc

    def out_edges(self, loc: Loc) -> Sequence[Transition]: ...


@dataclass(frozen=True)
class Strategy:
    kind: str = "dfs"
    seed: int = 0
    rand_range: int = DEFAULT_RAND_RANGE
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {', '.join(STRATEGIES)}")

    def rng(self) -> random.Random:
        return random.Random(self.seed)


# ---------------------------------------------------------------- symbolic memory


def _inputs_in(e: LinExpr) -> int:
    return sum(1 for s in e.symbols() if is_input_sym(s))


def update_sym_mem(sym: Mapping[str, LinExpr], exp: LinExpr,
                   env: Mapping[str, int]) -> tuple[LinExpr, bool]:
    """Symbolic value of ``exp`` under ``sym``; returns ``(expr, concretized)``.

    A product of two symbolic operands is linearized by replacing the operand
    that mentions fewer input symbols (the right one on ties) with its
    concrete value.
    """
    out = LinExpr(exp.const)
    for v, c in exp.terms:
        out = out + sym[v].scale(c)
    concretized = False
    if exp.prod is not None:
        a, b, c = exp.prod
        sa, sb = sym[a], sym[b]
        if not (sa.is_constant or sb.is_constant):
            concretized = True
            if _inputs_in(sa) < _inputs_in(sb):
                sa = LinExpr(env[a])
            else:
                sb = LinExpr(env[b])
        out = out + sa.times(sb).scale(c)
    return out, concretized


# ---------------------------------------------------------------- distances


def compute_cfg_distances(p: Program, goals: Iterable[str]) -> dict[Loc, float]:
    """Edge distance from every location to the source of the nearest goal edge.

    Goal edges are matched by label, so the same call works on products.
    """
    goals = set(goals)
    dist: dict[Loc, float] = {l: math.inf for l in p.locs}
    preds: dict[Loc, list[Loc]] = {l: [] for l in p.locs}
    todo: deque = deque()
    for e in p.edges:
        preds[e.dst].append(e.src)
        if e.label in goals and dist[e.src] != 0:
            dist[e.src] = 0
            todo.append(e.src)
    while todo:
        l = todo.popleft()
        for q in preds[l]:
            if dist[q] == math.inf:
                dist[q] = dist[l] + 1
                todo.append(q)
    return dist


# ---------------------------------------------------------------- engine


@dataclass
class PathEntry:
    atom: Atom            # guard with symbolic memory substituted
    taken: Transition
    alt: Transition | None  # the other outgoing edge, if the location branches
    inputs_before: int
    node: dict            # execution-tree node before this step


@dataclass
class ConcolicResult:
    suite: list[TestCase]
    covered: set[str]
    remaining: set[str]
    runs: int = 0
    concretizations: int = 0
    fuel_spent: int = 0


def _flippable(pe: PathEntry) -> bool:
    return pe.alt is not None and not pe.atom.is_constant and pe.alt.label not in pe.node


def order_candidates(path: Sequence[PathEntry], strat: Strategy, rng: random.Random,
                     dist: Mapping[Loc, float] | None = None,
                     goals: Iterable[str] = ()) -> list[int]:
    """Indices of unexplored flippable entries in the order the strategy tries them."""
    cands = [i for i, pe in enumerate(path) if _flippable(pe)]
    if strat.kind == "dfs":
        return cands[::-1]
    if strat.kind == "rnd-branch":
        rng.shuffle(cands)
        return cands
    if strat.kind == "unf-rnd":
        # weighted sampling without replacement, weight 1/(position+1)
        keys = [(rng.random() ** (i + 1), i) for i in cands]
        return [i for _, i in sorted(keys, reverse=True)]
    goals = set(goals)

    def score(i: int) -> float:
        alt = path[i].alt
        if alt.label in goals:
            return 0
        return 1 + (dist or {}).get(alt.dst, math.inf)

    return sorted(cands, key=lambda i: (score(i), -i))


class ConcolicEngine:
    def __init__(self, view: ProgramView, strat: Strategy, fuel: Fuel | None = None,
                 solver: Solver | None = None, graph: Program | None = None):
        self.view = view
        self.strat = strat
        self.fuel = fuel if fuel is not None else Fuel()
        self.solver = solver if solver is not None else Solver(self.fuel)
        self.solver.fuel = self.fuel
        self.rng = strat.rng()
        self.tree: dict = {}
        self._graph = graph
        self._dist: dict | None = None
        self._dist_goals: frozenset | None = None

    def rand_val(self) -> int:
        r = self.strat.rand_range
        return self.rng.randint(-r, r)

    def distances(self, goals: set[str]) -> dict:
        key = frozenset(goals)
        if self._dist is None or key != self._dist_goals:
            if self._graph is None:
                g = self.view
                self._graph = g if isinstance(g, Program) else g.materialize()
            self._dist = compute_cfg_distances(self._graph, goals)
            self._dist_goals = key
        return self._dist

    def execute(self, tst: list[int], goals: set[str], covered: set[str]) -> tuple[list[PathEntry], int]:
        """Run once from the initial location, extending ``tst`` with random inputs as needed."""
        view = self.view
        loc = view.init
        env: dict[str, int] = {}
        sym: dict[str, LinExpr] = {}
        k = 0
        path: list[PathEntry] = []
        node = self.tree
        events = 0
        while goals and not self.fuel.exhausted and len(path) < self.strat.step_cap:
            outs = view.out_edges(loc)
            e = next((t for t in outs if t.guard.holds(env)), None)
            if e is None:
                break
            self.fuel.spend(1)
            g = e.guard
            if g.is_constant:
                satom = g
            else:
                sexpr, conc = update_sym_mem(sym, g.expr, env)
                events += conc
                satom = _canon(sexpr, g.rel)
            alt = next((t for t in outs if t is not e), None)
            path.append(PathEntry(satom, e, alt, k, node))
            node = node.setdefault(e.label, {})
            goals.discard(e.label)
            covered.add(e.label)
            cmd = e.cmd
            if cmd.input_var is not None:
                if len(tst) == k:
                    tst.append(self.rand_val())
                env[cmd.input_var] = tst[k]
                sym[cmd.input_var] = LinExpr.var(input_sym(k))
                k += 1
            elif cmd.updates:
                new_vals = {v: x.evaluate(env) for v, x in cmd.updates}
                new_syms = {}
                for v, x in cmd.updates:
                    new_syms[v], conc = update_sym_mem(sym, x, env)
                    events += conc
                env.update(new_vals)
                sym.update(new_syms)
            loc = e.dst
        return path, events

    def pick_backtrack(self, path: Sequence[PathEntry], goals: set[str]) -> tuple[int, dict] | None:
        """First candidate (in strategy order) whose negation is satisfiable, with its model."""
        dist = self.distances(goals) if self.strat.kind == "cfg" else None
        for i in order_candidates(path, self.strat, self.rng, dist, goals):
            if self.fuel.exhausted:
                return None
            pe = path[i]
            pe.node.setdefault(pe.alt.label, {})
            phi = [q.atom for q in path[:i] if not q.atom.is_constant]
            phi.append(pe.atom.negate())
            res = self.solver.check_sat(phi)
            if res.sat:
                return i, res.model
        return None

    def run(self, goals: Iterable[str]) -> ConcolicResult:
        goals = set(goals)
        start = self.fuel.spent
        covered: set[str] = set()
        suite: dict[TestCase, None] = {}
        tst: list[int] = []
        runs = events = 0
        while goals and not self.fuel.exhausted:
            path, ev = self.execute(tst, goals, covered)
            runs += 1
            events += ev
            suite[tuple(tst)] = None
            if not goals or self.fuel.exhausted:
                break
            picked = self.pick_backtrack(path, goals)
            if picked is None:
                break
            i, model = picked
            n = path[i].inputs_before
            tst = [model.get(input_sym(j), tst[j]) for j in range(n)]
        return ConcolicResult(list(suite), covered, goals, runs, events, self.fuel.spent - start)


def concolic_test(p: ProgramView, goals: Iterable[str], fuel: int | float | Fuel,
                  strat: Strategy | None = None) -> ConcolicResult:
    """Explore ``p`` until the goal labels are covered, fuel runs out, or no flip remains."""
    if not isinstance(fuel, Fuel):
        fuel = Fuel(fuel)
    return ConcolicEngine(p, strat or Strategy(), fuel).run(goals)


def model_inputs(model: Mapping[str, int]) -> TestCase:
    """Input values ``r#0, r#1, ...`` of a model in ordinal order."""
    ks = sorted(input_ordinal(s) for s in model if is_input_sym(s))
    if not ks:
        return ()
    return tuple(model.get(input_sym(j), 0) for j in range(ks[-1] + 1))
