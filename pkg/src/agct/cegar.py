"""Coverage-driven predicate abstraction with a closed abstract reachability graph."""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .expr import FALSE, Atom
from .ir import Loc, Program, Transition, loc_name
from .logic import (Fuel, Solver, command_formula, input_sym, path_constraints,
                    primed, wp_atom)

TestCase = tuple[int, ...]


def predicate_closure(atoms: Iterable[Atom]) -> frozenset[Atom]:
    """Non-constant atoms together with their negations."""
    out: set[Atom] = set()
    for a in atoms:
        if not a.is_constant:
            out.add(a)
            out.add(a.negate())
    return frozenset(out)


@dataclass(eq=False)
class Node:
    """Abstract state ``(loc, preds)``; identity matters, two nodes may carry equal values."""

    id: int
    loc: Loc
    preds: frozenset[Atom]
    parent: "Node | None" = None
    trans: Transition | None = None
    dead: bool = False

    def path(self) -> list[Transition]:
        out = []
        n = self
        while n.parent is not None:
            out.append(n.trans)
            n = n.parent
        return out[::-1]

    def ancestors(self):
        """Self, parent, grandparent, ... up to the root."""
        n = self
        while n is not None:
            yield n
            n = n.parent

    def label(self) -> str:
        if self.dead:
            return "false"
        return "{" + ", ".join(sorted(str(p) for p in self.preds)) + "}"

    def __str__(self) -> str:
        return f"s{self.id}"

    def __repr__(self) -> str:
        return f"Node(s{self.id}, {loc_name(self.loc)}: {self.label()})"

    def __lt__(self, other: "Node") -> bool:
        return self.id < other.id


@dataclass
class ARG:
    program: Program
    root: Node
    reach: list[Node] = field(default_factory=list)
    subsume: dict[Node, Node] = field(default_factory=dict)

    @property
    def sub(self) -> set[Node]:
        return set(self.subsume)

    def live(self) -> list[Node]:
        return [n for n in self.reach if n not in self.subsume]

    def covering(self, n: Node) -> Node:
        """The non-subsumed end of ``n``'s subsume chain."""
        seen = set()
        while n in self.subsume:
            if n in seen:
                raise RuntimeError("subsume cycle")
            seen.add(n)
            n = self.subsume[n]
        return n

    def subsume_star(self, n: Node) -> list[Node]:
        out = [n]
        while n in self.subsume:
            n = self.subsume[n]
            out.append(n)
        return out

    def children(self) -> dict[Node, list[Node]]:
        kids: dict[Node, list[Node]] = {n: [] for n in self.reach}
        for n in self.reach:
            if n.parent is not None:
                kids[n.parent].append(n)
        return kids

    def to_dot(self, name: str = "arg") -> str:
        lines = [f'digraph "{name}" {{']
        for n in self.reach:
            style = ", style=dotted" if n in self.subsume else ""
            lines.append(f'  "{n}" [label="{n}  {loc_name(n.loc)}: {n.label()}"{style}];')
        for n in self.reach:
            if n.parent is not None:
                lines.append(f'  "{n.parent}" -> "{n}" [label="{n.trans.id}"];')
        for a, b in self.subsume.items():
            lines.append(f'  "{a}" -> "{b}" [style=dashed];')
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass
class McOutcome:
    suite: list[TestCase]
    remaining: set[str]
    unreachable: set[str]
    predicates: frozenset[Atom]
    arg: ARG
    refinements: int = 0
    fuel_spent: int = 0
    covered: set[str] = field(default_factory=set)


# ---------------------------------------------------------------- abstract post


def abstract_post(A: frozenset[Atom], t: Transition, preds: Iterable[Atom],
                  variables: Sequence[str], solver: Solver) -> frozenset[Atom] | None:
    """Predicates of ``preds`` entailed after ``t`` from ``gamma(A)``; ``None`` if the step is infeasible."""
    phi = list(A) + command_formula(t.cmd, variables)
    if solver.check_sat(phi).unsat:
        return None
    touched = t.cmd.assigned
    out = set()
    for p in preds:
        if p.is_constant:
            continue
        if p in A and not (p.symbols() & touched):
            out.add(p)          # carried by the frame
            continue
        goal = p.rename(primed)
        if solver.check_sat(phi + [goal.negate()]).unsat:
            out.add(p)
    return frozenset(out)


# ---------------------------------------------------------------- refinement


def _guard_wp(path: Sequence[Transition]) -> list[Atom]:
    a = path[-1].guard
    out = [a]
    for t in reversed(path[:-1]):
        a = wp_atom(a, t)
        out.append(a)
    return out


def _suffix_wp(path: Sequence[Transition]) -> list[Atom]:
    conj: list[Atom] = []
    out: list[Atom] = []
    for t in reversed(path):
        conj = [wp_atom(a, t) for a in conj]
        conj.append(t.guard)
        conj = [a for a in dict.fromkeys(conj) if not a.is_true]
        out.extend(conj)
    return out


def refine(path: Sequence[Transition], known: Iterable[Atom] = (), full: bool = True) -> frozenset[Atom]:
    """Predicates harvested from weakest preconditions along a spurious path.

    The goal guard is first pulled back through the updates alone. Only when
    that adds nothing beyond ``known`` are the full suffix preconditions used,
    guards included. The result excludes ``known``; empty means no progress.
    ``full=False`` skips the second stage.
    """
    known = frozenset(known)
    new = predicate_closure(_guard_wp(path)) - known
    if new or not full:
        return new
    return predicate_closure(_suffix_wp(path)) - known


# ---------------------------------------------------------------- model checking


class _Restart(Exception):
    pass


class AbstractMC:
    def __init__(self, p: Program, preds: Iterable[Atom], goals: Iterable[str],
                 fuel: Fuel, solver: Solver | None = None):
        self.p = p
        self.preds = predicate_closure(preds)
        self.goals = set(goals)
        self.fuel = fuel
        self.solver = solver if solver is not None else Solver(fuel)
        self.solver.fuel = fuel
        self.suite: dict[TestCase, None] = {}
        self.covered: set[str] = set()
        self.refinements = 0

    def run(self) -> McOutcome:
        start = self.fuel.spent
        while True:
            try:
                arg = self._explore()
                break
            except _Restart:
                continue
        seen = {n.trans.label for n in arg.reach if n.trans is not None}
        unreachable = {g for g in self.goals if g not in seen}
        return McOutcome(list(self.suite), self.goals - unreachable, unreachable,
                         self.preds | {FALSE}, arg, self.refinements,
                         self.fuel.spent - start, self.covered)

    def _explore(self) -> ARG:
        p, V = self.p, self.p.vars
        ids = itertools.count()
        root = Node(-1, p.init, frozenset())
        arg = ARG(p, root)
        worklist = deque([root])
        cache: dict[tuple, frozenset | None] = {}
        while worklist:
            n = worklist.popleft()
            if n.dead or any(a in arg.subsume for a in n.ancestors()):
                continue
            n.id = next(ids)
            arg.reach.append(n)
            if self._try_subsume(arg, n, worklist):
                continue
            for t in p.out_edges(n.loc):
                key = (n.preds, t.id)
                if key not in cache:
                    cache[key] = abstract_post(n.preds, t, self.preds, V, self.solver)
                post = cache[key]
                child = Node(-1, t.dst, post if post is not None else frozenset([FALSE]),
                             n, t, dead=post is None)
                worklist.append(child)
                if t.label in self.goals:
                    self._goal_hit(child)
        return arg

    def _try_subsume(self, arg: ARG, n: Node, worklist: deque) -> bool:
        live = [m for m in arg.reach if m is not n and m.loc == n.loc and m not in arg.subsume]
        # n is covered by any state with fewer (weaker) predicates
        for m in live:
            if m.preds <= n.preds:
                arg.subsume[n] = m
                return True
        anc = set(n.ancestors())
        for m in live:
            if n.preds < m.preds and m not in anc:
                arg.subsume[m] = n
                self._release(arg, m, worklist)
        return False

    @staticmethod
    def _release(arg: ARG, m: Node, worklist: deque) -> None:
        # m's subtree is abandoned; states it covered go back on the worklist
        gone = {x for x in arg.reach if x is not m and m in x.ancestors()}
        arg.reach = [x for x in arg.reach if x not in gone]
        for z, d in list(arg.subsume.items()):
            if z in gone:
                del arg.subsume[z]
            elif d in gone:
                del arg.subsume[z]
                arg.reach.remove(z)
                worklist.append(z)

    def _goal_hit(self, child: Node) -> None:
        path = child.path()
        atoms = [a for step in path_constraints(path, self.p.vars) for a in step]
        res = self.solver.check_sat(atoms)
        if res.sat:
            n_inputs = sum(1 for t in path if t.cmd.input_var is not None)
            tst = tuple(res.model.get(input_sym(k), 0) for k in range(n_inputs))
            self.suite[tst] = None
            self.goals.discard(child.trans.label)
            self.covered.add(child.trans.label)
        elif res.unsat and not self.fuel.exhausted:
            self.fuel.spend(1)
            # a dead child is already excluded by the abstraction
            new = refine(path, self.preds, full=not child.dead)
            if new:
                self.preds = self.preds | new
                self.refinements += 1
                raise _Restart


def abstract_mc(p: Program, preds: Iterable[Atom], goals: Iterable[str],
                fuel: int | float | Fuel, solver: Solver | None = None) -> McOutcome:
    if not isinstance(fuel, Fuel):
        fuel = Fuel(fuel)
    return AbstractMC(p, preds, goals, fuel, solver).run()


def arg_paths_contains(arg: ARG, path: Sequence[Transition]) -> bool:
    """Whether ``path`` is a path of the ARG, following subsumption at each step."""
    kids = arg.children()
    frontier = {arg.root} if arg.root in kids else set()
    if not frontier:
        return False
    for e in path:
        nxt = set()
        for s in frontier:
            for s2 in arg.subsume_star(s):
                nxt.update(c for c in kids.get(s2, ()) if c.trans.id == e.id)
        if not nxt:
            return False
        frontier = nxt
    return True
