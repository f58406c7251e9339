"""Monitors built from ARGs and the lazily explored product with a program."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .cegar import ARG, Node
from .ir import Loc, Program, ProgramError, Transition, loc_name

Cursor = tuple


class MonitorError(ProgramError):
    pass


def monitor_from_arg(arg: ARG) -> Program:
    """Program over the non-subsumed ARG states.

    Children that are themselves live give tree edges; subsumed children are
    redirected to the live end of their subsume chain. Edges keep the original
    transition id as label.
    """
    live = arg.live()
    live_set = set(live)
    edges: list[Transition] = []
    count: dict[Node, int] = {}
    for c in arg.reach:
        par = c.parent
        if par is None or par not in live_set:
            continue
        dst = c if c in live_set else arg.covering(c)
        k = count.get(par, 0)
        count[par] = k + 1
        t = c.trans
        edges.append(Transition(f"{par}#{k}", par, t.cmd, dst, t.label))
    m = Program(arg.program.vars, tuple(live), arg.root, tuple(edges))
    check_deterministic(m)
    return m


def check_deterministic(m: Program) -> None:
    for l in m.locs:
        labels = [e.label for e in m.out_edges(l)]
        if len(labels) != len(set(labels)):
            raise MonitorError(f"monitor state {loc_name(l)} has two edges with the same label")


def monitor_to_dot(m: Program, arg: ARG | None = None, name: str = "monitor") -> str:
    """DOT dump; redirected (subsumption) edges are dashed."""
    tree = set()
    if arg is not None:
        tree = {(c.parent, c.trans.label) for c in arg.reach
                if c.parent is not None and c not in arg.subsume}
    lines = [f'digraph "{name}" {{']
    for l in m.locs:
        shape = "doublecircle" if l == m.init else "circle"
        text = f"{l}  {loc_name(l.loc)}: {l.label()}" if isinstance(l, Node) else loc_name(l)
        lines.append(f'  "{loc_name(l)}" [shape={shape}, label="{text}"];')
    for e in m.edges:
        dashed = arg is not None and (e.src, e.label) not in tree
        style = ", style=dashed" if dashed else ""
        lines.append(f'  "{loc_name(e.src)}" -> "{loc_name(e.dst)}" [label="{e.label}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


class ProductView:
    """``P x M1 x ... x Mk`` explored on demand.

    Cursors are tuples ``(progLoc, m1, ..., mk)``. Edge ids follow the same
    scheme as the explicit product so both views agree.
    """

    def __init__(self, program: Program, monitors: Sequence[Program] = ()):
        self.program = program
        self.monitors = tuple(monitors)
        self.vars = program.vars
        self.init: Cursor = (program.init,) + tuple(m.init for m in self.monitors)
        self._out: dict[Cursor, tuple[Transition, ...]] = {}

    def extend(self, monitor: Program) -> "ProductView":
        return ProductView(self.program, self.monitors + (monitor,))

    def out_edges(self, c: Cursor) -> tuple[Transition, ...]:
        got = self._out.get(c)
        if got is not None:
            return got
        out = []
        for e in self.program.out_edges(c[0]):
            nxt = self._advance(c, e)
            if nxt is None:
                continue
            out.append(Transition(f"{loc_name(c)}#{len(out)}", c, e.cmd, nxt, e.label))
        got = self._out[c] = tuple(out)
        return got

    def _advance(self, c: Cursor, e: Transition) -> Cursor | None:
        dst = [e.dst]
        for m, l in zip(self.monitors, c[1:]):
            me = next((t for t in m.out_edges(l) if t.label == e.label), None)
            if me is None:
                return None
            dst.append(me.dst)
        return tuple(dst)

    def step(self, c: Cursor, label: str) -> Cursor | None:
        e = next((t for t in self.program.out_edges(c[0]) if t.label == label), None)
        if e is None:
            raise ValueError(f"no program transition {label!r} at {loc_name(c[0])}")
        return self._advance(c, e)

    def materialize(self) -> Program:
        seen = {self.init}
        locs = [self.init]
        edges: list[Transition] = []
        todo = deque([self.init])
        while todo:
            c = todo.popleft()
            for e in self.out_edges(c):
                edges.append(e)
                if e.dst not in seen:
                    seen.add(e.dst)
                    locs.append(e.dst)
                    todo.append(e.dst)
        return Program(self.vars, tuple(locs), self.init, tuple(edges))


def step_product(view: ProductView, c: Cursor, label: str) -> Cursor | None:
    """Advance every component on ``label``; ``None`` when a monitor blocks it."""
    return view.step(c, label)


@dataclass
class LiftedGoals:
    projection: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.projection)

    def __iter__(self):
        return iter(self.projection)

    def originals(self) -> set[str]:
        return set(self.projection.values())

    def drop_projection(self, label: str) -> None:
        """Remove every lifted goal projecting onto ``label``."""
        self.projection = {k: v for k, v in self.projection.items() if v != label}


def lift_goals(goals: Iterable[str], prod: Program) -> LiftedGoals:
    goals = set(goals)
    return LiftedGoals({e.id: e.label for e in prod.edges if e.label in goals})
