"""Program model: guarded-command control-flow graphs and the ``.imp`` frontend."""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .expr import FALSE, TRUE, Atom, LinExpr, NonlinearError, atom

Loc = Hashable

RESERVED = re.compile(r"^r(_?\d+)?$")
KEYWORDS = {"var", "if", "else", "while", "input", "true", "false"}


class ProgramError(ValueError):
    """Invalid program structure or frontend input."""


class ParseError(ProgramError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Command:
    """A guarded command: ``guard`` plus either simultaneous updates, an input, or nothing."""

    guard: Atom = TRUE
    updates: tuple[tuple[str, LinExpr], ...] = ()
    input_var: str | None = None

    @property
    def kind(self) -> str:
        if self.input_var is not None:
            return "input"
        return "assign" if self.updates else "assume"

    @property
    def assigned(self) -> set[str]:
        if self.input_var is not None:
            return {self.input_var}
        return {v for v, _ in self.updates}

    def __str__(self) -> str:
        if self.input_var is not None:
            body = f"{self.input_var} := input()"
        elif self.updates:
            body = "; ".join(f"{v} := {e}" for v, e in self.updates)
        else:
            body = "skip"
        return body if self.guard.is_true else f"[{self.guard}] {body}"


@dataclass(frozen=True)
class Transition:
    id: str
    src: Loc
    cmd: Command
    dst: Loc
    # Original transition id; differs from ``id`` only in products and monitors.
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", self.id)

    @property
    def guard(self) -> Atom:
        return self.cmd.guard


def loc_name(loc: Loc) -> str:
    if isinstance(loc, tuple):
        return "(" + ",".join(loc_name(x) for x in loc) + ")"
    return str(loc)


@dataclass(frozen=True)
class Program:
    vars: tuple[str, ...]
    locs: tuple[Loc, ...]
    init: Loc
    edges: tuple[Transition, ...]
    _out: dict = field(default=None, init=False, repr=False, compare=False, hash=False)
    _by_id: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        out: dict[Loc, list[Transition]] = {l: [] for l in self.locs}
        by_id: dict[str, Transition] = {}
        if self.init not in out:
            raise ProgramError("initial location not in program")
        for e in self.edges:
            if e.src not in out or e.dst not in out:
                raise ProgramError(f"edge {e.id} references unknown location")
            if e.id in by_id:
                raise ProgramError(f"duplicate transition id {e.id}")
            out[e.src].append(e)
            by_id[e.id] = e
        for l, es in out.items():
            if len(es) > 2:
                raise ProgramError(f"location {loc_name(l)} has {len(es)} outgoing transitions")
            if len(es) == 2 and es[0].guard.negate() != es[1].guard:
                raise ProgramError(f"guards at {loc_name(l)} are not complementary")
        object.__setattr__(self, "_out", {l: tuple(es) for l, es in out.items()})
        object.__setattr__(self, "_by_id", by_id)

    def out_edges(self, loc: Loc) -> tuple[Transition, ...]:
        return self._out[loc]

    def edge(self, tid: str) -> Transition:
        return self._by_id[tid]

    def step(self, loc: Loc, env: dict[str, int]) -> Transition | None:
        """The unique enabled transition at ``loc`` under ``env``, if any."""
        for e in self._out[loc]:
            if e.guard.holds(env):
                return e
        return None


# ---------------------------------------------------------------- analyses


def enumerate_branches(p: Program) -> frozenset[str]:
    return frozenset(e.id for e in p.edges if len(p.out_edges(e.src)) == 2)


def reachable_locs(p: Program) -> set[Loc]:
    seen = {p.init}
    todo = deque([p.init])
    while todo:
        l = todo.popleft()
        for e in p.out_edges(l):
            if e.dst not in seen:
                seen.add(e.dst)
                todo.append(e.dst)
    return seen


def graph_reachable_branches(p: Program) -> frozenset[str]:
    live = reachable_locs(p)
    return frozenset(b for b in enumerate_branches(p) if p.edge(b).src in live)


def _flat(loc: Loc) -> tuple:
    return loc if isinstance(loc, tuple) else (loc,)


def product(p1: Program, p2: Program) -> Program:
    """Synchronous product matching transitions by their original label.

    Only location pairs reachable from the initial pair are materialized.
    """
    if tuple(p1.vars) != tuple(p2.vars):
        raise ProgramError("product of programs over different variables")
    init = _flat(p1.init) + _flat(p2.init)
    split = len(_flat(p1.init))

    def parts(loc):
        return (loc[0] if split == 1 else loc[:split],
                loc[split] if len(loc) - split == 1 else loc[split:])

    locs = [init]
    seen = {init}
    edges: list[Transition] = []
    todo = deque([init])
    while todo:
        l = todo.popleft()
        l1, l2 = parts(l)
        by_label = {e.label: e for e in p2.out_edges(l2)}
        k = 0
        for e1 in p1.out_edges(l1):
            e2 = by_label.get(e1.label)
            if e2 is None:
                continue
            dst = _flat(e1.dst) + _flat(e2.dst)
            edges.append(Transition(f"{loc_name(l)}#{k}", l, e1.cmd, dst, e1.label))
            k += 1
            if dst not in seen:
                seen.add(dst)
                locs.append(dst)
                todo.append(dst)
    return Program(p1.vars, tuple(locs), init, tuple(edges))


def to_dot(p: Program, name: str = "program") -> str:
    lines = [f'digraph "{name}" {{']
    for l in p.locs:
        shape = "doublecircle" if l == p.init else "circle"
        lines.append(f'  "{loc_name(l)}" [shape={shape}];')
    for e in p.edges:
        lab = f"{e.id}: {e.guard} / {_cmd_body(e.cmd)}".replace('"', '\\"')
        lines.append(f'  "{loc_name(e.src)}" -> "{loc_name(e.dst)}" [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _cmd_body(c: Command) -> str:
    return str(Command(TRUE, c.updates, c.input_var))


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Decl:
    name: str
    init: int | None = None


@dataclass(frozen=True)
class Assign:
    name: str
    expr: LinExpr


@dataclass(frozen=True)
class Input:
    name: str


@dataclass(frozen=True)
class If:
    cond: object
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class While:
    cond: object
    body: tuple


@dataclass(frozen=True)
class Cmp:
    atom: Atom
    text: str


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class Source:
    decls: tuple[Decl, ...]
    body: tuple


# ---------------------------------------------------------------- parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||==|!=|<=|>=|[-+*<>=!(){};])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, lstart = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - lstart + 1)
        text = m.group()
        if m.lastgroup != "ws":
            kind = m.lastgroup
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, text, line, pos - lstart + 1))
        nl = text.count("\n")
        if nl:
            line += nl
            lstart = pos + text.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - lstart + 1))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0
        self.declared: list[str] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")

    def ident(self) -> str:
        tok = self.tok
        if tok.kind != "ident":
            self.error(f"expected identifier, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok.text

    def program(self) -> Source:
        decls = []
        while self.tok.text == "var" and self.tok.kind == "kw":
            decls.append(self.decl())
        body = []
        while self.tok.kind != "eof":
            body.append(self.stmt())
        return Source(tuple(decls), tuple(body))

    def decl(self) -> Decl:
        self.expect("var")
        tok = self.tok
        name = self.ident()
        if RESERVED.match(name):
            self.error(f"{name!r} is reserved for input symbols", tok)
        if name in self.declared:
            self.error(f"variable {name!r} declared twice", tok)
        self.declared.append(name)
        init = None
        if self.accept("="):
            neg = self.accept("-")
            if self.tok.kind == "int":
                init = int(self.tok.text) * (-1 if neg else 1)
                self.i += 1
            elif self.accept("true"):
                init = 1
            elif self.accept("false"):
                init = 0
            else:
                self.error("declaration initializer must be an integer literal")
        self.expect(";")
        return Decl(name, init)

    def var_ref(self) -> str:
        tok = self.tok
        name = self.ident()
        if name not in self.declared:
            self.error(f"undeclared variable {name!r}", tok)
        return name

    def block(self) -> tuple:
        self.expect("{")
        out = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            out.append(self.stmt())
        return tuple(out)

    def stmt(self):
        if self.tok.kind == "kw" and self.tok.text == "var":
            self.error("declarations must precede statements")
        if self.accept("if"):
            self.expect("(")
            c = self.cond()
            self.expect(")")
            then = self.block()
            orelse: tuple = ()
            if self.accept("else"):
                if self.tok.text == "if" and self.tok.kind == "kw":
                    orelse = (self.stmt(),)
                else:
                    orelse = self.block()
            return If(c, then, orelse)
        if self.accept("while"):
            self.expect("(")
            c = self.cond()
            self.expect(")")
            return While(c, self.block())
        name = self.var_ref()
        self.expect("=")
        if self.accept("input"):
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return Input(name)
        e = self.expr()
        self.expect(";")
        return Assign(name, e)

    # expressions
    def expr(self) -> LinExpr:
        start = self.tok
        try:
            out = self.term()
            while self.tok.text in ("+", "-") and self.tok.kind == "op":
                op = self.tok.text
                self.i += 1
                rhs = self.term()
                out = out + rhs if op == "+" else out - rhs
            return out
        except NonlinearError:
            self.error("more than one nonlinear factor in expression", start)

    def term(self) -> LinExpr:
        out = self.factor()
        while self.accept("*"):
            out = out.times(self.factor())
        return out

    def factor(self) -> LinExpr:
        if self.accept("-"):
            return -self.factor()
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return LinExpr(int(tok.text))
        if self.accept("true"):
            return LinExpr(1)
        if self.accept("false"):
            return LinExpr(0)
        return LinExpr.var(self.var_ref())

    # conditions
    def cond(self):
        out = self.conj()
        while self.accept("||"):
            out = Or(out, self.conj())
        return out

    def conj(self):
        out = self.neg()
        while self.accept("&&"):
            out = And(out, self.neg())
        return out

    def neg(self):
        if self.accept("!"):
            return Not(self.neg())
        if self.tok.text == "(":
            save = self.i
            self.i += 1
            try:
                inner = self.cond()
                self.expect(")")
                if self.tok.text not in _RELOPS + ("+", "-", "*"):
                    return inner
            except ParseError:
                pass
            self.i = save
        return self.comparison()

    def comparison(self):
        start = self.i
        lhs = self.expr()
        if self.tok.text in _RELOPS:
            op = self.tok.text
            self.i += 1
            rhs = self.expr()
        else:
            op, rhs = "!=", LinExpr(0)
        text = " ".join(t.text for t in self.toks[start:self.i])
        return Cmp(atom(lhs, op, rhs), text)


_RELOPS = ("<", "<=", "==", "!=", ">", ">=")


def parse_source(src: str) -> Source:
    p = _Parser(src)
    ast = p.program()
    _check_definite_assignment(ast)
    return ast


def _cond_reads(c) -> set[str]:
    if isinstance(c, Cmp):
        return c.atom.symbols()
    if isinstance(c, Not):
        return _cond_reads(c.arg)
    return _cond_reads(c.left) | _cond_reads(c.right)


def _check_definite_assignment(ast: Source) -> None:
    def need(names: set[str], defined: set[str], what: str):
        missing = sorted(names - defined)
        if missing:
            raise ProgramError(f"variable {missing[0]!r} may be read before initialization ({what})")

    def block(stmts, defined: set[str]) -> set[str]:
        for s in stmts:
            defined = stmt(s, defined)
        return defined

    def stmt(s, defined: set[str]) -> set[str]:
        if isinstance(s, Assign):
            need(s.expr.symbols(), defined, f"assignment to {s.name}")
            return defined | {s.name}
        if isinstance(s, Input):
            return defined | {s.name}
        if isinstance(s, If):
            need(_cond_reads(s.cond), defined, "if condition")
            return block(s.then, defined) & block(s.orelse, defined)
        need(_cond_reads(s.cond), defined, "while condition")
        block(s.body, defined)
        return defined

    block(ast.body, {d.name for d in ast.decls if d.init is not None})


# ---------------------------------------------------------------- lowering


class _Builder:
    def __init__(self):
        self.n = 0
        self.out: dict[int, list[tuple[Command, int]]] = {}

    def new(self) -> int:
        self.n += 1
        self.out[self.n] = []
        return self.n

    def edge(self, src: int, cmd: Command, dst: int):
        self.out[src].append((cmd, dst))

    def block(self, stmts: Sequence, entry: int, target: int | None = None) -> int:
        if not stmts:
            assert target is None
            return entry
        for s in stmts[:-1]:
            entry = self.stmt(s, entry)
        return self.stmt(stmts[-1], entry, target)

    def stmt(self, s, entry: int, target: int | None = None) -> int:
        if isinstance(s, (Assign, Input)):
            dst = target if target is not None else self.new()
            if isinstance(s, Assign):
                self.edge(entry, Command(TRUE, ((s.name, s.expr),)), dst)
            else:
                self.edge(entry, Command(TRUE, (), s.name), dst)
            return dst
        if isinstance(s, If):
            join = target
            then_entry = else_entry = None
            if s.then:
                then_entry = self.new()
                join = self.block(s.then, then_entry, join)
            if s.orelse:
                else_entry = self.new()
                join = self.block(s.orelse, else_entry, join)
            if join is None:
                join = self.new()
            self.cond(s.cond, entry, then_entry or join, else_entry or join)
            return join
        assert isinstance(s, While)
        body_entry = entry
        if s.body:
            body_entry = self.new()
            self.block(s.body, body_entry, entry)
        exit_ = target if target is not None else self.new()
        self.cond(s.cond, entry, body_entry, exit_)
        return exit_

    def cond(self, c, entry: int, t: int, f: int):
        if isinstance(c, Cmp):
            self.edge(entry, Command(c.atom), t)
            self.edge(entry, Command(c.atom.negate()), f)
        elif isinstance(c, Not):
            self.cond(c.arg, entry, f, t)
        elif isinstance(c, And):
            mid = self.new()
            self.cond(c.left, entry, mid, f)
            self.cond(c.right, mid, t, f)
        else:
            mid = self.new()
            self.cond(c.left, entry, t, mid)
            self.cond(c.right, mid, t, f)


def lower(ast: Source) -> Program:
    b = _Builder()
    init = b.new()
    entry = init
    inits = tuple((d.name, LinExpr(d.init)) for d in ast.decls if d.init is not None)
    if inits:
        entry = b.new()
        b.edge(init, Command(TRUE, inits), entry)
    b.block(ast.body, entry)
    edges = []
    for src in sorted(b.out):
        for k, (cmd, dst) in enumerate(b.out[src]):
            edges.append(Transition(f"{src}#{k}", src, cmd, dst))
    return Program(tuple(d.name for d in ast.decls), tuple(sorted(b.out)), init, tuple(edges))


def parse_program(source: str) -> Program:
    return lower(parse_source(source))


# ---------------------------------------------------------------- printing


def _fmt_expr(e: LinExpr) -> str:
    return str(e).replace("*", " * ")


def _fmt_cond(c, top: bool = True) -> str:
    if isinstance(c, Cmp):
        a = c.atom
        if a.is_true:
            return "true"
        if a.is_false:
            return "false"
        lhs = LinExpr(0, a.expr.terms, a.expr.prod)
        return f"{_fmt_expr(lhs)} {a.rel} {-a.expr.const}"
    if isinstance(c, Not):
        return f"!({_fmt_cond(c.arg, False)})"
    op = "&&" if isinstance(c, And) else "||"
    s = f"{_fmt_cond(c.left, False)} {op} {_fmt_cond(c.right, False)}"
    return s if top else f"({s})"


def format_source(ast: Source) -> str:
    """Render an AST back to ``.imp`` text that parses to an equivalent program."""
    lines = []
    for d in ast.decls:
        lines.append(f"var {d.name};" if d.init is None else f"var {d.name} = {d.init};")

    def emit(stmts, ind):
        pad = "    " * ind
        for s in stmts:
            if isinstance(s, Assign):
                lines.append(f"{pad}{s.name} = {_fmt_expr(s.expr)};")
            elif isinstance(s, Input):
                lines.append(f"{pad}{s.name} = input();")
            elif isinstance(s, If):
                lines.append(f"{pad}if ({_fmt_cond(s.cond)}) {{")
                emit(s.then, ind + 1)
                if s.orelse:
                    lines.append(f"{pad}}} else {{")
                    emit(s.orelse, ind + 1)
                lines.append(f"{pad}}}")
            else:
                lines.append(f"{pad}while ({_fmt_cond(s.cond)}) {{")
                emit(s.body, ind + 1)
                lines.append(f"{pad}}}")

    emit(ast.body, 0)
    return "\n".join(lines) + "\n"


def as_networkx(p: Program):
    """Labelled ``networkx.MultiDiGraph`` view, handy for isomorphism checks."""
    import networkx as nx

    g = nx.MultiDiGraph()
    for l in p.locs:
        g.add_node(l, init=(l == p.init))
    for e in p.edges:
        g.add_edge(e.src, e.dst, label=e.label, cmd=str(e.cmd))
    return g

