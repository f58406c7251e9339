"""Formulas over step-indexed symbols and a small integer decision procedure.

The decision procedure handles conjunctions of canonical atoms: Gaussian
elimination for equalities, Fourier-Motzkin projection for inequalities,
branch-and-bound for integrality and lazy case splits for ``!=`` atoms.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, TextIO

from .expr import TRUE, Atom, LinExpr, NonlinearError, atom
from .ir import Command, Transition

# ---------------------------------------------------------------- symbols


def primed(x: str) -> str:
    return x + "'"


def indexed(x: str, i: int) -> str:
    return f"{x}@{i}"


def input_sym(k: int) -> str:
    return f"r#{k}"


def is_input_sym(s: str) -> bool:
    return s.startswith("r#")


def input_ordinal(s: str) -> int:
    return int(s[2:])


def base_of(s: str) -> str:
    """Strip priming or step index from a symbol."""
    if s.endswith("'"):
        return s[:-1]
    return s.split("@", 1)[0]


def shift_index(atoms: Atom | Iterable[Atom], i: int) -> list[Atom]:
    """Rename primed symbols to step ``i+1`` and plain program symbols to step ``i``."""
    if isinstance(atoms, Atom):
        atoms = [atoms]

    def ren(s: str) -> str:
        if is_input_sym(s) or "@" in s:
            return s
        if s.endswith("'"):
            return indexed(s[:-1], i + 1)
        return indexed(s, i)

    return [a.rename(ren) for a in atoms]


def frame(x: str | Iterable[str], variables: Sequence[str]) -> list[Atom]:
    """``y' = y`` for every variable ``y`` not in ``x``."""
    keep = {x} if isinstance(x, str) else set(x)
    return [atom(LinExpr.var(primed(y)), "==", LinExpr.var(y)) for y in variables if y not in keep]


def command_formula(cmd: Command, variables: Sequence[str]) -> list[Atom]:
    """Transition formula over ``V`` and ``V'``; nonlinear parts are dropped (over-approximation)."""
    out: list[Atom] = []
    if cmd.guard.expr.is_linear:
        out.append(cmd.guard)
    for v, e in cmd.updates:
        if e.is_linear:
            out.append(atom(LinExpr.var(primed(v)), "==", e))
    out.extend(frame(cmd.assigned, variables))
    return [a for a in out if not a.is_true]


def path_constraints(path: Sequence[Transition], variables: Sequence[str]) -> list[list[Atom]]:
    """Per-step constraints ``C_0 .. C_{n-1}`` of a path.

    Input commands bind ``x@{i+1}`` to a fresh input symbol ``r#k``, with
    ``k`` counting the inputs read earlier on the path.
    """
    out: list[list[Atom]] = []
    k = 0
    for i, t in enumerate(path):
        c = shift_index(command_formula(t.cmd, variables), i)
        if t.cmd.input_var is not None:
            c.append(atom(LinExpr.var(indexed(t.cmd.input_var, i + 1)), "==", LinExpr.var(input_sym(k))))
            k += 1
        out.append(c)
    return out


def wp_atom(a: Atom, t: Transition | Command) -> Atom:
    """Weakest precondition of ``a`` across the update of ``t`` (guard not included).

    Atoms that cannot be carried across (input overwrite, nonlinear result)
    become ``true``.
    """
    cmd = t.cmd if isinstance(t, Transition) else t
    if cmd.input_var is not None:
        return TRUE if cmd.input_var in a.symbols() else a
    if not cmd.updates:
        return a
    try:
        out = a.substitute(dict(cmd.updates))
    except NonlinearError:
        return TRUE
    return out if out.expr.is_linear else TRUE


# ---------------------------------------------------------------- fuel


@dataclass
class Fuel:
    """Deterministic budget shared by solver calls and executed transitions."""

    budget: float = math.inf
    spent: int = 0

    @property
    def remaining(self) -> float:
        return self.budget - self.spent

    @property
    def exhausted(self) -> bool:
        return self.spent >= self.budget

    def spend(self, n: int = 1) -> None:
        self.spent += n


# ---------------------------------------------------------------- solver


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SatResult:
    status: Status
    model: dict[str, int] | None = None

    @property
    def sat(self) -> bool:
        return self.status is Status.SAT

    @property
    def unsat(self) -> bool:
        return self.status is Status.UNSAT


class _Overflow(Exception):
    pass


# linear form: (coeffs: dict[str, Fraction], const: Fraction) meaning sum + const (<=|==) 0
_Form = tuple[dict, Fraction]


def _form(e: LinExpr) -> _Form:
    return {s: Fraction(c) for s, c in e.terms}, Fraction(e.const)


def _subst(f: _Form, var: str, by: _Form) -> _Form:
    coeffs, const = f
    c = coeffs.get(var)
    if c is None:
        return f
    out = dict(coeffs)
    del out[var]
    for s, k in by[0].items():
        v = out.get(s, 0) + c * k
        if v:
            out[s] = v
        else:
            out.pop(s, None)
    return out, const + c * by[1]


def _key(f: _Form):
    coeffs, const = f
    if not coeffs:
        return ((), const)
    scale = abs(next(iter(sorted(coeffs.items())))[1])
    return tuple(sorted((s, c / scale) for s, c in coeffs.items())), const / scale


def _eval(f: _Form, env: Mapping[str, Fraction]) -> Fraction:
    return f[1] + sum(c * env[s] for s, c in f[0].items())


def _pick(lo: Fraction | None, hi: Fraction | None) -> Fraction:
    """Prefer the integer closest to zero inside ``[lo, hi]``."""
    ilo = None if lo is None else math.ceil(lo)
    ihi = None if hi is None else math.floor(hi)
    if ilo is None or ihi is None or ilo <= ihi:
        v = 0
        if ilo is not None and v < ilo:
            v = ilo
        if ihi is not None and v > ihi:
            v = ihi
        return Fraction(v)
    return (lo + hi) / 2


def _rational_model(eqs: list[_Form], les: list[_Form], limit: int) -> dict[str, Fraction] | None:
    """Rational solution of ``eqs == 0`` and ``les <= 0``, or ``None`` if infeasible."""
    solved: list[tuple[str, _Form]] = []
    eqs = list(eqs)
    les = list(les)
    while eqs:
        f = eqs.pop()
        if not f[0]:
            if f[1] != 0:
                return None
            continue
        var, c = min(f[0].items(), key=lambda kv: (abs(kv[1]) != 1, kv[0]))
        rest = {s: -k / c for s, k in f[0].items() if s != var}
        by = (rest, -f[1] / c)
        solved.append((var, by))
        eqs = [_subst(g, var, by) for g in eqs]
        les = [_subst(g, var, by) for g in les]

    stages: list[tuple[str, list[_Form], list[_Form]]] = []
    cur: dict = {}
    for f in les:
        if not f[0]:
            if f[1] > 0:
                return None
            continue
        cur.setdefault(_key(f), f)
    cons = list(cur.values())
    while cons:
        occ: dict[str, list[int]] = {}
        for f in cons:
            for s, c in f[0].items():
                p = occ.setdefault(s, [0, 0])
                p[0 if c > 0 else 1] += 1
        var = min(sorted(occ), key=lambda s: occ[s][0] * occ[s][1] - occ[s][0] - occ[s][1])
        ups = [f for f in cons if f[0].get(var, 0) > 0]
        lows = [f for f in cons if f[0].get(var, 0) < 0]
        keep = {}
        for f in cons:
            if var not in f[0]:
                keep.setdefault(_key(f), f)
        for u in ups:
            cu = u[0][var]
            for l in lows:
                cl = -l[0][var]
                coeffs: dict[str, Fraction] = {}
                for s, k in u[0].items():
                    coeffs[s] = coeffs.get(s, 0) + k * cl
                for s, k in l[0].items():
                    coeffs[s] = coeffs.get(s, 0) + k * cu
                coeffs = {s: k for s, k in coeffs.items() if k and s != var}
                const = u[1] * cl + l[1] * cu
                if not coeffs:
                    if const > 0:
                        return None
                    continue
                g = (coeffs, const)
                keep.setdefault(_key(g), g)
        if len(keep) > limit:
            raise _Overflow
        stages.append((var, lows, ups))
        cons = list(keep.values())

    env: dict[str, Fraction] = {}
    for var, lows, ups in reversed(stages):
        lo = hi = None
        for f in lows + ups:
            # symbols dropped together with an earlier one-sided variable are free
            for s in f[0]:
                if s != var:
                    env.setdefault(s, Fraction(0))
        for f in lows:
            c = f[0][var]
            rest = _eval(({s: k for s, k in f[0].items() if s != var}, f[1]), env)
            b = -rest / c
            lo = b if lo is None or b > lo else lo
        for f in ups:
            c = f[0][var]
            rest = _eval(({s: k for s, k in f[0].items() if s != var}, f[1]), env)
            b = -rest / c
            hi = b if hi is None or b < hi else hi
        env[var] = _pick(lo, hi)
    for var, by in reversed(solved):
        for s in by[0]:
            env.setdefault(s, Fraction(0))
        env[var] = _eval(by, env)
    return env


class Solver:
    """Conjunctive linear integer arithmetic with fuel accounting.

    Every query costs one fuel unit plus one per case split. ``node_limit``
    bounds branch-and-bound per query; hitting it yields ``UNKNOWN``.
    """

    def __init__(self, fuel: Fuel | None = None, node_limit: int = 400,
                 fm_limit: int = 4000, log: TextIO | None = None):
        self.fuel = fuel if fuel is not None else Fuel()
        self.node_limit = node_limit
        self.fm_limit = fm_limit
        self.log = log
        self.queries = 0

    def check_sat(self, atoms: Iterable[Atom]) -> SatResult:
        atoms = list(atoms)
        self.queries += 1
        self.fuel.spend(1)
        if self.log is not None:
            self.log.write(to_smtlib(atoms))
        res = self._solve_split(atoms)
        if self.log is not None:
            self.log.write(f"; {res.status.value}\n")
        return res

    def implies(self, atoms: Iterable[Atom], a: Atom) -> bool:
        if a.is_true:
            return True
        return self.check_sat(list(atoms) + [a.negate()]).unsat

    def _solve_split(self, atoms: list[Atom]) -> SatResult:
        """Solve each group of atoms sharing no symbol with the others on its own."""
        groups = _components(atoms)
        if groups is None:
            return SatResult(Status.UNSAT)
        model: dict[str, int] = {}
        unknown = False
        for g in groups:
            syms = g[0].symbols()
            res = _solve_single(g) if len(syms) == 1 and all(a.symbols() == syms for a in g) else self._solve(g)
            if res.unsat:
                return res
            if res.status is Status.UNKNOWN:
                unknown = True
            else:
                model.update(res.model)
        return SatResult(Status.UNKNOWN) if unknown else SatResult(Status.SAT, model)

    def _solve(self, atoms: list[Atom]) -> SatResult:
        eqs: list[_IForm] = []
        les: list[_IForm] = []
        nes: list[_IForm] = []
        syms: set[str] = set()
        for a in atoms:
            if a.is_true:
                continue
            if a.is_false:
                return SatResult(Status.UNSAT)
            if not a.expr.is_linear:
                raise ValueError(f"nonlinear atom sent to solver: {a}")
            syms |= a.symbols()
            f = (dict(a.expr.terms), a.expr.const)
            {"<=": les, "==": eqs, "!=": nes}[a.rel].append(f)

        reduced = _eliminate_equalities(eqs, les, nes)
        if reduced is None:
            return SatResult(Status.UNSAT)
        subs, les, nes = reduced
        les = [_tighten(f) for f in les]
        if any(f is None for f in les):
            return SatResult(Status.UNSAT)
        free = set().union(*(f[0] for f in les + nes)) if les or nes else set()

        nodes = 0
        unknown = False
        stack: list[list[_IForm]] = [[]]
        while stack:
            extra = stack.pop()
            nodes += 1
            if nodes > self.node_limit:
                unknown = True
                break
            try:
                env = _rational_model([], [_frac(f) for f in les + extra], self.fm_limit)
            except _Overflow:
                unknown = True
                continue
            if env is None:
                continue
            frac = next((v for v in sorted(env) if env[v].denominator != 1), None)
            if frac is not None:
                v = env[frac]
                lo, hi = math.floor(v), math.ceil(v)
                down = extra + [({frac: 1}, -lo)]
                up = extra + [({frac: -1}, hi)]
                self.fuel.spend(1)
                # explore the side nearer zero first
                stack.extend([up, down] if abs(lo) <= abs(hi) else [down, up])
                continue
            model = {v: int(env.get(v, 0)) for v in free}
            bad = next((f for f in nes if _ieval(f, model) == 0), None)
            if bad is None:
                for var, by in reversed(subs):
                    model[var] = _ieval(by, model)
                return SatResult(Status.SAT, {v: model.get(v, 0) for v in syms})
            lt = extra + [(bad[0], bad[1] + 1)]
            gt = extra + [({v: -c for v, c in bad[0].items()}, -bad[1] + 1)]
            self.fuel.spend(1)
            stack.extend([gt, lt])
        return SatResult(Status.UNKNOWN if unknown else Status.UNSAT)


# integer linear form: (coeffs: dict[str, int], const: int)
_IForm = tuple[dict, int]


def _frac(f: _IForm) -> _Form:
    return {s: Fraction(c) for s, c in f[0].items()}, Fraction(f[1])


def _ieval(f: _IForm, env: Mapping[str, int]) -> int:
    return f[1] + sum(c * env.get(s, 0) for s, c in f[0].items())


def _isubst(f: _IForm, var: str, by: _IForm) -> _IForm:
    c = f[0].get(var)
    if c is None:
        return f
    out = dict(f[0])
    del out[var]
    for s, k in by[0].items():
        v = out.get(s, 0) + c * k
        if v:
            out[s] = v
        else:
            out.pop(s, None)
    return out, f[1] + c * by[1]


def _tighten(f: _IForm) -> _IForm | None:
    """Divide ``sum + c <= 0`` by the coefficient gcd, rounding the bound; ``None`` if false."""
    if not f[0]:
        return None if f[1] > 0 else ({}, 0)
    g = 0
    for c in f[0].values():
        g = math.gcd(g, c)
    return {s: c // g for s, c in f[0].items()}, -((-f[1]) // g)


def _eliminate_equalities(eqs, les, nes):
    """Remove integer equalities by unimodular substitution.

    Returns ``(subs, les, nes)`` where ``subs`` maps eliminated symbols to forms
    over the remaining ones, or ``None`` when the equalities have no integer solution.
    """
    subs: list[tuple[str, _IForm]] = []
    eqs = list(eqs)
    fresh = 0
    while eqs:
        f = eqs.pop()
        if not f[0]:
            if f[1] != 0:
                return None
            continue
        g = 0
        for c in f[0].values():
            g = math.gcd(g, c)
        if f[1] % g:
            return None
        f = ({s: c // g for s, c in f[0].items()}, f[1] // g)
        var, a = min(f[0].items(), key=lambda kv: (abs(kv[1]), kv[0]))
        if abs(a) == 1:
            by = ({s: -c * a for s, c in f[0].items() if s != var}, -f[1] * a)
        else:
            # x = t - sum(q_i * y_i) shrinks every other coefficient below |a|
            t = f"_t{fresh}"
            fresh += 1
            by = ({t: 1, **{s: -(c // a) for s, c in f[0].items() if s != var and c // a}}, 0)
            eqs.append(f)
        subs.append((var, by))
        eqs = [_isubst(e, var, by) for e in eqs]
        les = [_isubst(e, var, by) for e in les]
        nes = [_isubst(e, var, by) for e in nes]
    kept = []
    for f in nes:
        if not f[0]:
            if f[1] == 0:
                return None
            continue
        kept.append(f)
    return subs, les, kept


def _components(atoms: Sequence[Atom]) -> list[list[Atom]] | None:
    """Partition non-trivial atoms by shared symbols; ``None`` if some atom is ``false``."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    live = []
    for a in atoms:
        if a.is_true:
            continue
        if a.is_false:
            return None
        live.append(a)
        syms = sorted(a.symbols())
        for s in syms[1:]:
            ra, rb = find(syms[0]), find(s)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, list[Atom]] = {}
    for a in live:
        groups.setdefault(find(min(a.symbols())), []).append(a)
    return [groups[k] for k in sorted(groups)]


def _solve_single(atoms: Sequence[Atom]) -> SatResult:
    """Atoms over one symbol have unit coefficients once canonical."""
    (s,) = atoms[0].symbols()
    lo = hi = None
    banned = set()
    for a in atoms:
        k = a.expr.coeffs[s]
        c = a.expr.const
        if a.expr.prod is not None or abs(k) != 1:
            raise ValueError(f"unexpected non-canonical atom {a}")
        v = -c * k          # value where the expression is zero
        if a.rel == "==":
            lo = v if lo is None else max(lo, v)
            hi = v if hi is None else min(hi, v)
        elif a.rel == "!=":
            banned.add(v)
        elif k > 0:
            hi = v if hi is None else min(hi, v)
        else:
            lo = v if lo is None else max(lo, v)
    if lo is not None and hi is not None and lo > hi:
        return SatResult(Status.UNSAT)
    start = 0
    if lo is not None and start < lo:
        start = lo
    if hi is not None and start > hi:
        start = hi
    # walk outward from the preferred value, skipping excluded points
    for d in range(len(banned) + 1):
        for cand in (start + d, start - d) if d else (start,):
            if (lo is None or cand >= lo) and (hi is None or cand <= hi) and cand not in banned:
                return SatResult(Status.SAT, {s: cand})
    return SatResult(Status.UNSAT)


def check_sat(atoms: Iterable[Atom], fuel: Fuel | None = None) -> SatResult:
    return Solver(fuel).check_sat(atoms)


def implies(atoms: Iterable[Atom], a: Atom, fuel: Fuel | None = None) -> bool:
    return Solver(fuel).implies(atoms, a)


def to_smtlib(atoms: Sequence[Atom]) -> str:
    """SMT-LIB-ish dump, one conjunct per line; for differential debugging only."""
    syms = sorted(set().union(*(a.symbols() for a in atoms)) if atoms else set())

    def term(e: LinExpr) -> str:
        parts = [f"(* {c} |{s}|)" if c != 1 else f"|{s}|" for s, c in e.terms]
        parts.append(str(e.const) if e.const >= 0 else f"(- {-e.const})")
        return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"

    lines = ["(push)"] + [f"(declare-const |{s}| Int)" for s in syms]
    for a in atoms:
        body = f"({'=' if a.rel != '<=' else '<='} {term(a.expr)} 0)"
        if a.rel == "!=":
            body = f"(not {body})"
        lines.append(f"(assert {body})")
    lines += ["(check-sat)", "(pop)"]
    return "\n".join(lines) + "\n"
