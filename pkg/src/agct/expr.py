"""Integer linear expressions and canonical linear atoms.

Symbols are plain strings. Program variables are identifiers, primed
variables carry a trailing ``'``, step-indexed copies look like ``x@3`` and
input symbols look like ``r#0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Mapping


class NonlinearError(ValueError):
    """Raised when an operation would produce a product of two symbolic terms."""


@dataclass(frozen=True, order=True)
class LinExpr:
    """``const + sum(coef * sym) + pcoef * a * b`` with at most one product."""

    const: int = 0
    terms: tuple[tuple[str, int], ...] = ()
    prod: tuple[str, str, int] | None = None

    @staticmethod
    def of(const: int = 0, terms: Mapping[str, int] | None = None,
           prod: tuple[str, str, int] | None = None) -> "LinExpr":
        items = tuple(sorted((s, c) for s, c in (terms or {}).items() if c != 0))
        if prod is not None:
            a, b, c = prod
            if c == 0:
                prod = None
            else:
                a, b = sorted((a, b))
                prod = (a, b, c)
        return LinExpr(const, items, prod)

    @staticmethod
    def var(name: str, coef: int = 1) -> "LinExpr":
        return LinExpr.of(0, {name: coef})

    @staticmethod
    def constant(value: int) -> "LinExpr":
        return LinExpr(value)

    @property
    def coeffs(self) -> dict[str, int]:
        return dict(self.terms)

    @property
    def is_linear(self) -> bool:
        return self.prod is None

    @property
    def is_constant(self) -> bool:
        return not self.terms and self.prod is None

    def symbols(self) -> set[str]:
        out = {s for s, _ in self.terms}
        if self.prod is not None:
            out.update(self.prod[:2])
        return out

    def __add__(self, other: "LinExpr | int") -> "LinExpr":
        if isinstance(other, int):
            return LinExpr(self.const + other, self.terms, self.prod)
        coeffs = self.coeffs
        for s, c in other.terms:
            coeffs[s] = coeffs.get(s, 0) + c
        prod = self.prod
        if other.prod is not None:
            if prod is None:
                prod = other.prod
            elif prod[:2] == other.prod[:2]:
                prod = (prod[0], prod[1], prod[2] + other.prod[2])
            else:
                raise NonlinearError("two product terms in one expression")
        return LinExpr.of(self.const + other.const, coeffs, prod)

    def __neg__(self) -> "LinExpr":
        return self.scale(-1)

    def __sub__(self, other: "LinExpr | int") -> "LinExpr":
        return self + (-other if isinstance(other, LinExpr) else -other)

    def scale(self, k: int) -> "LinExpr":
        prod = None if self.prod is None else (self.prod[0], self.prod[1], self.prod[2] * k)
        return LinExpr.of(self.const * k, {s: c * k for s, c in self.terms}, prod)

    def times(self, other: "LinExpr") -> "LinExpr":
        """Multiply two expressions; at most one side may be non-constant unless both are single symbols."""
        if self.is_constant:
            return other.scale(self.const)
        if other.is_constant:
            return self.scale(other.const)
        if (self.const == 0 and other.const == 0 and self.prod is None and other.prod is None
                and len(self.terms) == 1 and len(other.terms) == 1):
            (a, ca), (b, cb) = self.terms[0], other.terms[0]
            return LinExpr.of(0, {}, (a, b, ca * cb))
        raise NonlinearError(f"cannot multiply {self} by {other}")

    def evaluate(self, env: Mapping[str, int]) -> int:
        total = self.const + sum(c * env[s] for s, c in self.terms)
        if self.prod is not None:
            a, b, c = self.prod
            total += c * env[a] * env[b]
        return total

    def substitute(self, mapping: Mapping[str, "LinExpr"]) -> "LinExpr":
        out = LinExpr(self.const)
        for s, c in self.terms:
            out = out + (mapping[s].scale(c) if s in mapping else LinExpr.var(s, c))
        if self.prod is not None:
            a, b, c = self.prod
            ea = mapping.get(a, LinExpr.var(a))
            eb = mapping.get(b, LinExpr.var(b))
            out = out + ea.times(eb).scale(c)
        return out

    def rename(self, fn) -> "LinExpr":
        prod = None
        if self.prod is not None:
            prod = (fn(self.prod[0]), fn(self.prod[1]), self.prod[2])
        coeffs: dict[str, int] = {}
        for s, c in self.terms:
            coeffs[fn(s)] = coeffs.get(fn(s), 0) + c
        return LinExpr.of(self.const, coeffs, prod)

    def __str__(self) -> str:
        parts: list[str] = []
        items = [(c, s) for s, c in self.terms]
        if self.prod is not None:
            items.append((self.prod[2], f"{self.prod[0]}*{self.prod[1]}"))
        for c, s in items:
            mag = abs(c)
            body = s if mag == 1 else f"{mag}*{s}"
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(("+ " if c > 0 else "- ") + body)
        if self.const or not parts:
            if not parts:
                parts.append(str(self.const))
            else:
                parts.append(("+ " if self.const > 0 else "- ") + str(abs(self.const)))
        return " ".join(parts)


REL_NEGATION = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


@dataclass(frozen=True, order=True)
class Atom:
    """Canonical integer atom ``expr rel 0`` with ``rel`` in ``<=``, ``==``, ``!=``.

    Build atoms with :func:`atom`; the constructor does not normalize.
    """

    expr: LinExpr
    rel: str

    @property
    def is_true(self) -> bool:
        return self == TRUE

    @property
    def is_false(self) -> bool:
        return self == FALSE

    @property
    def is_constant(self) -> bool:
        return self.expr.is_constant

    def symbols(self) -> set[str]:
        return self.expr.symbols()

    def negate(self) -> "Atom":
        if self.rel == "<=":
            return _canon(-self.expr + 1, "<=")
        return _canon(self.expr, "!=" if self.rel == "==" else "==")

    def holds(self, env: Mapping[str, int]) -> bool:
        v = self.expr.evaluate(env)
        if self.rel == "<=":
            return v <= 0
        if self.rel == "==":
            return v == 0
        return v != 0

    def substitute(self, mapping: Mapping[str, LinExpr]) -> "Atom":
        return _canon(self.expr.substitute(mapping), self.rel)

    def rename(self, fn) -> "Atom":
        return _canon(self.expr.rename(fn), self.rel)

    def __str__(self) -> str:
        if self.is_true:
            return "true"
        if self.is_false:
            return "false"
        lhs = LinExpr(0, self.expr.terms, self.expr.prod)
        rhs = -self.expr.const
        pos = [t for t in lhs.terms if t[1] > 0]
        if self.rel == "<=" and not pos and lhs.prod is None:
            # -x + 3 <= 0  reads better as  x >= 3
            return f"{-lhs} >= {-rhs}"
        return f"{lhs} {self.rel} {rhs}"


def _canon(e: LinExpr, rel: str) -> Atom:
    if e.is_constant:
        c = e.const
        ok = c <= 0 if rel == "<=" else (c == 0 if rel == "==" else c != 0)
        return TRUE if ok else FALSE
    g = 0
    for _, c in e.terms:
        g = gcd(g, c)
    if e.prod is not None:
        g = gcd(g, e.prod[2])
    g = abs(g)
    c = e.const
    if rel == "<=":
        # sum a*x + c <= 0  <=>  sum (a/g)*x + ceil(c/g) <= 0
        newc = -((-c) // g)
    else:
        if c % g:
            return FALSE if rel == "==" else TRUE
        newc = c // g
    terms = {s: k // g for s, k in e.terms}
    prod = None if e.prod is None else (e.prod[0], e.prod[1], e.prod[2] // g)
    out = LinExpr.of(newc, terms, prod)
    if rel != "<=":
        lead = out.terms[0][1] if out.terms else out.prod[2]
        if lead < 0:
            out = -out
    return Atom(out, rel)


TRUE = Atom(LinExpr(0), "<=")
FALSE = Atom(LinExpr(1), "<=")


def atom(lhs: LinExpr | int, op: str, rhs: LinExpr | int = 0) -> Atom:
    """Build the canonical atom for ``lhs op rhs`` over the integers."""
    if isinstance(lhs, int):
        lhs = LinExpr(lhs)
    if isinstance(rhs, int):
        rhs = LinExpr(rhs)
    e = lhs - rhs
    if op == "<":
        return _canon(e + 1, "<=")
    if op == "<=":
        return _canon(e, "<=")
    if op == ">":
        return _canon(-e + 1, "<=")
    if op == ">=":
        return _canon(-e, "<=")
    if op in ("==", "!="):
        return _canon(e, op)
    raise ValueError(f"unknown relation {op!r}")
