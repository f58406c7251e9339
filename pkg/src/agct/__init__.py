"""Alternating concolic testing and predicate-abstraction model checking."""

from .expr import Atom, LinExpr, atom
from .ir import Program, Transition, Command, parse_program, enumerate_branches
from .logic import Fuel, Solver, check_sat, implies

__all__ = [
    "Atom", "LinExpr", "atom",
    "Program", "Transition", "Command", "parse_program", "enumerate_branches",
    "Fuel", "Solver", "check_sat", "implies",
]
