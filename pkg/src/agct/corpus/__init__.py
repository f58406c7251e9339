"""Hand-written benchmark programs shipped with the package."""
from __future__ import annotations

import re
from importlib import resources

from ..ir import Program, parse_program

NAMES = ("motivating", "simple_while", "branches", "unreach")


def source(name: str, bound: int | None = None) -> str:
    """Source text of a corpus program; ``bound`` rewrites the loop limit 30."""
    text = resources.files(__package__).joinpath(f"{name.replace('-', '_')}.imp").read_text()
    if bound is not None:
        text = re.sub(r"\b30\b", str(bound), text)
    return text


def load(name: str, bound: int | None = None) -> Program:
    return parse_program(source(name, bound))
