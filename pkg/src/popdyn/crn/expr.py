"""Propensity expression trees.

Expressions are built from nonnegative literals, species counts, parameters
and the binary operators ``+ - * /`` and ``^`` (integer power). Trees are
immutable and hashable so that whole networks compare by value.

Evaluation goes through generated Python code: :func:`compile_vector` emits a
single function returning the propensity of every reaction, which is what the
simulators call in their inner loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

__all__ = [
    "Num", "Species", "Param", "BinOp", "Expr", "PropensityDomainError",
    "to_text", "references", "evaluate", "compile_vector", "guarded_div",
    "check_rate",
]


class PropensityDomainError(ArithmeticError):
    """Raised when a propensity cannot be evaluated to a finite rate >= 0."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Species:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Species, Param, BinOp]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _fmt_num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_text(e: Expr) -> str:
    """Canonical infix form with the minimal parentheses that preserve the tree."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, (Species, Param)):
        return e.name
    p = _PREC[e.op]
    left = to_text(e.left)
    right = to_text(e.right)
    if isinstance(e.left, BinOp):
        lp = _PREC[e.left.op]
        # '^' is right-associative, so an equal-precedence left child needs parens
        if lp < p or (lp == p and e.op == "^"):
            left = f"({left})"
    if isinstance(e.right, BinOp):
        rp = _PREC[e.right.op]
        if rp < p or (rp == p and e.op != "^"):
            right = f"({right})"
    if e.op in "+-":
        return f"{left} {e.op} {right}"
    return f"{left}{e.op}{right}"


def references(e: Expr) -> tuple[set[str], set[str]]:
    """Return ``(species_names, param_names)`` referenced by ``e``."""
    sp: set[str] = set()
    pa: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Species):
            sp.add(node.name)
        elif isinstance(node, Param):
            pa.add(node.name)
        elif isinstance(node, BinOp):
            stack.extend((node.left, node.right))
    return sp, pa


def guarded_div(num: float, den: float) -> float:
    # x/0 is only defined for an empty population (numerator 0 as well)
    if den == 0:
        if num == 0:
            return 0.0
        raise PropensityDomainError(f"division of {num!r} by zero")
    return num / den


def evaluate(e: Expr, species: Mapping[str, float], params: Mapping[str, float]) -> float:
    """Tree-walking evaluation; the reference semantics for compiled code."""
    if isinstance(e, Num):
        return float(e.value)
    if isinstance(e, Species):
        return float(species[e.name])
    if isinstance(e, Param):
        return float(params[e.name])
    a = evaluate(e.left, species, params)
    b = evaluate(e.right, species, params)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return guarded_div(a, b)
    return a ** int(b)


def _emit(e: Expr, sidx: Mapping[str, int], pidx: Mapping[str, int]) -> str:
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Species):
        return f"x[{sidx[e.name]}]"
    if isinstance(e, Param):
        return f"p[{pidx[e.name]}]"
    a = _emit(e.left, sidx, pidx)
    b = _emit(e.right, sidx, pidx)
    if e.op == "/":
        return f"_div({a}, {b})"
    if e.op == "^":
        return f"({a} ** int({b}))"
    return f"({a} {e.op} {b})"


def compile_vector(
    exprs: Sequence[Expr], species: Sequence[str], params: Sequence[str]
) -> Callable[[Sequence[float], Sequence[float]], list[float]]:
    """Compile ``exprs`` into ``f(x, p) -> [a_1, ..., a_m]``.

    ``x`` is indexed like ``species`` and ``p`` like ``params`` (all
    parameters, fixed and varying).
    """
    sidx = {s: i for i, s in enumerate(species)}
    pidx = {s: i for i, s in enumerate(params)}
    body = ", ".join(_emit(e, sidx, pidx) for e in exprs)
    src = f"def _propensities(x, p):\n    return [{body}]\n"
    ns: dict = {"_div": guarded_div}
    exec(compile(src, "<propensities>", "exec"), ns)
    fn = ns["_propensities"]
    fn.source = src
    return fn


def check_rate(value: float, label: str) -> float:
    if not math.isfinite(value) or value < 0:
        raise PropensityDomainError(f"propensity of {label} is {value!r}")
    return value
