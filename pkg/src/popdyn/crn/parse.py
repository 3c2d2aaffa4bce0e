"""Plain-text model format.

One statement per line, ``#`` starts a comment::

    model sir
    species S I R
    param theta1 = 3
    param theta2 in [0.5, 5]
    init S in [30, 200]
    constraint S + I + R = 100
    observe S I
    grid t0=0 dt=0.5 H=16
    reaction infect: S + I -> 2 I @ theta1*I*S/(S + I + R)

The stoichiometry around ``->`` only defines the update vector; the
expression after ``@`` is the propensity, taken verbatim. ``0`` denotes an
empty side. Expressions support ``+ - * /``, ``^`` with a fixed integer
exponent, parentheses, nonnegative numbers, species and parameter names.
"""
from __future__ import annotations

import re
from typing import Callable, Iterator, Optional

from .expr import BinOp, Expr, Num, Param, Species, to_text, _fmt_num
from .network import (
    Constraint, DuplicateNameError, InitRange, MalformedRangeError, ModelError,
    ModelSyntaxError, Parameter, Reaction, ReactionNetwork, SimGrid,
    UndeclaredIdentifierError,
)

__all__ = ["parse_network", "format_network"]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>->|[-+*/^()\[\],:=@]))"
)


class _Tokens:
    def __init__(self, text: str, lineno: int, offset: int = 0):
        self.items: list[tuple[str, str, int]] = []
        self.lineno = lineno
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1 + offset
                raise ModelSyntaxError(f"unexpected character {text[col - 1 - offset]!r}", lineno, col)
            kind = m.lastgroup
            col = m.start(kind) + 1 + offset
            self.items.append((kind, m.group(kind), col))
            pos = m.end()
        self.i = 0
        self.end_col = len(text) + 1 + offset

    def peek(self) -> Optional[tuple[str, str, int]]:
        return self.items[self.i] if self.i < len(self.items) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ModelSyntaxError("unexpected end of line", self.lineno, self.end_col)
        self.i += 1
        return tok

    def expect(self, kind: str, value: Optional[str] = None) -> tuple[str, str, int]:
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise ModelSyntaxError(f"expected {want!r}, found {tok[1]!r}", self.lineno, tok[2])
        return tok

    def accept(self, value: str) -> bool:
        tok = self.peek()
        if tok is not None and tok[1] == value and tok[0] == "op":
            self.i += 1
            return True
        return False

    def done(self):
        tok = self.peek()
        if tok is not None:
            raise ModelSyntaxError(f"unexpected {tok[1]!r}", self.lineno, tok[2])

    def number(self) -> float:
        return float(self.expect("num")[1])

    def integer(self) -> int:
        kind, val, col = self.expect("num")
        f = float(val)
        if f != int(f):
            raise ModelSyntaxError(f"expected an integer, found {val}", self.lineno, col)
        return int(f)


def _parse_expr(tk: _Tokens, resolve: Callable[[str, int], Expr]) -> Expr:
    def expr() -> Expr:
        node = term()
        while (tok := tk.peek()) is not None and tok[1] in "+-" and tok[0] == "op":
            tk.next()
            node = BinOp(tok[1], node, term())
        return node

    def term() -> Expr:
        node = power()
        while (tok := tk.peek()) is not None and tok[1] in "*/" and tok[0] == "op":
            tk.next()
            node = BinOp(tok[1], node, power())
        return node

    def power() -> Expr:
        node = atom()
        if tk.accept("^"):
            return BinOp("^", node, power())
        return node

    def atom() -> Expr:
        kind, val, col = tk.next()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            return resolve(val, col)
        if val == "(":
            node = expr()
            tk.expect("op", ")")
            return node
        raise ModelSyntaxError(f"unexpected {val!r} in expression", tk.lineno, col)

    return expr()


def _lines(text: str) -> Iterator[tuple[int, str, str, int]]:
    """Yield (lineno, keyword, rest, rest_offset) for non-blank statements."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.lstrip()
        indent = len(line) - len(stripped)
        kw, _, rest = stripped.partition(" ")
        offset = indent + len(kw) + 1
        yield lineno, kw, rest, offset


def _range(tk: _Tokens, integer: bool) -> tuple[float, float]:
    open_tok = tk.expect("op", "[")
    read = tk.integer if integer else tk.number
    lo = read()
    tk.expect("op", ",")
    hi = read()
    tk.expect("op", "]")
    if lo > hi:
        raise MalformedRangeError(f"malformed range [{lo}, {hi}]", tk.lineno, open_tok[2])
    return lo, hi


def _names(tk: _Tokens) -> list[tuple[str, int]]:
    out = []
    while tk.peek() is not None:
        _, val, col = tk.expect("name")
        out.append((val, col))
    return out


def parse_network(text: str) -> ReactionNetwork:
    """Parse model-file text into a validated :class:`ReactionNetwork`."""
    name = "model"
    species: list[str] = []
    params: list[Parameter] = []
    grid: Optional[SimGrid] = None
    deferred = []
    where: dict[str, tuple[int, int]] = {}

    def declare(ident: str, lineno: int, col: int):
        if ident in where:
            raise DuplicateNameError(f"duplicate name {ident!r}", lineno, col)
        where[ident] = (lineno, col)

    for lineno, kw, rest, off in _lines(text):
        tk = _Tokens(rest, lineno, off)
        if kw == "model":
            name = tk.expect("name")[1]
            tk.done()
        elif kw == "species":
            names = _names(tk)
            if not names:
                raise ModelSyntaxError("species needs at least one name", lineno, off)
            for s, col in names:
                declare(s, lineno, col)
                species.append(s)
        elif kw == "param":
            pname, col = tk.expect("name")[1:]
            declare(pname, lineno, col)
            if tk.accept("="):
                params.append(Parameter(pname, value=tk.number()))
            else:
                tk.expect("name", "in")
                params.append(Parameter(pname, bounds=_range(tk, integer=False)))
            tk.done()
        elif kw == "grid":
            if grid is not None:
                raise DuplicateNameError("duplicate grid statement", lineno, 1)
            vals: dict[str, float] = {}
            while tk.peek() is not None:
                key, kcol = tk.expect("name")[1:]
                if key not in ("t0", "dt", "H") or key in vals:
                    raise ModelSyntaxError(f"bad grid key {key!r}", lineno, kcol)
                tk.expect("op", "=")
                vals[key] = tk.integer() if key == "H" else tk.number()
            try:
                grid = SimGrid(**vals)
            except ModelError as exc:
                raise ModelSyntaxError(str(exc), lineno, off) from None
        elif kw in ("init", "constraint", "observe", "reaction"):
            deferred.append((lineno, kw, tk))
        else:
            raise ModelSyntaxError(f"unknown statement {kw!r}", lineno, off - len(kw))

    sp_set = set(species)
    pa_set = {p.name for p in params}
    init: list[InitRange] = []
    constraints: list[Constraint] = []
    observables: Optional[list[str]] = None
    reactions: list[Reaction] = []

    def species_ref(ident: str, lineno: int, col: int) -> str:
        if ident not in sp_set:
            raise UndeclaredIdentifierError(f"undeclared species {ident!r}", lineno, col)
        return ident

    for lineno, kw, tk in deferred:
        if kw == "init":
            _, ident, col = tk.expect("name")
            s = species_ref(ident, lineno, col)
            if tk.accept("="):
                v = tk.integer()
                lo, hi = v, v
            else:
                tk.expect("name", "in")
                lo, hi = _range(tk, integer=True)
            tk.done()
            init.append(InitRange(s, int(lo), int(hi)))
        elif kw == "constraint":
            _, ident, col = tk.expect("name")
            members = [species_ref(ident, lineno, col)]
            while tk.accept("+"):
                _, ident, col = tk.expect("name")
                members.append(species_ref(ident, lineno, col))
            tk.expect("op", "=")
            total = tk.integer()
            tk.done()
            constraints.append(Constraint(tuple(members), total))
        elif kw == "observe":
            if observables is not None:
                raise DuplicateNameError("duplicate observe statement", lineno, 1)
            observables = [species_ref(s, lineno, col) for s, col in _names(tk)]
        else:
            reactions.append(_reaction(tk, species, sp_set, pa_set, lineno))

    if not reactions:
        raise ModelError("no reactions")
    return ReactionNetwork(
        species=tuple(species),
        reactions=tuple(reactions),
        parameters=tuple(params),
        init=tuple(init),
        constraints=tuple(constraints),
        observables=tuple(observables or ()),
        grid=grid,
        name=name,
    )


def _side(tk: _Tokens, sp_set: set[str], lineno: int, stop: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    tok = tk.peek()
    if tok is not None and tok[0] == "num" and float(tok[1]) == 0:
        tk.next()
        return counts
    while True:
        coef = 1
        if (tok := tk.peek()) is not None and tok[0] == "num":
            coef = tk.integer()
        _, ident, col = tk.expect("name")
        if ident not in sp_set:
            raise UndeclaredIdentifierError(f"undeclared species {ident!r}", lineno, col)
        counts[ident] = counts.get(ident, 0) + coef
        tok = tk.peek()
        if tok is None or tok[1] == stop:
            return counts
        tk.expect("op", "+")


def _reaction(tk: _Tokens, species, sp_set, pa_set, lineno: int) -> Reaction:
    rname = tk.expect("name")[1]
    tk.expect("op", ":")
    reactants = _side(tk, sp_set, lineno, "->")
    tk.expect("op", "->")
    products = _side(tk, sp_set, lineno, "@")
    tk.expect("op", "@")

    def resolve(ident: str, col: int) -> Expr:
        if ident in sp_set:
            return Species(ident)
        if ident in pa_set:
            return Param(ident)
        raise UndeclaredIdentifierError(f"undeclared identifier {ident!r}", lineno, col)

    prop = _parse_expr(tk, resolve)
    tk.done()
    update = tuple(products.get(s, 0) - reactants.get(s, 0) for s in species)
    return Reaction(rname, update, prop)


def _format_side(terms: list[tuple[str, int]]) -> str:
    if not terms:
        return "0"
    return " + ".join(s if c == 1 else f"{c} {s}" for s, c in terms)


def format_network(net: ReactionNetwork) -> str:
    """Canonical text for ``net``: reactants/products show net changes only."""
    out = [f"model {net.name}", "species " + " ".join(net.species)]
    for p in net.parameters:
        if p.varying:
            lo, hi = p.bounds
            out.append(f"param {p.name} in [{_fmt_num(lo)}, {_fmt_num(hi)}]")
        else:
            out.append(f"param {p.name} = {_fmt_num(p.value)}")
    for r in net.init:
        out.append(f"init {r.species} in [{r.lo}, {r.hi}]")
    for c in net.constraints:
        out.append(f"constraint {' + '.join(c.species)} = {c.total}")
    out.append("observe " + " ".join(net.observables))
    if net.grid is not None:
        g = net.grid
        out.append(f"grid t0={_fmt_num(g.t0)} dt={_fmt_num(g.dt)} H={g.H}")
    for r in net.reactions:
        lhs = [(s, -d) for s, d in zip(net.species, r.update) if d < 0]
        rhs = [(s, d) for s, d in zip(net.species, r.update) if d > 0]
        out.append(
            f"reaction {r.name}: {_format_side(lhs)} -> {_format_side(rhs)} @ {to_text(r.propensity)}"
        )
    return "\n".join(out) + "\n"
