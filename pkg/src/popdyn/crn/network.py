"""Reaction network data model and validation."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .expr import (
    BinOp, Expr, Num, Param, PropensityDomainError, compile_vector, references,
    to_text,
)

__all__ = [
    "ModelError", "ModelSyntaxError", "UndeclaredIdentifierError", "DuplicateNameError",
    "MalformedRangeError", "SimGrid", "Parameter", "InitRange", "Constraint", "Reaction",
    "ReactionNetwork",
]


class ModelError(ValueError):
    """Invalid model definition; carries a source position when known."""

    def __init__(self, msg: str, line: Optional[int] = None, col: Optional[int] = None):
        self.line, self.col = line, col
        if line is not None:
            msg = f"line {line}, col {col}: {msg}"
        super().__init__(msg)


class ModelSyntaxError(ModelError):
    pass


class UndeclaredIdentifierError(ModelError):
    pass


class DuplicateNameError(ModelError):
    pass


class MalformedRangeError(ModelError):
    pass


@dataclass(frozen=True)
class SimGrid:
    """Observation grid t0, t0+dt, ..., t0+H*dt."""

    t0: float = 0.0
    dt: float = 1.0
    H: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ModelError(f"grid dt must be > 0, got {self.dt}")
        if int(self.H) != self.H or self.H < 1:
            raise ModelError(f"grid H must be an integer >= 1, got {self.H}")
        object.__setattr__(self, "H", int(self.H))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.H + 1)


@dataclass(frozen=True)
class Parameter:
    """A rate constant: either fixed (``value``) or varying over ``bounds``."""

    name: str
    value: Optional[float] = None
    bounds: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if (self.value is None) == (self.bounds is None):
            raise ModelError(f"parameter {self.name}: give exactly one of value or range")
        if self.bounds is not None:
            lo, hi = (float(b) for b in self.bounds)
            if not lo <= hi:
                raise MalformedRangeError(f"parameter {self.name}: malformed range [{lo}, {hi}]")
            object.__setattr__(self, "bounds", (lo, hi))
        else:
            object.__setattr__(self, "value", float(self.value))

    @property
    def varying(self) -> bool:
        return self.bounds is not None


@dataclass(frozen=True)
class InitRange:
    species: str
    lo: int
    hi: int

    def __post_init__(self):
        if int(self.lo) != self.lo or int(self.hi) != self.hi or not 0 <= self.lo <= self.hi:
            raise MalformedRangeError(f"init {self.species}: malformed range [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))


@dataclass(frozen=True)
class Constraint:
    """Conservation constraint: the listed species sum to ``total`` initially."""

    species: tuple[str, ...]
    total: int


@dataclass(frozen=True)
class Reaction:
    name: str
    update: tuple[int, ...]
    propensity: Expr


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    parameters: tuple[Parameter, ...] = ()
    init: tuple[InitRange, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    observables: tuple[str, ...] = ()
    grid: Optional[SimGrid] = None
    name: str = "model"

    def __post_init__(self):
        for attr in ("species", "reactions", "parameters", "init", "constraints", "observables"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if not self.observables:
            object.__setattr__(self, "observables", self.species)
        self._validate()

    def __getstate__(self):
        # compiled propensity code cannot be pickled; it is rebuilt on demand
        return {k: v for k, v in self.__dict__.items() if k in self.__dataclass_fields__}

    def __setstate__(self, state):
        self.__dict__.update(state)

    # -- structure --------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.species)

    @property
    def m_rxn(self) -> int:
        return len(self.reactions)

    @property
    def varying(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters if p.varying)

    @property
    def m_cond(self) -> int:
        return len(self.varying)

    @property
    def n_obs(self) -> int:
        return len(self.observables)

    @cached_property
    def observed_indices(self) -> tuple[int, ...]:
        return tuple(self.species.index(s) for s in self.observables)

    @cached_property
    def hidden_indices(self) -> tuple[int, ...]:
        obs = set(self.observed_indices)
        return tuple(i for i in range(self.n) if i not in obs)

    @cached_property
    def init_bounds(self) -> np.ndarray:
        """(n, 2) integer array of declared initial ranges."""
        by = {r.species: (r.lo, r.hi) for r in self.init}
        return np.array([by[s] for s in self.species], dtype=np.int64)

    @cached_property
    def param_bounds(self) -> np.ndarray:
        """(m_cond, 2) array of varying-parameter ranges."""
        b = [p.bounds for p in self.parameters if p.varying]
        return np.array(b, dtype=np.float64).reshape(len(b), 2)

    @cached_property
    def update_matrix(self) -> np.ndarray:
        return np.array([r.update for r in self.reactions], dtype=np.int64)

    @cached_property
    def propensity_function(self):
        """Compiled ``f(x, p) -> list`` of all reaction propensities."""
        return compile_vector(
            [r.propensity for r in self.reactions],
            self.species,
            [p.name for p in self.parameters],
        )

    def full_params(self, theta: Sequence[float] = ()) -> tuple[float, ...]:
        """Merge fixed values with the varying-parameter vector ``theta``."""
        theta = tuple(float(t) for t in theta)
        if len(theta) != self.m_cond:
            raise ModelError(f"expected {self.m_cond} varying parameter(s), got {len(theta)}")
        it = iter(theta)
        return tuple(next(it) if p.varying else p.value for p in self.parameters)

    def propensities(self, state: Sequence[float], theta: Sequence[float] = ()) -> list[float]:
        return self.propensity_function(list(state), self.full_params(theta))

    def to_text(self) -> str:
        """Canonical model-file text; parses back to an equal network."""
        from .parse import format_network

        return format_network(self)

    # -- validation -------------------------------------------------------

    def _validate(self):
        if self.n < 1:
            raise ModelError("no species declared")
        if self.m_rxn < 1:
            raise ModelError("no reactions")
        _unique("species", self.species)
        _unique("parameter", [p.name for p in self.parameters])
        _unique("reaction", [r.name for r in self.reactions])
        clash = set(self.species) & {p.name for p in self.parameters}
        if clash:
            raise DuplicateNameError(f"duplicate name(s) used as species and parameter: {sorted(clash)}")
        _unique("observable", self.observables)
        for s in self.observables:
            if s not in self.species:
                raise UndeclaredIdentifierError(f"undeclared identifier {s!r} in observe")
        declared = {r.species for r in self.init}
        _unique("init", [r.species for r in self.init])
        for s in declared - set(self.species):
            raise UndeclaredIdentifierError(f"undeclared identifier {s!r} in init")
        missing = [s for s in self.species if s not in declared]
        if missing:
            raise ModelError(f"no initial range for species {missing}")
        seen: set[str] = set()
        for c in self.constraints:
            for s in c.species:
                if s not in self.species:
                    raise UndeclaredIdentifierError(f"undeclared identifier {s!r} in constraint")
                if s in seen:
                    raise ModelError(f"species {s!r} appears in more than one constraint")
                seen.add(s)
            bounds = self.init_bounds[[self.species.index(s) for s in c.species]]
            if not bounds[:, 0].sum() <= c.total <= bounds[:, 1].sum():
                raise ModelError(f"infeasible constraint {' + '.join(c.species)} = {c.total}")
        pnames = {p.name: p for p in self.parameters}
        for r in self.reactions:
            if len(r.update) != self.n:
                raise ModelError(f"reaction {r.name}: update vector has wrong length")
            sp, pa = references(r.propensity)
            for s in sorted(sp - set(self.species)):
                raise UndeclaredIdentifierError(f"undeclared identifier {s!r} in reaction {r.name}")
            for s in sorted(pa - set(pnames)):
                raise UndeclaredIdentifierError(f"undeclared identifier {s!r} in reaction {r.name}")
            _check_exponents(r.propensity, pnames, r.name)
        self._check_boundaries()

    def _check_boundaries(self):
        """Numeric smoke test: a reaction consuming d copies of X must have
        zero propensity whenever X < d."""
        rng = np.random.default_rng(0)
        f = self.propensity_function
        thetas = [tuple(self.param_bounds[:, 0]), tuple(self.param_bounds[:, 1])]
        hi = np.maximum(self.init_bounds[:, 1], 2)
        for j, r in enumerate(self.reactions):
            for i, d in enumerate(r.update):
                if d >= 0:
                    continue
                for v, theta, trial in itertools.product(range(-d), thetas, range(4)):
                    x = rng.integers(0, hi + 1).astype(float) if trial else np.ones(self.n)
                    x[i] = v
                    try:
                        a = f(list(x), self.full_params(theta))[j]
                    except (PropensityDomainError, ZeroDivisionError):
                        a = math.nan
                    if a != 0:
                        raise ModelError(
                            f"reaction {r.name}: propensity is {a} with "
                            f"{self.species[i]}={v}, which would drive it negative"
                        )


def _unique(kind: str, names: Sequence[str]):
    seen = set()
    for n in names:
        if n in seen:
            raise DuplicateNameError(f"duplicate {kind} name {n!r}")
        seen.add(n)


def _check_exponents(e: Expr, params: dict, label: str):
    if not isinstance(e, BinOp):
        return
    if e.op == "^":
        r = e.right
        if isinstance(r, Num):
            val = r.value
        elif isinstance(r, Param) and not params[r.name].varying:
            val = params[r.name].value
        else:
            raise ModelError(f"reaction {label}: exponent {to_text(r)} must be a fixed integer")
        if val != int(val) or val < 0:
            raise ModelError(f"reaction {label}: exponent {val} is not a nonnegative integer")
    _check_exponents(e.left, params, label)
    _check_exponents(e.right, params, label)
