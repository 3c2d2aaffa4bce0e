"""Two temporal-property templates checked on grid-sampled trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = ["EventuallyAlways", "AbsorbingValidity", "TemporalProperty", "check_property", "satisfied"]


@dataclass(frozen=True)
class EventuallyAlways:
    """From some grid step on, ``species <cmp> threshold`` holds at every step."""

    species: str
    comparator: str
    threshold: float

    def __post_init__(self):
        if self.comparator not in ("<", ">"):
            raise ValueError(f"comparator must be '<' or '>', got {self.comparator!r}")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")


@dataclass(frozen=True)
class AbsorbingValidity:
    """Once ``species`` equals ``value`` it stays there (within ``tol``)."""

    species: str
    value: float = 0.0
    tol: float = 0.5


TemporalProperty = Union[EventuallyAlways, AbsorbingValidity]


def satisfied(trajs: np.ndarray, observables: Sequence[str], prop: TemporalProperty) -> np.ndarray:
    """Boolean verdict per trajectory; ``trajs`` is ``[samples, H+1, n_obs]``."""
    try:
        col = list(observables).index(prop.species)
    except ValueError:
        raise ValueError(f"species {prop.species!r} is not among the observables {list(observables)}") from None
    x = np.asarray(trajs, dtype=np.float64)[..., col]
    if isinstance(prop, EventuallyAlways):
        ok = x < prop.threshold if prop.comparator == "<" else x > prop.threshold
        # suffix[j] is true when the comparison holds at every step >= j
        suffix = np.flip(np.logical_and.accumulate(np.flip(ok, axis=-1), axis=-1), axis=-1)
        return suffix.any(axis=-1)
    if isinstance(prop, AbsorbingValidity):
        hit = np.abs(x - prop.value) <= prop.tol
        # after the first hit every later value must also be a hit
        seen = np.logical_or.accumulate(hit, axis=-1)
        return np.all(~seen | hit, axis=-1)
    raise TypeError(f"unknown property {prop!r}")


def check_property(trajs, observables: Sequence[str], prop: TemporalProperty) -> float:
    """Fraction of trajectories satisfying ``prop``."""
    verdict = satisfied(trajs, observables, prop)
    if verdict.size == 0:
        raise ValueError("no trajectories to check")
    return float(verdict.mean())
