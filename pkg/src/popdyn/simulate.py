"""Stochastic simulation on a fixed observation grid.

Two engines are provided: Gillespie's direct method (exact) and fixed-step
tau-leaping (approximate). Both return an ``(H+1, n)`` integer array whose
row ``i`` is the state at ``t0 + i*dt``; row 0 is the initial state.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Sequence

import numpy as np

from . import rng as _rng
from .crn.expr import PropensityDomainError
from .crn.network import ModelError, ReactionNetwork, SimGrid

__all__ = [
    "InitialSetting", "ssa_trajectory", "tau_leap_trajectory", "project",
    "sample_initial_setting", "sample_initial_state", "simulate_batch",
]

_BUF = 256


@dataclass(frozen=True)
class InitialSetting:
    s0: tuple[int, ...]
    theta: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "s0", tuple(int(v) for v in self.s0))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))


def _sparse_updates(net: ReactionNetwork) -> list[list[tuple[int, int]]]:
    return [[(i, d) for i, d in enumerate(r.update) if d] for r in net.reactions]


def _check_setting(net: ReactionNetwork, setting: InitialSetting):
    if len(setting.s0) != net.n:
        raise ModelError(f"initial state has {len(setting.s0)} entries, network has {net.n} species")
    if any(v < 0 for v in setting.s0):
        raise ModelError("initial state has negative counts")


def ssa_trajectory(
    net: ReactionNetwork, setting: InitialSetting, grid: SimGrid, seed=0
) -> np.ndarray:
    """Exact CTMC sample (direct method) recorded on ``grid``.

    The value at grid time t_i is the state after the last event at or before
    t_i. Once the total propensity is zero the state stays frozen.
    """
    _check_setting(net, setting)
    gen = _rng.as_generator(seed)
    f = net.propensity_function
    p = net.full_params(setting.theta)
    updates = _sparse_updates(net)
    H = grid.H
    times = grid.times.tolist()
    out = np.empty((H + 1, net.n), dtype=np.int64)
    x = [float(v) for v in setting.s0]
    out[0] = setting.s0
    t = times[0]
    nxt = 1
    buf = gen.random(_BUF).tolist()
    bi = 0
    log = math.log
    while nxt <= H:
        a = f(x, p)
        a0 = sum(a)
        if not a0 > 0:
            if a0 == 0 and min(a) >= 0:
                break
            raise PropensityDomainError(f"invalid propensities {a} at state {x}")
        if bi + 2 > _BUF:
            buf = gen.random(_BUF).tolist()
            bi = 0
        u1, u2 = buf[bi], buf[bi + 1]
        bi += 2
        t_new = t - log(1.0 - u1) / a0
        while nxt <= H and times[nxt] < t_new:
            out[nxt] = x
            nxt += 1
        if nxt > H:
            break
        target = u2 * a0
        acc = 0.0
        j = 0
        last = len(a) - 1
        for j, aj in enumerate(a):
            if aj < 0:
                raise PropensityDomainError(f"negative propensity {aj} at state {x}")
            acc += aj
            if target < acc and aj > 0:
                break
        else:
            # rounding pushed target past the cumulative sum: take the last nonzero rate
            j = max(i for i in range(last + 1) if a[i] > 0)
        for i, d in updates[j]:
            x[i] += d
        t = t_new
    if nxt <= H:
        out[nxt:] = x
    return out


def tau_leap_trajectory(
    net: ReactionNetwork,
    setting: InitialSetting,
    grid: SimGrid,
    tau: float,
    seed=0,
    return_clamps: bool = False,
):
    """Fixed-step tau-leaping recorded on ``grid``.

    Each leap fires Poisson(a_j * tau) copies of every reaction; counts driven
    negative are clamped to zero and counted. Leaps are shortened where needed
    so that every grid time is hit exactly.
    """
    if not 0 < tau <= grid.dt:
        raise ValueError(f"tau must satisfy 0 < tau <= dt, got {tau}")
    _check_setting(net, setting)
    gen = _rng.as_generator(seed)
    f = net.propensity_function
    p = net.full_params(setting.theta)
    U = net.update_matrix.astype(np.float64)
    H = grid.H
    out = np.empty((H + 1, net.n), dtype=np.int64)
    x = np.array(setting.s0, dtype=np.float64)
    out[0] = setting.s0
    clamps = 0
    # leaps per grid interval; the last one absorbs the remainder
    steps = max(1, int(math.ceil(grid.dt / tau - 1e-9)))
    last = grid.dt - (steps - 1) * tau
    for i in range(1, H + 1):
        for s in range(steps):
            h = tau if s < steps - 1 else last
            a = np.asarray(f(x.tolist(), p))
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise PropensityDomainError(f"invalid propensities {a.tolist()} at state {x.tolist()}")
            if not a.any():
                continue
            k = gen.poisson(a * h)
            x += k @ U
            neg = x < 0
            if neg.any():
                clamps += int(neg.sum())
                x[neg] = 0.0
        out[i] = x
    if return_clamps:
        return out, clamps
    return out


def project(traj: np.ndarray, observables: Sequence[int]) -> np.ndarray:
    """Restrict trajectories (last axis = species) to the given column indices."""
    idx = list(observables)
    if not idx:
        raise ValueError("empty observable set")
    return np.asarray(traj)[..., idx]


# -- initial settings -------------------------------------------------------


@lru_cache(maxsize=4096)
def _completions(bounds: tuple[tuple[int, int], ...], total: int) -> int:
    """Number of integer vectors within ``bounds`` summing to ``total``."""
    if not bounds:
        return int(total == 0)
    (lo, hi), rest = bounds[0], bounds[1:]
    return sum(_completions(rest, total - v) for v in range(lo, min(hi, total) + 1))


def _sample_simplex(bounds: list[tuple[int, int]], total: int, gen: np.random.Generator) -> list[int]:
    """Uniform draw over integer points in the box with the given sum."""
    out = []
    b = tuple(bounds)
    for k in range(len(b)):
        lo, hi = b[k]
        rest = b[k + 1:]
        vals = list(range(lo, min(hi, total) + 1))
        w = np.array([_completions(rest, total - v) for v in vals], dtype=np.float64)
        if w.sum() == 0:
            raise ModelError("infeasible initial-state constraints")
        v = vals[int(gen.choice(len(vals), p=w / w.sum()))]
        out.append(v)
        total -= v
    return out


def sample_initial_state(
    net: ReactionNetwork, seed=0, fixed: Optional[Mapping[int, int]] = None
) -> tuple[int, ...]:
    """Uniform initial state over the declared box and constraints.

    ``fixed`` pins some species (by index); the remaining ones are drawn
    conditionally, which is how hidden species are resampled under partial
    observability.
    """
    gen = _rng.as_generator(seed)
    fixed = dict(fixed or {})
    bounds = net.init_bounds
    s0 = [0] * net.n
    grouped: set[int] = set()
    for c in net.constraints:
        idx = [net.species.index(s) for s in c.species]
        grouped.update(idx)
        free = [i for i in idx if i not in fixed]
        total = c.total - sum(fixed[i] for i in idx if i in fixed)
        for i in idx:
            if i in fixed:
                s0[i] = int(fixed[i])
        if not free:
            if total != 0:
                raise ModelError("infeasible initial-state constraints")
            continue
        vals = _sample_simplex([tuple(bounds[i]) for i in free], total, gen)
        for i, v in zip(free, vals):
            s0[i] = v
    for i in range(net.n):
        if i in grouped:
            continue
        if i in fixed:
            s0[i] = int(fixed[i])
        else:
            s0[i] = int(gen.integers(bounds[i, 0], bounds[i, 1] + 1))
    return tuple(s0)


def sample_initial_setting(net: ReactionNetwork, seed=0) -> InitialSetting:
    """Draw s0 (all species, including unobserved) and the varying parameters."""
    gen = _rng.as_generator(seed)
    s0 = sample_initial_state(net, gen)
    theta = tuple(float(gen.uniform(lo, hi)) for lo, hi in net.param_bounds)
    return InitialSetting(s0, theta)


# -- batches ----------------------------------------------------------------


def _run_chunk(args):
    net, grid, method, tau, seed, jobs = args
    out = []
    for key, s0, theta in jobs:
        gen = _rng.stream(seed, *key)
        setting = InitialSetting(s0, theta)
        if method == "ssa":
            out.append(ssa_trajectory(net, setting, grid, gen))
        else:
            out.append(tau_leap_trajectory(net, setting, grid, tau, gen))
    return out


def simulate_batch(
    net: ReactionNetwork,
    settings: Sequence[InitialSetting],
    grid: SimGrid,
    seed: int,
    keys: Optional[Sequence[tuple[int, ...]]] = None,
    method: str = "ssa",
    tau: Optional[float] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Simulate many settings; returns ``(len(settings), H+1, n)``.

    Trajectory ``i`` uses the stream ``(seed, *keys[i])`` (default key
    ``(TRAJECTORY, i)``), so the result does not depend on ``workers``.
    """
    if method not in ("ssa", "tau"):
        raise ValueError(f"unknown method {method!r}")
    if method == "tau" and tau is None:
        raise ValueError("tau-leaping needs a leap size")
    if keys is None:
        keys = [(_rng.TRAJECTORY, i) for i in range(len(settings))]
    jobs = [(tuple(k), s.s0, s.theta) for k, s in zip(keys, settings)]
    n_workers = min(_rng.worker_count(workers), max(1, len(jobs)))
    if n_workers == 1 or len(jobs) < 2 * n_workers:
        parts = _run_chunk((net, grid, method, tau, seed, jobs))
    else:
        size = math.ceil(len(jobs) / (4 * n_workers))
        chunks = [jobs[i:i + size] for i in range(0, len(jobs), size)]
        with ProcessPoolExecutor(n_workers) as ex:
            results = ex.map(_run_chunk, [(net, grid, method, tau, seed, c) for c in chunks])
            parts = [t for r in results for t in r]
    if not parts:
        return np.empty((0, grid.H + 1, net.n), dtype=np.int64)
    return np.stack(parts)
