"""Per-trajectory wall-clock cost of SSA, tau-leaping and abstract generation."""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch

from .. import rng as _rng
from ..simulate import sample_initial_setting, simulate_batch

__all__ = ["TimingTable", "timing_benchmark", "time_generator", "time_simulator", "METHODS"]

METHODS = ("ssa", "tau", "abstract")


@dataclass
class TimingTable:
    """``seconds[(method, batch)]`` is the mean wall time per trajectory."""

    model: str
    seconds: dict[tuple[str, int], float] = field(default_factory=dict)

    def rows(self):
        for (m, b), s in sorted(self.seconds.items(), key=lambda kv: (METHODS.index(kv[0][0]), kv[0][1])):
            yield {"model": self.model, "method": m, "batch": b, "seconds_per_trajectory": s}


@contextmanager
def _single_thread():
    prev = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        yield
    finally:
        torch.set_num_threads(prev)


def _repeat(fn, batch: int, min_time: float, min_reps: int) -> float:
    fn()  # warm-up
    reps, total = 0, 0.0
    while reps < min_reps or total < min_time:
        t = time.perf_counter()
        fn()
        total += time.perf_counter() - t
        reps += 1
    return total / (reps * batch)


def time_generator(gen, bounds, setting_obs, theta, batch: int, seed: int = 0,
                   min_time: float = 0.2, min_reps: int = 3) -> float:
    """Seconds per abstract trajectory when generating ``batch`` at once."""
    from ..gan.sample import sample_trajectories

    with _single_thread():
        return _repeat(
            lambda: sample_trajectories(gen, setting_obs, theta, batch, bounds, seed),
            batch, min_time, min_reps,
        )


def time_simulator(net, grid, batch: int, seed: int = 0, method: str = "ssa",
                   tau: Optional[float] = None, min_time: float = 0.0, min_reps: int = 1) -> float:
    setting = sample_initial_setting(net, _rng.stream(seed, _rng.SETTING, 0))
    settings = [setting] * batch
    return _repeat(
        lambda: simulate_batch(net, settings, grid, seed, method=method, tau=tau, workers=1),
        batch, min_time, min_reps,
    )


def timing_benchmark(
    net,
    grid,
    gen=None,
    bounds=None,
    batch_sizes: Sequence[int] = (1, 200, 2000),
    seed: int = 0,
    tau: Optional[float] = None,
    methods: Sequence[str] = METHODS,
) -> TimingTable:
    """Single-worker timing table; warm-up runs are excluded.

    ``tau`` defaults to a quarter of the grid step.
    """
    table = TimingTable(net.name)
    tau = grid.dt / 4 if tau is None else tau
    setting = sample_initial_setting(net, _rng.stream(seed, _rng.SETTING, 0))
    s0_obs = np.array([setting.s0[i] for i in net.observed_indices], dtype=np.float64)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
        if m == "abstract" and (gen is None or bounds is None):
            raise ValueError("abstract timing needs a generator and its scaling bounds")
        for b in batch_sizes:
            if m == "abstract":
                table.seconds[(m, b)] = time_generator(gen, bounds, s0_obs, setting.theta, b, seed)
            else:
                table.seconds[(m, b)] = time_simulator(net, grid, b, seed, m, tau)
    return table
