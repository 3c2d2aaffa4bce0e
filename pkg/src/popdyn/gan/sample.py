"""Draw abstract trajectories from a trained generator."""
from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from .networks import Generator

__all__ = ["sample_trajectories", "sample_scaled"]


def sample_scaled(gen: Generator, cond: np.ndarray, seed: int, chunk: int = 4096) -> np.ndarray:
    """Generator output for each row of a scaled condition matrix, ``[B, H, n_obs]``."""
    dtype = next(gen.parameters()).dtype
    cond_t = torch.as_tensor(np.asarray(cond), dtype=dtype)
    g = torch.Generator().manual_seed(int(seed))
    was_training = gen.training
    gen.eval()
    outs = []
    try:
        with torch.no_grad():
            for i in range(0, cond_t.shape[0], chunk):
                c = cond_t[i:i + chunk]
                z = torch.randn(c.shape[0], gen.config.noise_dim, generator=g, dtype=dtype)
                outs.append(gen(c, z))
    finally:
        gen.train(was_training)
    if not outs:
        return np.empty((0, gen.config.H, gen.config.n_obs))
    return torch.cat(outs).double().numpy()


def sample_trajectories(
    gen: Generator,
    s0: Sequence[float],
    theta: Sequence[float],
    p: int,
    bounds,
    seed: int,
    round: bool = False,
) -> np.ndarray:
    """``p`` unscaled trajectories ``[p, H+1, n_obs]`` from one setting.

    ``s0`` is the observed part of the initial state. Row 0 of every
    trajectory is ``s0`` itself; later rows are clamped at zero.
    """
    if bounds is None:
        raise ValueError("scaling bounds are required to sample trajectories")
    if p < 1:
        raise ValueError("p must be >= 1")
    c = gen.config
    s0 = np.asarray(s0, dtype=np.float64).reshape(-1)
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if s0.size != c.n_obs or theta.size != c.m_cond:
        raise ValueError(
            f"setting has {s0.size} states and {theta.size} parameters, "
            f"generator expects {c.n_obs} and {c.m_cond}"
        )
    cond = bounds.scale_condition(s0, theta)
    y = sample_scaled(gen, np.repeat(cond[None, :], p, axis=0), seed)
    x = np.maximum(bounds.unscale_states(y), 0.0)
    if round:
        x = np.rint(x)
    out = np.empty((p, c.H + 1, c.n_obs), dtype=np.float64)
    out[:, 0, :] = s0
    out[:, 1:, :] = x
    return out
