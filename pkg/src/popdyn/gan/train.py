"""Alternating critic/generator optimisation."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import torch

from .losses import critic_loss, generator_loss
from .networks import Critic, CriticConfig, Generator, GeneratorConfig

__all__ = ["TrainConfig", "TrainLog", "TrainingDiverged", "train", "effective_batch", "updates_per_epoch"]

log = logging.getLogger(__name__)


class TrainingDiverged(ArithmeticError):
    """A loss became NaN or infinite."""


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 10.0
    n_critic: int = 5
    m_batch: int = 256
    epochs: int = 200
    lr: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.9)
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.n_critic < 1:
            raise ValueError("n_critic must be >= 1")
        if self.m_batch < 2:
            raise ValueError("batch size must be >= 2")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"unsupported dtype {self.dtype!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainLog:
    """One record per generator update."""

    epoch: list[int] = field(default_factory=list)
    critic_loss: list[float] = field(default_factory=list)
    generator_loss: list[float] = field(default_factory=list)
    penalty: list[float] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)
    critic_updates: int = 0
    generator_updates: int = 0

    COLUMNS = ("step", "epoch", "critic_loss", "generator_loss", "gradient_penalty", "wall_time")

    def __len__(self) -> int:
        return len(self.generator_loss)

    def record(self, epoch, c_loss, g_loss, gp, wall):
        self.epoch.append(epoch)
        self.critic_loss.append(c_loss)
        self.generator_loss.append(g_loss)
        self.penalty.append(gp)
        self.wall_time.append(wall)

    def rows(self):
        for i in range(len(self)):
            yield (i, self.epoch[i], self.critic_loss[i], self.generator_loss[i], self.penalty[i], self.wall_time[i])

    def write_csv(self, path, include_time: bool = True) -> None:
        cols = self.COLUMNS if include_time else self.COLUMNS[:-1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows():
                w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in r[: len(cols)]])


def effective_batch(tcfg: TrainConfig, size: int) -> int:
    return min(tcfg.m_batch, size)


def updates_per_epoch(tcfg: TrainConfig, size: int) -> int:
    """Parameter updates (critic + generator) in one epoch."""
    return (size // effective_batch(tcfg, size)) * (tcfg.n_critic + 1)


def _check_configs(ds, gcfg: GeneratorConfig, ccfg: CriticConfig):
    H = ds.trajectories.shape[1] - 1
    for name, c in (("generator", gcfg), ("critic", ccfg)):
        if (c.n_obs, c.m_cond, c.H) != (ds.n_obs, ds.m_cond, H):
            raise ValueError(
                f"{name} config (n_obs={c.n_obs}, m_cond={c.m_cond}, H={c.H}) does not match "
                f"dataset (n_obs={ds.n_obs}, m_cond={ds.m_cond}, H={H})"
            )


def _finite(value: torch.Tensor, what: str, epoch: int, step: int):
    if not torch.isfinite(value).all():
        raise TrainingDiverged(f"{what} is {value.item()} at epoch {epoch}, generator step {step}")


def train(
    ds,
    gcfg: GeneratorConfig,
    ccfg: CriticConfig,
    tcfg: TrainConfig,
    generator: Optional[Generator] = None,
    critic: Optional[Critic] = None,
    progress=None,
) -> tuple[Generator, TrainLog]:
    """Fit a generator to ``ds`` (a scaled training :class:`Dataset`).

    Each iteration takes ``n_critic`` critic steps, each on a fresh random
    minibatch, then one generator step on fresh noise and freshly drawn
    dataset conditions. An epoch is ``len(ds) // batch`` iterations with the
    batch clamped to the dataset size. ``progress(epoch, log)`` is called
    after each epoch if given.
    """
    _check_configs(ds, gcfg, ccfg)
    dtype = torch.float64 if tcfg.dtype == "float64" else torch.float32
    gen_rng = torch.Generator().manual_seed(int(tcfg.seed))
    G = generator or Generator(gcfg, seed=tcfg.seed * 2 + 1)
    C = critic or Critic(ccfg, seed=tcfg.seed * 2 + 2)
    G.to(dtype).train()
    C.to(dtype).train()
    opt_g = torch.optim.Adam(G.parameters(), lr=tcfg.lr, betas=tcfg.betas)
    opt_c = torch.optim.Adam(C.parameters(), lr=tcfg.lr, betas=tcfg.betas)

    X = torch.as_tensor(np.asarray(ds.trajectories)[:, 1:, :], dtype=dtype)
    Y = torch.as_tensor(np.asarray(ds.settings), dtype=dtype)
    M = X.shape[0]
    b = effective_batch(tcfg, M)
    iters = M // b
    noise = gcfg.noise_dim
    out = TrainLog()
    t_start = time.perf_counter()

    def draw(size):
        return torch.randperm(M, generator=gen_rng)[:size]

    # dropout draws from the global stream; keep it reproducible and local
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(tcfg.seed) + 7919)
        for epoch in range(tcfg.epochs):
            for _ in range(iters):
                for _ in range(tcfg.n_critic):
                    idx = draw(b)
                    z = torch.randn(b, noise, generator=gen_rng, dtype=dtype)
                    eps = torch.rand(b, generator=gen_rng, dtype=dtype)
                    opt_c.zero_grad(set_to_none=True)
                    terms = critic_loss(C, G, X[idx], Y[idx], z, eps, tcfg.lam, return_terms=True)
                    _finite(terms.loss, "critic loss", epoch, len(out))
                    terms.loss.backward()
                    opt_c.step()
                    out.critic_updates += 1
                cond = Y[draw(b)]
                z = torch.randn(b, noise, generator=gen_rng, dtype=dtype)
                opt_g.zero_grad(set_to_none=True)
                g_loss = generator_loss(C, G, cond, z)
                _finite(g_loss, "generator loss", epoch, len(out))
                g_loss.backward()
                opt_g.step()
                # critic gradients from the generator step are discarded
                opt_c.zero_grad(set_to_none=True)
                out.generator_updates += 1
                out.record(
                    epoch,
                    float(terms.loss.detach()),
                    float(g_loss.detach()),
                    float(terms.penalty),
                    time.perf_counter() - t_start,
                )
            if progress is not None:
                progress(epoch, out)
            if iters and epoch % max(1, tcfg.epochs // 10) == 0:
                log.info(
                    "epoch %d critic %.4f generator %.4f gp %.4f",
                    epoch, out.critic_loss[-1], out.generator_loss[-1], out.penalty[-1],
                )
    G.eval()
    return G, out


def count_parameters(module: torch.nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
