"""Conditional convolutional generator and critic."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

__all__ = [
    "GeneratorConfig", "CriticConfig", "Generator", "Critic", "generator_forward",
    "critic_forward", "critic_input",
]


@dataclass(frozen=True)
class GeneratorConfig:
    n_obs: int
    m_cond: int
    H: int
    noise_dim: int = 480
    embed_channels: int = 512
    deconv_filters: tuple[int, ...] = (128, 256, 256, 128)
    kernel: int = 4
    stride: int = 2
    leaky_slope: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "deconv_filters", tuple(int(f) for f in self.deconv_filters))
        counts = (self.n_obs, self.H, self.noise_dim, self.embed_channels, *self.deconv_filters)
        if min(counts) < 1 or self.m_cond < 0 or not self.deconv_filters:
            raise ValueError(f"invalid generator config {self}")
        if (self.kernel - self.stride) % 2:
            raise ValueError("kernel - stride must be even for exact length scaling")
        if self.H % self.stride ** len(self.deconv_filters):
            raise ValueError(
                f"H={self.H} is not divisible by {self.stride}^{len(self.deconv_filters)}"
            )

    @property
    def initial_length(self) -> int:
        return self.H // self.stride ** len(self.deconv_filters)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CriticConfig:
    n_obs: int
    m_cond: int
    H: int
    conv_filters: tuple[int, ...] = (64, 64)
    kernel: int = 4
    stride: int = 2
    leaky_slope: float = 0.2
    dropout: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "conv_filters", tuple(int(f) for f in self.conv_filters))
        if min((self.n_obs, self.H, *self.conv_filters)) < 1 or self.m_cond < 0:
            raise ValueError(f"invalid critic config {self}")
        if self.lengths()[-1] < 1:
            raise ValueError(f"critic stack reduces length {self.H + 1} to zero")

    def lengths(self) -> list[int]:
        """Sequence length after each convolution, starting from H+1."""
        out = [self.H + 1]
        for _ in self.conv_filters:
            out.append((out[-1] + 2 - self.kernel) // self.stride + 1)
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def _init(module: nn.Module, seed: int | None):
    gen = None
    if seed is not None:
        gen = torch.Generator().manual_seed(int(seed))
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.Conv1d, nn.ConvTranspose1d)):
            nn.init.xavier_uniform_(m.weight, generator=gen)
            nn.init.zeros_(m.bias)


class Generator(nn.Module):
    """Maps (condition, noise) to a scaled trajectory of shape [B, H, n_obs]."""

    def __init__(self, config: GeneratorConfig, seed: int | None = None):
        super().__init__()
        self.config = c = config
        in_dim = c.n_obs + c.m_cond + c.noise_dim
        self.embed = nn.Linear(in_dim, c.embed_channels * c.initial_length)
        layers: list[nn.Module] = []
        prev = c.embed_channels
        pad = (c.kernel - c.stride) // 2
        for f in c.deconv_filters:
            layers += [
                nn.ConvTranspose1d(prev, f, c.kernel, c.stride, pad),
                nn.BatchNorm1d(f),
                nn.LeakyReLU(c.leaky_slope),
            ]
            prev = f
        self.deconv = nn.Sequential(*layers)
        self.out = nn.Conv1d(prev, c.n_obs, 3, padding=1)
        self.act = nn.LeakyReLU(c.leaky_slope)
        _init(self, seed)

    def forward(self, cond: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        c = self.config
        h = self.act(self.embed(torch.cat([cond, z], dim=1)))
        h = h.reshape(h.shape[0], c.embed_channels, c.initial_length)
        h = self.out(self.deconv(h))
        return torch.tanh(h).transpose(1, 2)


def critic_input(traj: torch.Tensor, cond: torch.Tensor, n_obs: int) -> torch.Tensor:
    """Assemble the [B, n_obs + m_cond, H+1] critic input.

    s0 is prepended as time step 0; the parameters are broadcast along time.
    """
    s0 = cond[:, None, :n_obs]
    theta = cond[:, None, n_obs:].expand(-1, traj.shape[1] + 1, -1)
    x = torch.cat([torch.cat([s0, traj], dim=1), theta], dim=2)
    return x.transpose(1, 2)


class Critic(nn.Module):
    """Scores (trajectory, condition) pairs; returns shape [B]."""

    def __init__(self, config: CriticConfig, seed: int | None = None):
        super().__init__()
        self.config = c = config
        lengths = c.lengths()
        layers: list[nn.Module] = []
        prev = c.n_obs + c.m_cond
        for f, L in zip(c.conv_filters, lengths[1:]):
            layers += [
                nn.Conv1d(prev, f, c.kernel, c.stride, 1),
                nn.LayerNorm([f, L]),
                nn.LeakyReLU(c.leaky_slope),
                nn.Dropout(c.dropout),
            ]
            prev = f
        self.conv = nn.Sequential(*layers)
        self.head = nn.Linear(prev * lengths[-1], 1)
        _init(self, seed)

    def forward(self, traj: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        h = self.conv(critic_input(traj, cond, self.config.n_obs))
        return self.head(h.flatten(1)).squeeze(1)


def _check(name: str, t: torch.Tensor, shape: tuple):
    if tuple(t.shape[1:]) != shape:
        raise ValueError(f"{name} has shape {tuple(t.shape)}, expected [B, {', '.join(map(str, shape))}]")


def generator_forward(gen: Generator, cond: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    c = gen.config
    _check("condition", cond, (c.n_obs + c.m_cond,))
    _check("noise", z, (c.noise_dim,))
    if cond.shape[0] != z.shape[0]:
        raise ValueError("condition and noise batch sizes differ")
    return gen(cond, z)


def critic_forward(critic: Critic, traj: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
    c = critic.config
    _check("trajectory", traj, (c.H, c.n_obs))
    _check("condition", cond, (c.n_obs + c.m_cond,))
    if cond.shape[0] != traj.shape[0]:
        raise ValueError("trajectory and condition batch sizes differ")
    return critic(traj, cond)
