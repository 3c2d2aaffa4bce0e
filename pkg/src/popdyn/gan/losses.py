"""Wasserstein losses with gradient penalty.

The critic maximises E[C(real)] - E[C(fake)] - lam * GP; we minimise the
negation. The generator minimises -E[C(fake)].
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import torch

__all__ = ["CriticTerms", "gradient_penalty", "critic_loss", "generator_loss"]

CriticFn = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


class CriticTerms(NamedTuple):
    loss: torch.Tensor
    wasserstein: torch.Tensor
    penalty: torch.Tensor


def gradient_penalty(
    critic: CriticFn,
    x_real: torch.Tensor,
    x_fake: torch.Tensor,
    cond: torch.Tensor,
    eps: torch.Tensor,
) -> torch.Tensor:
    """Mean of (||grad_x C(x_hat, cond)||_2 - 1)^2 over interpolates
    x_hat = eps*x_real + (1-eps)*x_fake, one eps per pair.

    The gradient is taken w.r.t. the trajectory only; ``cond`` is a constant.
    The graph is kept so the penalty can itself be differentiated.
    """
    if not (x_real.shape[0] == x_fake.shape[0] == cond.shape[0]):
        raise ValueError("real, fake and condition batches must have equal size")
    eps = eps.reshape(-1, *([1] * (x_real.dim() - 1)))
    x_hat = (eps * x_real + (1 - eps) * x_fake).detach().requires_grad_(True)
    scores = critic(x_hat, cond)
    grad = None
    if scores.requires_grad:
        (grad,) = torch.autograd.grad(scores.sum(), x_hat, create_graph=True, allow_unused=True)
    if grad is None:
        # critic ignores its input
        grad = torch.zeros_like(x_hat)
    norms = grad.flatten(1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def critic_loss(
    critic: CriticFn,
    generator: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
    x_real: torch.Tensor,
    cond: torch.Tensor,
    z: torch.Tensor,
    eps: torch.Tensor,
    lam: float = 10.0,
    return_terms: bool = False,
):
    """mean C(fake) - mean C(real) + lam * GP, with fakes generated from the
    real samples' conditions (generator weights held fixed)."""
    with torch.no_grad():
        x_fake = generator(cond, z)
    real = critic(x_real, cond).mean()
    fake = critic(x_fake, cond).mean()
    gp = gradient_penalty(critic, x_real, x_fake, cond, eps)
    loss = fake - real + lam * gp
    if return_terms:
        return CriticTerms(loss, (real - fake).detach(), gp.detach())
    return loss


def generator_loss(
    critic: CriticFn,
    generator: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
    cond: torch.Tensor,
    z: torch.Tensor,
) -> torch.Tensor:
    return -critic(generator(cond, z), cond).mean()
