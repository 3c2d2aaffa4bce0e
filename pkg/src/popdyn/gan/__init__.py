"""Conditional Wasserstein GAN for trajectory generation."""
from .io import ConfigMismatchError, SavedModel, load_into, load_params, save_params
from .losses import critic_loss, generator_loss, gradient_penalty
from .networks import (
    Critic, CriticConfig, Generator, GeneratorConfig, critic_forward, critic_input, generator_forward,
)
from .sample import sample_scaled, sample_trajectories
from .train import TrainConfig, TrainingDiverged, TrainLog, train, updates_per_epoch

__all__ = [
    "GeneratorConfig", "CriticConfig", "Generator", "Critic", "generator_forward", "critic_forward",
    "critic_input", "gradient_penalty", "critic_loss", "generator_loss", "TrainConfig", "TrainLog",
    "TrainingDiverged", "train", "updates_per_epoch", "sample_trajectories", "sample_scaled",
    "save_params", "load_params", "load_into", "SavedModel", "ConfigMismatchError",
]
