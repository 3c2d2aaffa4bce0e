"""Learn generative surrogates of stochastic reaction networks from simulated trajectories."""

__version__ = "0.1.0"
