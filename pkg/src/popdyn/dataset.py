"""Training and test sets of (initial setting, trajectory) pairs.

Entries are scaled to [-1, 1] with a per-dimension affine map
``y = 2 (x - lo) / (hi - lo) - 1``. Species bounds come from the training
data together with the declared initial ranges; parameter bounds are the
declared ranges. Test sets should reuse the training bounds.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as _rng
from .crn.network import ReactionNetwork, SimGrid
from .fileformat import IntegrityError, read_container, verify_checksum, write_container
from .simulate import InitialSetting, sample_initial_setting, sample_initial_state, simulate_batch

__all__ = [
    "OutOfBoundsWarning", "ScalingBounds", "Dataset", "scale", "unscale",
    "generate_training_set", "generate_test_set", "write_dataset", "read_dataset",
]


MAGIC = b"PDABSET1"
VERSION = 1
TRAIN, TEST = 0, 1
MIN_TEST_REPLICAS = 100


class OutOfBoundsWarning(UserWarning):
    """Scaled values fell outside [-1, 1]."""


def scale(x, lo, hi):
    """Affine map of ``[lo, hi]`` onto ``[-1, 1]``; values outside are not clamped."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(lo >= hi):
        raise ValueError("scaling bounds need lo < hi")
    y = 2.0 * (np.asarray(x, dtype=np.float64) - lo) / (hi - lo) - 1.0
    if np.any(np.abs(y) > 1.0):
        warnings.warn("values outside the scaling bounds", OutOfBoundsWarning, stacklevel=2)
    return y


def unscale(y, lo, hi):
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(lo >= hi):
        raise ValueError("scaling bounds need lo < hi")
    return (np.asarray(y, dtype=np.float64) + 1.0) * 0.5 * (hi - lo) + lo


@dataclass(eq=False)
class ScalingBounds:
    species: np.ndarray  # (n_obs, 2)
    params: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))  # (m_cond, 2)

    def __post_init__(self):
        self.species = np.asarray(self.species, dtype=np.float64).reshape(-1, 2)
        self.params = np.asarray(self.params, dtype=np.float64).reshape(-1, 2)
        for b in (self.species, self.params):
            if np.any(b[:, 0] >= b[:, 1]):
                raise ValueError("scaling bounds need lo < hi in every dimension")

    def __eq__(self, other):
        return (
            isinstance(other, ScalingBounds)
            and np.array_equal(self.species, other.species)
            and np.array_equal(self.params, other.params)
        )

    def scale_states(self, x):
        return scale(x, self.species[:, 0], self.species[:, 1])

    def unscale_states(self, y):
        return unscale(y, self.species[:, 0], self.species[:, 1])

    def scale_params(self, theta):
        if len(self.params) == 0:
            return np.zeros(np.shape(theta), dtype=np.float64)
        return scale(theta, self.params[:, 0], self.params[:, 1])

    def unscale_params(self, y):
        if len(self.params) == 0:
            return np.zeros(np.shape(y), dtype=np.float64)
        return unscale(y, self.params[:, 0], self.params[:, 1])

    def scale_condition(self, s0_obs, theta=()):
        """Scaled condition vector ``[s0_obs, theta]`` (last axis)."""
        s = self.scale_states(np.asarray(s0_obs, dtype=np.float64))
        t = np.asarray(theta, dtype=np.float64).reshape(s.shape[:-1] + (len(self.params),))
        return np.concatenate([s, self.scale_params(t)], axis=-1)

    def to_json(self) -> dict:
        return {"species": self.species.tolist(), "params": self.params.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "ScalingBounds":
        return cls(np.array(d["species"], dtype=np.float64), np.array(d["params"], dtype=np.float64))


@dataclass(eq=False)
class Dataset:
    settings: np.ndarray  # float32 [N*k, n_obs + m_cond]
    trajectories: np.ndarray  # float32 [N*k, H+1, n_obs]
    bounds: ScalingBounds
    model: str
    grid: SimGrid
    N: int
    k: int
    observables: tuple[str, ...]
    seed: int
    role: str = "train"
    model_source: str = ""

    @property
    def n_obs(self) -> int:
        return len(self.observables)

    @property
    def m_cond(self) -> int:
        return self.settings.shape[1] - self.n_obs

    def __len__(self) -> int:
        return self.settings.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.settings, other.settings)
            and np.array_equal(self.trajectories, other.trajectories)
            and self.settings.dtype == other.settings.dtype
            and self.trajectories.dtype == other.trajectories.dtype
            and self.bounds == other.bounds
            and self._meta() == other._meta()
        )

    def _meta(self) -> dict:
        return {
            "model": self.model,
            "grid": {"t0": self.grid.t0, "dt": self.grid.dt, "H": self.grid.H},
            "n_obs": self.n_obs,
            "m_cond": self.m_cond,
            "N": self.N,
            "k": self.k,
            "observables": list(self.observables),
            "bounds": self.bounds.to_json(),
            "seed": self.seed,
            "role": self.role,
            "model_source": self.model_source,
        }

    def unscaled_trajectories(self) -> np.ndarray:
        return self.bounds.unscale_states(self.trajectories)

    def by_setting(self) -> tuple[np.ndarray, np.ndarray]:
        """Unscaled ``(s0_obs [N, n_obs], theta [N, m_cond])`` and trajectories
        ``[N, k, H+1, n_obs]`` grouped per setting."""
        H1 = self.trajectories.shape[1]
        trajs = self.unscaled_trajectories().reshape(self.N, self.k, H1, self.n_obs)
        cond = self.settings.reshape(self.N, self.k, -1)[:, 0, :].astype(np.float64)
        s0 = self.bounds.unscale_states(cond[:, : self.n_obs])
        theta = self.bounds.unscale_params(cond[:, self.n_obs:])
        return np.concatenate([s0, theta], axis=1), trajs


def _sample(net: ReactionNetwork, grid: SimGrid, N: int, k: int, seed: int, role: int, workers,
            method="ssa", tau=None):
    if N < 1 or k < 1:
        raise ValueError("N and k must be >= 1")
    settings: list[InitialSetting] = []
    keys = []
    per_setting: list[InitialSetting] = []
    for i in range(N):
        base = sample_initial_setting(net, _rng.stream(seed, role, _rng.SETTING, i))
        per_setting.append(base)
        obs = {j: base.s0[j] for j in net.observed_indices}
        for j in range(k):
            if net.hidden_indices:
                s0 = sample_initial_state(net, _rng.stream(seed, role, _rng.HIDDEN, i, j), fixed=obs)
            else:
                s0 = base.s0
            settings.append(InitialSetting(s0, base.theta))
            keys.append((role, _rng.TRAJECTORY, i, j))
    trajs = simulate_batch(net, settings, grid, seed, keys=keys, method=method, tau=tau, workers=workers)
    obs_trajs = trajs[..., list(net.observed_indices)].astype(np.float64)
    s0_obs = np.array([[s.s0[j] for j in net.observed_indices] for s in settings], dtype=np.float64)
    theta = np.array([s.theta for s in settings], dtype=np.float64).reshape(len(settings), net.m_cond)
    return s0_obs, theta, obs_trajs


def _bounds_from(net: ReactionNetwork, trajs: np.ndarray) -> ScalingBounds:
    decl = net.init_bounds[list(net.observed_indices)].astype(np.float64)
    lo = np.minimum(trajs.min(axis=(0, 1)), decl[:, 0])
    hi = np.maximum(trajs.max(axis=(0, 1)), decl[:, 1])
    hi = np.where(hi > lo, hi, lo + 1.0)
    params = net.param_bounds.copy()
    params[:, 1] = np.where(params[:, 1] > params[:, 0], params[:, 1], params[:, 0] + 1.0)
    return ScalingBounds(np.stack([lo, hi], axis=1), params)


def _assemble(net, grid, N, k, seed, role_name, s0_obs, theta, trajs, bounds) -> Dataset:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OutOfBoundsWarning)
        cond = bounds.scale_condition(s0_obs, theta)
        scaled = bounds.scale_states(trajs)
    if caught:
        warnings.warn(f"{role_name} set has values outside the scaling bounds", OutOfBoundsWarning, stacklevel=3)
    return Dataset(
        settings=cond.astype(np.float32),
        trajectories=scaled.astype(np.float32),
        bounds=bounds,
        model=net.name,
        grid=grid,
        N=N,
        k=k,
        observables=net.observables,
        seed=int(seed),
        role=role_name,
        model_source=net.to_text(),
    )


def generate_training_set(
    net: ReactionNetwork,
    grid: SimGrid,
    N: int,
    k: int,
    seed: int,
    workers: Optional[int] = None,
    method: str = "ssa",
    tau: Optional[float] = None,
) -> Dataset:
    """N sampled settings x k SSA replicas each, projected and scaled.

    Under partial observability the observed part of s0 is shared by the k
    replicas while hidden species are resampled for every replica.
    ``method="tau"`` swaps the exact simulator for tau-leaping.
    """
    s0_obs, theta, trajs = _sample(net, grid, N, k, seed, TRAIN, workers, method, tau)
    bounds = _bounds_from(net, trajs)
    return _assemble(net, grid, N, k, seed, "train", s0_obs, theta, trajs, bounds)


def generate_test_set(
    net: ReactionNetwork,
    grid: SimGrid,
    N: int,
    k: int,
    seed: int,
    bounds: Optional[ScalingBounds] = None,
    workers: Optional[int] = None,
    method: str = "ssa",
    tau: Optional[float] = None,
) -> Dataset:
    """Like :func:`generate_training_set` with many replicas per setting.

    Pass the training ``bounds``; without them bounds are derived from the
    test data itself.
    """
    if k < MIN_TEST_REPLICAS:
        warnings.warn(
            f"k={k} replicas per setting is too few for empirical distributions",
            UserWarning,
            stacklevel=2,
        )
    s0_obs, theta, trajs = _sample(net, grid, N, k, seed, TEST, workers, method, tau)
    if bounds is None:
        bounds = _bounds_from(net, trajs)
    return _assemble(net, grid, N, k, seed, "test", s0_obs, theta, trajs, bounds)


def write_dataset(ds: Dataset, path) -> None:
    settings = np.ascontiguousarray(ds.settings, dtype="<f4")
    trajs = np.ascontiguousarray(ds.trajectories, dtype="<f4")
    header = dict(ds._meta(), version=VERSION)
    write_container(path, MAGIC, header, [settings.tobytes(), trajs.tobytes()])


def read_dataset(path) -> Dataset:
    header, payload = read_container(path, MAGIC, VERSION)
    try:
        M = header["N"] * header["k"]
        H = header["grid"]["H"]
        n_obs, m_cond = header["n_obs"], header["m_cond"]
    except (KeyError, TypeError) as exc:
        raise IntegrityError(f"{path}: incomplete header ({exc})") from None
    n_set = M * (n_obs + m_cond) * 4
    n_traj = M * (H + 1) * n_obs * 4
    if len(payload) != n_set + n_traj:
        raise IntegrityError(
            f"{path}: payload is {len(payload)} bytes, header implies {n_set + n_traj}"
        )
    verify_checksum(path, header, payload)
    settings = np.frombuffer(payload[:n_set], dtype="<f4").reshape(M, n_obs + m_cond).astype(np.float32)
    trajs = np.frombuffer(payload[n_set:], dtype="<f4").reshape(M, H + 1, n_obs).astype(np.float32)
    g = header["grid"]
    return Dataset(
        settings=settings,
        trajectories=trajs,
        bounds=ScalingBounds.from_json(header["bounds"]),
        model=header["model"],
        grid=SimGrid(g["t0"], g["dt"], g["H"]),
        N=header["N"],
        k=header["k"],
        observables=tuple(header["observables"]),
        seed=header["seed"],
        role=header.get("role", "train"),
        model_source=header.get("model_source", ""),
    )
