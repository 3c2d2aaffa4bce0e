"""Energy-distance two-sample test on trajectory vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .. import rng as _rng

__all__ = ["energy_statistic", "energy_test_pvalue", "EnergyTestReport", "energy_test"]

DEFAULT_PERMUTATIONS = 999


def _points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("energy statistic needs a nonempty [samples, dim] array")
    return x


def energy_statistic(A, B) -> float:
    """2 E|a-b| - E|a-a'| - E|b-b'| with V-statistic averages."""
    A, B = _points(A), _points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError("samples live in different dimensions")
    return float(2.0 * cdist(A, B).mean() - cdist(A, A).mean() - cdist(B, B).mean())


def _statistics(D: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Energy statistics for each labelling row of ``W`` (1 = first sample)."""
    n_a = W.sum(axis=1)
    n_b = D.shape[0] - n_a
    V = 1.0 - W
    DW = W @ D
    aa = np.einsum("ij,ij->i", DW, W)
    ab = np.einsum("ij,ij->i", DW, V)
    bb = np.einsum("ij,ij->i", V @ D, V)
    return 2.0 * ab / (n_a * n_b) - aa / n_a**2 - bb / n_b**2


def energy_test_pvalue(A, B, n_perm: int = DEFAULT_PERMUTATIONS, seed=0, chunk: int = 256) -> float:
    """Permutation p-value ``(1 + #{perm stat >= observed}) / (n_perm + 1)``.

    Each permutation relabels the pooled sample uniformly at random.
    """
    if n_perm < 99:
        raise ValueError("n_perm must be >= 99")
    A, B = _points(A), _points(B)
    pooled = np.concatenate([A, B])
    n, n_a = pooled.shape[0], A.shape[0]
    D = cdist(pooled, pooled)
    w0 = np.zeros((1, n))
    w0[0, :n_a] = 1.0
    observed = _statistics(D, w0)[0]
    tol = 1e-12 * max(1.0, abs(observed))
    gen = _rng.as_generator(seed)
    hits = 0
    done = 0
    while done < n_perm:
        m = min(chunk, n_perm - done)
        order = np.argsort(gen.random((m, n)), axis=1)
        W = (order < n_a).astype(np.float64)
        hits += int(np.sum(_statistics(D, W) >= observed - tol))
        done += m
    return (1 + hits) / (n_perm + 1)


@dataclass
class EnergyTestReport:
    statistic: np.ndarray  # [settings, n_obs]
    pvalue: np.ndarray  # [settings, n_obs]
    n_real: int
    n_fake: int
    observables: tuple[str, ...] = ()

    def summary(self) -> dict:
        return {
            "n_real": self.n_real,
            "n_fake": self.n_fake,
            "pvalue_mean": self.pvalue.mean(axis=0).tolist(),
            "pvalue_std": self.pvalue.std(axis=0).tolist(),
            "statistic_mean": self.statistic.mean(axis=0).tolist(),
        }


def energy_test(real, fake, n_perm: int = DEFAULT_PERMUTATIONS, seed=0, max_samples=None, observables=()):
    """Per setting and species, test SSA vs abstract trajectories as vectors in R^H.

    ``real``/``fake`` are ``[settings, samples, H+1, n_obs]``; step 0 is
    dropped since it is shared. ``max_samples`` subsamples each set (without
    replacement) to bound the cost of the pooled distance matrix.
    """
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.shape[0] != fake.shape[0] or real.shape[2:] != fake.shape[2:]:
        raise ValueError(f"grid or setting mismatch: real {real.shape}, fake {fake.shape}")
    S, n_obs = real.shape[0], real.shape[3]
    gen = _rng.as_generator(seed)
    stat = np.empty((S, n_obs))
    pval = np.empty((S, n_obs))
    n_r, n_f = real.shape[1], fake.shape[1]
    if max_samples is not None:
        n_r, n_f = min(n_r, max_samples), min(n_f, max_samples)
    for s in range(S):
        ir = gen.permutation(real.shape[1])[:n_r]
        jf = gen.permutation(fake.shape[1])[:n_f]
        for i in range(n_obs):
            A = real[s, ir, 1:, i]
            B = fake[s, jf, 1:, i]
            stat[s, i] = energy_statistic(A, B)
            pval[s, i] = energy_test_pvalue(A, B, n_perm, gen)
    return EnergyTestReport(stat, pval, n_r, n_f, tuple(observables))
