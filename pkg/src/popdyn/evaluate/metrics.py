"""Per-species, per-step histogram distances between trajectory ensembles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["wasserstein_1d", "ErrorReport", "histogram_errors", "METRICS", "EPS_REL"]

METRICS = ("wasserstein", "mean_abs", "mean_rel", "var_abs", "var_rel")
EPS_REL = 1.0


def wasserstein_1d(a, b) -> float:
    """Exact W1 between the empirical laws of two 1-D samples.

    Equal sizes use the sorted-pair mean. Otherwise the quantile functions
    are compared on the merged grid of CDF levels ``i/na`` and ``j/nb``;
    the levels are handled as integers over ``na*nb`` to avoid rounding.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("wasserstein_1d needs nonempty samples")
    if na == nb:
        return float(np.mean(np.abs(a - b)))
    # level l/(na*nb); quantile of a on (u_{k-1}, u_k] is a[ceil(u_k*na) - 1]
    levels = np.union1d(np.arange(1, na + 1) * nb, np.arange(1, nb + 1) * na)
    widths = np.diff(levels, prepend=0)
    qa = a[-(-levels // nb) - 1]
    qb = b[-(-levels // na) - 1]
    return float(np.sum(widths * np.abs(qa - qb)) / (na * nb))


def _w1_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """W1 along axis 0 for every remaining index."""
    if x.shape[0] == y.shape[0]:
        return np.mean(np.abs(np.sort(x, axis=0) - np.sort(y, axis=0)), axis=0)
    out = np.empty(x.shape[1:])
    for idx in np.ndindex(*x.shape[1:]):
        out[idx] = wasserstein_1d(x[(slice(None),) + idx], y[(slice(None),) + idx])
    return out


@dataclass
class ErrorReport:
    """Each metric is ``[settings, H, n_obs]``; steps 1..H."""

    per_setting: dict[str, np.ndarray]
    observables: tuple[str, ...] = ()

    @property
    def n_settings(self) -> int:
        return self.per_setting["wasserstein"].shape[0]

    def mean(self, metric: str) -> np.ndarray:
        """Average over settings, ``[H, n_obs]``."""
        return self.per_setting[metric].mean(axis=0)

    def std(self, metric: str) -> np.ndarray:
        return self.per_setting[metric].std(axis=0)

    def summary(self) -> dict:
        out = {}
        for m in METRICS:
            v = self.per_setting[m]
            out[m] = {
                "overall_mean": float(v.mean()),
                "mean_over_settings": self.mean(m).tolist(),
                "std_over_settings": self.std(m).tolist(),
            }
        return out


def _as_sets(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4:
        raise ValueError(f"expected trajectories [settings, samples, H+1, n_obs], got shape {x.shape}")
    return x


def histogram_errors(real, fake, bounds, observables=()) -> ErrorReport:
    """Compare SSA and abstract ensembles setting by setting.

    ``real`` and ``fake`` are unscaled ``[settings, samples, H+1, n_obs]``
    (or a single setting without the leading axis). Wasserstein and absolute
    differences use scaled values; relative differences use original units
    with denominator ``max(|real|, EPS_REL)``. Variances use ddof=0.
    """
    real, fake = _as_sets(real), _as_sets(fake)
    if real.shape[0] != fake.shape[0] or real.shape[2:] != fake.shape[2:]:
        raise ValueError(f"grid or setting mismatch: real {real.shape}, fake {fake.shape}")
    lo, hi = bounds.species[:, 0], bounds.species[:, 1]
    r, f = real[:, :, 1:, :], fake[:, :, 1:, :]
    rs = 2.0 * (r - lo) / (hi - lo) - 1.0
    fs = 2.0 * (f - lo) / (hi - lo) - 1.0
    S = real.shape[0]
    w = np.stack([_w1_batch(rs[i], fs[i]) for i in range(S)])
    mu_r, mu_f = r.mean(axis=1), f.mean(axis=1)
    var_r, var_f = r.var(axis=1), f.var(axis=1)
    mean_abs = np.abs(rs.mean(axis=1) - fs.mean(axis=1))
    var_abs = np.abs(rs.var(axis=1) - fs.var(axis=1))
    mean_rel = np.abs(mu_r - mu_f) / np.maximum(np.abs(mu_r), EPS_REL)
    var_rel = np.abs(var_r - var_f) / np.maximum(np.abs(var_r), EPS_REL)
    return ErrorReport(
        {"wasserstein": w, "mean_abs": mean_abs, "mean_rel": mean_rel, "var_abs": var_abs, "var_rel": var_rel},
        tuple(observables),
    )
