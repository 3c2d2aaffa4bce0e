"""CSV/JSON serialisation of evaluation results.

Column orders are fixed:

- error CSV: ``setting, species, step, metric, value``
- landscape CSV: ``setting, <condition columns>, species, step, metric, value``
  restricted to steps 1, H/2 and H
- energy CSV: ``setting, species, statistic, pvalue, n_real, n_fake``
- property CSV: ``property, source, fraction``
- timing CSV: ``model, method, batch, seconds_per_trajectory``
"""
from __future__ import annotations

import csv
import json

import numpy as np

from .metrics import METRICS, ErrorReport

__all__ = [
    "ERROR_COLUMNS", "ENERGY_COLUMNS", "TIMING_COLUMNS", "write_error_csv", "write_landscape_csv",
    "write_energy_csv", "write_timing_csv", "write_property_csv", "write_json", "landscape_steps",
]

ERROR_COLUMNS = ("setting", "species", "step", "metric", "value")
ENERGY_COLUMNS = ("setting", "species", "statistic", "pvalue", "n_real", "n_fake")
TIMING_COLUMNS = ("model", "method", "batch", "seconds_per_trajectory")
PROPERTY_COLUMNS = ("property", "source", "fraction")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _writer(path, header):
    fh = open(path, "w", newline="")
    w = csv.writer(fh)
    w.writerow(header)
    return fh, w


def write_error_csv(report: ErrorReport, path) -> None:
    species = report.observables or tuple(f"x{i}" for i in range(report.per_setting["wasserstein"].shape[2]))
    fh, w = _writer(path, ERROR_COLUMNS)
    with fh:
        S, H, n = report.per_setting["wasserstein"].shape
        for s in range(S):
            for i in range(n):
                for j in range(H):
                    for m in METRICS:
                        w.writerow([s, species[i], j + 1, m, _fmt(report.per_setting[m][s, j, i])])


def landscape_steps(H: int) -> tuple[int, ...]:
    return tuple(sorted({1, max(1, H // 2), H}))


def write_landscape_csv(report: ErrorReport, conditions: np.ndarray, cond_names, path) -> None:
    """Per-setting metrics at the first, middle and last step, with the setting's
    (unscaled) condition so the values can be plotted over condition space."""
    species = report.observables
    S, H, n = report.per_setting["wasserstein"].shape
    fh, w = _writer(path, ("setting", *cond_names, "species", "step", "metric", "value"))
    with fh:
        for s in range(S):
            for i in range(n):
                for j in landscape_steps(H):
                    for m in METRICS:
                        w.writerow([
                            s, *(_fmt(c) for c in conditions[s]), species[i], j, m,
                            _fmt(report.per_setting[m][s, j - 1, i]),
                        ])


def write_energy_csv(report, path) -> None:
    fh, w = _writer(path, ENERGY_COLUMNS)
    with fh:
        S, n = report.pvalue.shape
        for s in range(S):
            for i in range(n):
                w.writerow([s, report.observables[i], _fmt(report.statistic[s, i]),
                            _fmt(report.pvalue[s, i]), report.n_real, report.n_fake])


def write_property_csv(rows, path) -> None:
    fh, w = _writer(path, PROPERTY_COLUMNS)
    with fh:
        for r in rows:
            w.writerow([r["property"], r["source"], _fmt(r["fraction"])])


def write_timing_csv(table, path) -> None:
    fh, w = _writer(path, TIMING_COLUMNS)
    with fh:
        for r in table.rows():
            w.writerow([r[c] if c != "seconds_per_trajectory" else _fmt(r[c]) for c in TIMING_COLUMNS])


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
