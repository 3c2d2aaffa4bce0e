"""Accuracy, calibration, property and timing measurements."""
from .energy import EnergyTestReport, energy_statistic, energy_test, energy_test_pvalue
from .metrics import METRICS, ErrorReport, histogram_errors, wasserstein_1d
from .properties import AbsorbingValidity, EventuallyAlways, TemporalProperty, check_property, satisfied
from .timing import TimingTable, timing_benchmark

__all__ = [
    "wasserstein_1d", "histogram_errors", "ErrorReport", "METRICS", "energy_statistic",
    "energy_test_pvalue", "energy_test", "EnergyTestReport", "EventuallyAlways", "AbsorbingValidity",
    "TemporalProperty", "check_property", "satisfied", "timing_benchmark", "TimingTable",
]
