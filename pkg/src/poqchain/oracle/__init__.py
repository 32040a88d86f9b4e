"""Witness sources: exact quench, noisy devices, calibration resampling, spoofing."""

from .calibration import (CalibrationTable, SyntheticCalibration, fit_programmings,
                          resample_bits, synthesize_programmings, synthesize_table,
                          table_from_programmings)
from .devices import DeviceModel, instance_key, sample_witnesses, spoof_bits, spoof_estimate
from .keyed import keyed_choice, keyed_normal, keyed_uniform, keyed_words
from .quench import (MAX_QUBITS, AnnealSchedule, CorrelationCache, evolve, exact_hash,
                     gauge_canonical, magnetizations, quench_exact, quench_state,
                     read_schedule_csv, write_schedule_csv, zz_correlations)

__all__ = [
    "AnnealSchedule", "CalibrationTable", "CorrelationCache", "DeviceModel", "MAX_QUBITS",
    "SyntheticCalibration", "evolve", "exact_hash", "fit_programmings", "gauge_canonical",
    "instance_key", "keyed_choice", "keyed_normal", "keyed_uniform", "keyed_words",
    "magnetizations", "quench_exact", "quench_state", "read_schedule_csv", "resample_bits",
    "sample_witnesses", "spoof_bits", "spoof_estimate", "synthesize_programmings",
    "synthesize_table", "table_from_programmings", "write_schedule_csv", "zz_correlations",
]
