"""Noisy multi-device witness emulation and the weak classical spoofer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..hashcore import ProblemInstance, WitnessReport, compute_witnesses, project
from .keyed import keyed_normal


def instance_key(source_id: bytes) -> int:
    """63-bit integer identifying an instance, for keyed per-instance draws."""
    return int.from_bytes(source_id[:8], "big") >> 1


@dataclass(frozen=True)
class DeviceModel:
    """One emulated QPU.

    Witness means are ``scale * W_true + offset``; offsets are systematic per
    (device, instance, hyperplane) and reproducible from ``seed``. Shot noise
    has width ``noise_sigma / sqrt(n_reads)``.
    """

    device_id: int
    noise_sigma: float
    offset_sigma: float = 0.0
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.noise_sigma >= 0:
            raise DomainError("noise_sigma must be nonnegative")
        if not self.offset_sigma >= 0:
            raise DomainError("offset_sigma must be nonnegative")

    def offsets(self, key: int, n: int) -> np.ndarray:
        if self.offset_sigma == 0.0:
            return np.zeros(n)
        return self.offset_sigma * keyed_normal(self.seed, "offset", self.device_id, key,
                                                np.arange(n))

    def means(self, unsigned_w: np.ndarray, key: int) -> np.ndarray:
        w = np.asarray(unsigned_w, dtype=float)
        return self.scale * w + self.offsets(key, w.shape[-1])

    def read_sigma(self, n_reads: int = 1) -> float:
        if n_reads < 1:
            raise DomainError("n_reads must be >= 1")
        return self.noise_sigma / np.sqrt(n_reads)


def sample_witnesses(instance: ProblemInstance, device: DeviceModel, ground_truth,
                     n_reads: int = 1, rng: np.random.Generator | None = None,
                     signs=None) -> WitnessReport:
    """One noisy experiment on ``device``; returns signed witnesses and bits."""
    sigma = device.read_sigma(n_reads)
    unsigned = project(ground_truth, instance.hyperplanes)
    mean = device.means(unsigned, instance_key(instance.source_id))
    s = instance.signs if signs is None else np.asarray(signs)
    if sigma > 0.0:
        if rng is None:
            raise DomainError("noisy sampling needs an explicit rng")
        mean = mean + sigma * rng.standard_normal(mean.shape)
    W = np.clip(mean, -1.0, 1.0) * s
    return WitnessReport.from_witnesses(W, np.full(W.shape, sigma), instance.thresholds)


def spoof_estimate(instance: ProblemInstance, strength: float = 1.0) -> np.ndarray:
    """Classical weak-coupling guess C_ij = -strength * J_ij."""
    if not 0.0 <= strength <= 1.0:
        raise DomainError("strength must lie in [0, 1]")
    return -float(strength) * np.asarray(instance.couplings, dtype=float)


def spoof_bits(instance: ProblemInstance, strength: float = 1.0) -> np.ndarray:
    V = np.clip(spoof_estimate(instance, strength), -1.0, 1.0)
    return compute_witnesses(V, instance) >= instance.thresholds
