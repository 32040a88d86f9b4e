"""Per-block witness distributions for the three oracle modes.

Every mode reduces to one :class:`BlockWitness` per mined candidate: for
each device and hash bit, the mean and width of the *unsigned* witness
(before hyperplane signs) and the probability that it lands at or above the
threshold. Individual experiments are keyed draws from these tables, see
:func:`experiment`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..hashcore import BlockHeader, derive_instance, project
from ..oracle.calibration import CalibrationTable, synthesize_table
from ..oracle.devices import DeviceModel, instance_key
from ..oracle.keyed import keyed_choice, keyed_uniform
from ..oracle.quench import AnnealSchedule, CorrelationCache
from .config import SimConfig


@dataclass(frozen=True, eq=False)
class BlockWitness:
    mean: np.ndarray  # (devices, bits)
    sigma: np.ndarray  # (devices, bits)
    p_one: np.ndarray  # (devices, bits)

    @property
    def n_devices(self) -> int:
        return self.mean.shape[0]


def gaussian_p_one(mean, sigma) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = mean / sigma
    # zero width: deterministic side, ties go to 1
    return np.where(sigma > 0, special.ndtr(z), (mean >= 0).astype(float))


class ExactSource:
    """Zero-noise exact quench on a small topology, shared by all devices."""

    def __init__(self, config: SimConfig, n_devices: int = 1):
        self.chain = config.chain_config()
        self.cache = CorrelationCache(_topology(self.chain),
                                      AnnealSchedule.linear(self.chain.anneal_time))
        self.n_devices = n_devices
        self.delta_w = config.delta_w

    def instance(self, header: BlockHeader):
        return derive_instance(header, self.chain)

    def unsigned(self, header: BlockHeader) -> np.ndarray:
        inst = self.instance(header)
        V = self.cache.correlations(inst.couplings)[0]
        return project(V, inst.hyperplanes)

    def block_witness(self, index: int, attempt: int, header: BlockHeader) -> BlockWitness:
        w = np.broadcast_to(self.unsigned(header), (self.n_devices, header.hardness))
        sigma = np.zeros_like(w)
        return BlockWitness(w.copy(), sigma, gaussian_p_one(w, sigma))


class NoisySource(ExactSource):
    """Exact ground truth seen through emulated devices with offsets and noise."""

    def __init__(self, config: SimConfig):
        roster = config.devices
        super().__init__(config, roster.n_devices)
        self.devices = [DeviceModel(d, roster.noise_sigma, roster.offset_sigma, roster.scale,
                                    roster.seed) for d in range(roster.n_devices)]
        self.n_reads = roster.n_reads
        if self.delta_w is None:
            self.delta_w = roster.noise_sigma / np.sqrt(roster.n_reads)

    def block_witness(self, index: int, attempt: int, header: BlockHeader) -> BlockWitness:
        inst = self.instance(header)
        unsigned = project(self.cache.correlations(inst.couplings)[0], inst.hyperplanes)
        key = instance_key(inst.source_id)
        mean = np.array([dev.means(unsigned, key) for dev in self.devices])
        sigma = np.array([np.full(unsigned.shape, dev.read_sigma(self.n_reads))
                          for dev in self.devices])
        return BlockWitness(mean, sigma, gaussian_p_one(mean, sigma))


class ResampledSource:
    """Rows of a calibration table assigned to mining attempts by keyed draw."""

    def __init__(self, config: SimConfig, table: CalibrationTable | None = None):
        self.table = table if table is not None else synthesize_table(
            config.calibration_params(), config.calibration_seed)
        if self.table.n_bits < config.n_zeros:
            raise ValueError("calibration table has fewer bits than n_zeros")
        self.seed = config.seed
        self.n_bits = config.n_zeros
        self.n_devices = self.table.n_devices
        self.delta_w = config.delta_w if config.delta_w is not None else self.table.delta_w

    def row(self, index: int, attempt: int) -> int:
        return int(keyed_choice(self.seed, "row", self.table.n_rows, index, attempt))

    def block_witness(self, index: int, attempt: int, header: BlockHeader) -> BlockWitness:
        r = self.row(index, attempt)
        b = self.n_bits
        return BlockWitness(self.table.mean[r, :, :b], self.table.sigma[r, :, :b],
                            self.table.p_one[r, :, :b])


def _topology(chain):
    from ..topology import make_topology
    return make_topology(chain.topology)


def make_source(config: SimConfig, table: CalibrationTable | None = None):
    if config.oracle == "exact":
        return ExactSource(config, config.devices.n_devices)
    if config.oracle == "noisy":
        return NoisySource(config)
    return ResampledSource(config, table)


@dataclass(frozen=True, eq=False)
class Experiment:
    device: int
    witness: np.ndarray | None  # unsigned draws; None under Bernoulli resampling
    bits: np.ndarray  # unsigned bits (witness >= 0)


def experiment(seed: int, bw: BlockWitness, stakeholder: int, index: int, attempt: int,
               gaussian: bool) -> Experiment:
    """One keyed experiment on a uniformly chosen device.

    Gaussian and Bernoulli draws share the same uniforms, so for a table with
    p = Phi(mean / sigma) both land on the same side of the threshold.
    """
    dev = int(keyed_choice(seed, "device", bw.n_devices, stakeholder, index, attempt))
    n = bw.mean.shape[1]
    u = keyed_uniform(seed, "read", stakeholder, index, attempt, np.arange(n))
    if gaussian:
        w = np.clip(bw.mean[dev] + bw.sigma[dev] * special.ndtri(u), -1.0, 1.0)
        return Experiment(dev, w, w >= 0.0)
    return Experiment(dev, None, u >= 1.0 - bw.p_one[dev])
