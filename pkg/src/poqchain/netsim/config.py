"""Simulation configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError
from ..hashcore import ChainConfig
from ..ledger import ChainworkPolicy
from ..oracle.calibration import SyntheticCalibration

ORACLE_MODES = ("exact", "noisy", "resampled")
WITNESS_MODELS = ("auto", "gaussian", "bernoulli")


@dataclass(frozen=True)
class DeviceRoster:
    """Emulated devices for the noisy oracle (ignored by the others)."""

    n_devices: int = 4
    noise_sigma: float = 0.01
    offset_sigma: float = 0.0
    scale: float = 1.0
    n_reads: int = 1
    seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    length: int = 64  # broadcasts L
    n_miners: int = 100
    many_miner: bool = False  # fresh stakeholder per mining event
    policy: str = "basic"
    n_zeros: int = 16
    n_max: float = 0.0
    normalized: bool = True  # +-1 weights
    oracle: str = "resampled"
    chain: dict = field(default_factory=dict)  # ChainConfig fields (exact/noisy)
    devices: DeviceRoster = field(default_factory=DeviceRoster)
    calibration: dict = field(default_factory=dict)  # SyntheticCalibration fields
    calibration_seed: int = 0
    witness_model: str = "auto"
    delta_w: float | None = None  # network confidence width; None = from oracle
    self_check: bool = True
    k_cap: float = 4.0
    pattern_cap: int = 1 << 20
    max_attempts: int = 100_000
    n_observers: int = 2
    forced_rejections: tuple = ()  # (stakeholder, block index) false negatives
    efficiency_discard: float = 0.5
    delay_quantile: float = 0.95
    max_validations: int = 50_000_000
    seed: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ConfigError("chain length must be >= 1")
        if self.oracle not in ORACLE_MODES:
            raise ConfigError(f"unknown oracle {self.oracle!r}")
        if self.witness_model not in WITNESS_MODELS:
            raise ConfigError(f"unknown witness model {self.witness_model!r}")
        if not self.many_miner and self.n_miners < 1:
            raise ConfigError("need at least one miner")
        if self.n_observers < 1:
            raise ConfigError("need at least one observer")
        if not 0 <= self.efficiency_discard < 1:
            raise ConfigError("efficiency_discard must lie in [0, 1)")
        if not 0 < self.delay_quantile < 1:
            raise ConfigError("delay_quantile must lie in (0, 1)")
        if self.n_zeros < 1 or self.n_zeros > 64:
            raise ConfigError("n_zeros must lie in [1, 64]")
        if self.k_cap <= 0:
            raise ConfigError("k_cap must be positive")
        if isinstance(self.devices, dict):
            object.__setattr__(self, "devices", DeviceRoster(**self.devices))
        object.__setattr__(self, "forced_rejections",
                           tuple((int(a), int(b)) for a, b in self.forced_rejections))
        self.chain_policy()
        self.chain_config()
        self.calibration_params()

    def chain_policy(self) -> ChainworkPolicy:
        return ChainworkPolicy(self.policy, self.n_zeros, self.n_max, self.normalized)

    def chain_config(self) -> ChainConfig:
        try:
            return ChainConfig(**self.chain)
        except TypeError as exc:
            raise ConfigError(f"bad chain config: {exc}") from exc

    def calibration_params(self) -> SyntheticCalibration:
        try:
            return SyntheticCalibration(**self.calibration)
        except TypeError as exc:
            raise ConfigError(f"bad calibration config: {exc}") from exc

    def uses_gaussian(self) -> bool:
        if self.witness_model == "auto":
            return self.policy == "confidence"
        return self.witness_model == "gaussian"

    def replace(self, **changes) -> "SimConfig":
        data = self.to_dict()
        data.update(changes)
        return SimConfig.from_dict(data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["forced_rejections"] = [list(p) for p in self.forced_rejections]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
