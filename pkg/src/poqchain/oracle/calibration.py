"""Per-device witness calibration tables and distribution resampling.

A table row is one (model, hyperplane-set) combination; for every device and
hash bit it stores a Gaussian fit (mean, sigma) and a Bernoulli fit p(bit=1)
of the unsigned witness over repeated programmings. Chain simulations
resample from these fits instead of re-running experiments.

Real device data is not available here, so :func:`synthesize_table`
generates programmings from a parametric model and fits them the same way.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError, DomainError, TableError

SCHEMA_VERSION = 1


def fit_programmings(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian (mean, sigma) and Bernoulli p(W >= 0) over the last axis."""
    x = np.asarray(samples, dtype=float)
    if x.shape[-1] < 2:
        raise DomainError("need at least two programmings to fit a width")
    return x.mean(axis=-1), x.std(axis=-1, ddof=1), (x >= 0.0).mean(axis=-1)


def check_probabilities(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise TableError("Bernoulli probabilities must lie in [0, 1]")
    return p


def resample_bits(p_one, uniforms=None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Independent Bernoulli bits with P(1) = p_one.

    Pass ``uniforms`` (same shape, in (0,1)) for keyed draws; bit = U >= 1-p,
    so a Gaussian draw built from the same uniform lands on the same side.
    """
    p = check_probabilities(p_one)
    if uniforms is None:
        if rng is None:
            raise DomainError("resample_bits needs uniforms or an rng")
        uniforms = rng.random(p.shape)
    return np.asarray(uniforms) >= 1.0 - p


@dataclass(frozen=True, eq=False)
class CalibrationTable:
    mean: np.ndarray  # (rows, devices, bits)
    sigma: np.ndarray  # (rows, devices, bits)
    p_one: np.ndarray  # (rows, devices, bits)
    delta_w: float  # network-wide confidence width
    n_programmings: int = 20
    meta: dict | None = None

    def __post_init__(self):
        shapes = {np.shape(self.mean), np.shape(self.sigma), np.shape(self.p_one)}
        if len(shapes) != 1 or np.ndim(self.mean) != 3:
            raise TableError("mean/sigma/p tables must share a (rows, devices, bits) shape")
        check_probabilities(self.p_one)
        if np.any(np.asarray(self.sigma) < 0):
            raise TableError("negative fitted width")
        if not self.delta_w > 0:
            raise TableError("delta_w must be positive")

    @property
    def n_rows(self) -> int:
        return self.mean.shape[0]

    @property
    def n_devices(self) -> int:
        return self.mean.shape[1]

    @property
    def n_bits(self) -> int:
        return self.mean.shape[2]

    def to_json(self) -> str:
        devices = []
        for d in range(self.n_devices):
            rows = [{"mean": self.mean[r, d].tolist(), "sigma": self.sigma[r, d].tolist(),
                     "p": self.p_one[r, d].tolist()} for r in range(self.n_rows)]
            devices.append({"device_id": d, "rows": rows})
        doc = {"schema_version": SCHEMA_VERSION, "delta_w": self.delta_w,
               "n_programmings": self.n_programmings, "meta": self.meta or {},
               "devices": devices}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "CalibrationTable":
        try:
            doc = json.loads(text)
            devices = sorted(doc["devices"], key=lambda d: d["device_id"])
            arr = {k: np.array([[row[k] for row in dev["rows"]] for dev in devices], dtype=float)
                   for k in ("mean", "sigma", "p")}
        except (KeyError, TypeError, ValueError) as exc:
            raise TableError("malformed calibration JSON") from exc
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise TableError(f"unsupported calibration schema {doc.get('schema_version')!r}")
        # stored device-major; held row-major
        return cls(arr["mean"].transpose(1, 0, 2), arr["sigma"].transpose(1, 0, 2),
                   arr["p"].transpose(1, 0, 2), float(doc["delta_w"]),
                   int(doc.get("n_programmings", 20)), doc.get("meta") or {})

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "CalibrationTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class SyntheticCalibration:
    """Parametric stand-in for device data.

    True witnesses are N(0, witness_scale^2) per (row, bit); each device adds a
    systematic offset N(0, offset_sigma^2) per (row, bit); each programming
    adds N(0, programming_sigma^2). ``spread_factor`` shrinks true witnesses,
    mimicking J-orthogonal hyperplanes discarding the component along -J.
    """

    n_rows: int = 512
    n_bits: int = 64
    n_devices: int = 4
    witness_scale: float = 0.1
    offset_sigma: float = 0.0
    programming_sigma: float = 0.002
    n_programmings: int = 20
    spread_factor: float = 1.0

    def __post_init__(self):
        if min(self.n_rows, self.n_bits, self.n_devices) < 1:
            raise ConfigError("table dimensions must be positive")
        if self.n_programmings < 2:
            raise ConfigError("need at least two programmings")
        if not (self.witness_scale > 0 and self.programming_sigma > 0):
            raise ConfigError("scales must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def synthesize_programmings(params: SyntheticCalibration, seed: int) -> np.ndarray:
    """Raw programmings, shape (rows, devices, bits, n_programmings)."""
    rng = np.random.default_rng([int(seed), 0x0CA1])
    R, D, B, P = params.n_rows, params.n_devices, params.n_bits, params.n_programmings
    truth = params.spread_factor * params.witness_scale * rng.standard_normal((R, 1, B, 1))
    offsets = params.offset_sigma * rng.standard_normal((R, D, B, 1))
    noise = params.programming_sigma * rng.standard_normal((R, D, B, P))
    return np.clip(truth + offsets + noise, -1.0, 1.0)


def table_from_programmings(samples, meta: dict | None = None) -> CalibrationTable:
    mean, sigma, p = fit_programmings(samples)
    # network constant: RMS deviation over every programming on every device
    # from the cross-device mean, so systematic device offsets are included
    x = np.asarray(samples, dtype=float)
    pooled = x - x.mean(axis=(1, 3), keepdims=True)
    delta_w = float(np.sqrt(np.mean(pooled ** 2)))
    return CalibrationTable(mean, sigma, p, delta_w, int(np.shape(samples)[-1]), meta)


def synthesize_table(params: SyntheticCalibration, seed: int = 0) -> CalibrationTable:
    samples = synthesize_programmings(params, seed)
    return table_from_programmings(samples, {"generator": params.to_dict(), "seed": int(seed)})
