"""Named experiment bundles with pinned seeds.

Each preset fixes every config field that matters for its output, so runs
are reproducible bit for bit. Calibrations are synthetic and tuned to the
quoted bit-validation behaviour of the device data (see README).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .netsim.adversary import AttackConfig
from .netsim.config import SimConfig

PRESET_SCHEMA = 1

# persistent-miner chain: 100 miners, +-1 work, ~99.5% of bits validate
FIG3_CALIBRATION = {"witness_scale": 0.1, "programming_sigma": 0.001, "offset_sigma": 0.0005,
                    "n_rows": 512}

# many-miner hardness sweep; delta_w is a fixed network constant
FIG4_R = 95.0
FIG4_CALIBRATION = {"witness_scale": 0.1, "programming_sigma": 0.1 / FIG4_R, "n_rows": 2048}
FIG4_DELTA_W = 6.0 * 0.1 / FIG4_R
FIG4_NZEROS = (20, 30, 40, 50, 60)
FIG4_NMAX = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    kind: str  # chain | sweep | mining-rate | attack
    description: str
    base: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    seeds: tuple = (0,)
    schema_version: int = PRESET_SCHEMA

    def sim_configs(self, **overrides) -> list[SimConfig]:
        """Expanded SimConfigs in a fixed order (chain and sweep presets)."""
        if self.kind == "chain":
            return [SimConfig.from_dict({**self.base, "seed": s, **overrides}) for s in self.seeds]
        if self.kind != "sweep":
            raise ConfigError(f"preset {self.name!r} is not a simulation preset")
        out = []
        for n in self.grid["n_zeros"]:
            for policy, n_max in self.grid["policies"]:
                for s in self.seeds:
                    d = {**self.base, "n_zeros": n, "policy": policy, "n_max": n_max,
                         "seed": s, "calibration_seed": s, **overrides}
                    out.append(SimConfig.from_dict(d))
        return out

    def attack_configs(self, **overrides) -> list[AttackConfig]:
        if self.kind != "attack":
            raise ConfigError(f"preset {self.name!r} is not an attack preset")
        return [AttackConfig(**{**a, **overrides}) for a in self.grid["attacks"]]

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "description": self.description,
                "base": self.base, "grid": self.grid, "seeds": list(self.seeds),
                "schema_version": self.schema_version}


PRESETS = {
    "fig3": ExperimentPreset(
        "fig3", "chain", "100 miners, 28 zeros, basic +-1 work, 219 broadcasts",
        base={"length": 219, "n_miners": 100, "n_zeros": 28, "policy": "basic",
              "normalized": True, "oracle": "resampled", "witness_model": "bernoulli",
              "calibration": FIG3_CALIBRATION, "calibration_seed": 0},
        seeds=(0,)),
    "fig4-sweep": ExperimentPreset(
        "fig4-sweep", "sweep", "many-miner efficiency vs zeros, basic and confidence work",
        base={"length": 512, "many_miner": True, "oracle": "resampled",
              "witness_model": "gaussian", "calibration": FIG4_CALIBRATION,
              "delta_w": FIG4_DELTA_W, "max_attempts": 1_000_000},
        grid={"n_zeros": list(FIG4_NZEROS),
              "policies": [["basic", 0.0]] + [["confidence", m] for m in FIG4_NMAX]},
        seeds=(0, 1, 2, 3)),
    "fig10-mining-rate": ExperimentPreset(
        "fig10-mining-rate", "mining-rate", "accelerated vs brute-force confidence mining rate",
        base={"n_max": 2.0, "oracle": "resampled", "witness_model": "gaussian",
              "calibration": {"witness_scale": 0.1, "programming_sigma": 0.02, "n_rows": 256}},
        grid={"n_zeros": [4, 6, 8, 10], "draws": 4000, "nonces": 200_000}),
    "attack-suite": ExperimentPreset(
        "attack-suite", "attack", "no-work, filter (iid and J-orthogonal), partial, multi-block",
        grid={"attacks": [
            {"strategy": "no-work", "n_zeros": 10, "trials": 50_000},
            {"strategy": "filter", "n_zeros": 4, "trials": 4000, "candidates": 16},
            {"strategy": "filter", "n_zeros": 4, "trials": 4000, "candidates": 16,
             "chain": {"hyperplanes": "j-orthogonal"}},
            {"strategy": "partial-quantum", "n_zeros": 10, "trials": 5000},
            {"strategy": "multi-block", "n_zeros": 16, "trials": 40, "attacker_share": 0.1},
        ]}),
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}") from None
