"""Adversary models: no-work, filter, partial-quantum and multi-block attacks.

Single-block attacks run on the exact zero-noise oracle, so an honest
validator's bits are the ground truth and a fraudulent block is accepted iff
its claimed all-zero hash happens to be right. The multi-block attack runs a
full chain simulation with one attacker stakeholder.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sstats

from ..errors import ConfigError
from ..hashcore import BlockHeader, ChainConfig, bits_to_hex, derive_instance, project
from ..ledger import Block
from ..oracle.devices import spoof_estimate
from ..oracle.keyed import keyed_uniform, keyed_words
from ..oracle.quench import AnnealSchedule, CorrelationCache
from ..topology import make_topology
from .config import SimConfig
from .run import ATTACKER, ChainRun, merkle_for, miner_for_event, observer_id

STRATEGIES = ("no-work", "filter", "partial-quantum", "multi-block")
REPORT_SCHEMA = 1


@dataclass(frozen=True)
class AttackCosts:
    """Abstract cost units: reward R, broadcast C_B, pre-processing C_P, honest hash C_H."""

    reward: float = 1.0
    broadcast: float = 0.0
    preprocess: float = 0.0
    honest_hash: float = 1.0


@dataclass(frozen=True)
class AttackConfig:
    strategy: str = "no-work"
    n_zeros: int = 10
    trials: int = 50_000
    chain: dict = field(default_factory=dict)  # ChainConfig fields
    candidates: int = 16  # filter: nonces ranked per broadcast
    spoof_strength: float = 1.0
    partial_time: float = 0.5  # partial-quantum anneal time
    attacker_share: float = 0.1  # multi-block: fraction of mining events
    bury_depth: int = 5
    sim: dict = field(default_factory=dict)  # multi-block SimConfig overrides
    costs: AttackCosts = field(default_factory=AttackCosts)
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.trials < 1 or self.candidates < 1:
            raise ConfigError("trials and candidates must be positive")
        if not 0.0 <= self.attacker_share < 1.0:
            raise ConfigError("attacker_share must lie in [0, 1)")
        if isinstance(self.costs, dict):
            object.__setattr__(self, "costs", AttackCosts(**self.costs))

    def chain_config(self) -> ChainConfig:
        return ChainConfig.from_dict(self.chain)


@dataclass
class AttackReport:
    strategy: str
    trials: int
    accepted: int
    acceptance_rate: float
    stderr: float
    honest_rate: float  # 2^-N, the no-work baseline
    landed: int  # fraudulent blocks on the final strongest chain
    expected_reward: float
    costs: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema_version": REPORT_SCHEMA, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


REPORT_FIELDS = {"schema_version": int, "strategy": str, "trials": int, "accepted": int,
                 "acceptance_rate": float, "stderr": float, "honest_rate": float,
                 "landed": int, "expected_reward": float, "costs": dict, "extra": dict}


def validate_report(doc: dict) -> None:
    """Schema check for a decoded AttackReport; raises ConfigError."""
    for key, typ in REPORT_FIELDS.items():
        if key not in doc:
            raise ConfigError(f"report missing {key!r}")
        ok = isinstance(doc[key], (int, float)) if typ is float else isinstance(doc[key], typ)
        if not ok or isinstance(doc[key], bool):
            raise ConfigError(f"report field {key!r} has type {type(doc[key]).__name__}")
    if doc["schema_version"] != REPORT_SCHEMA or doc["strategy"] not in STRATEGIES:
        raise ConfigError("unsupported report")


def proportion_test(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Two-sided pooled two-proportion z-test: (z, p-value)."""
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        return 0.0, 1.0
    z = (k1 / n1 - k2 / n2) / se
    return z, float(2.0 * sstats.norm.sf(abs(z)))


# -- exact-oracle helpers ----------------------------------------------------


class ExactHasher:
    """Ground-truth bits for many headers via the gauge-class cache."""

    def __init__(self, chain: ChainConfig, anneal_time: float | None = None):
        self.chain = chain
        t = chain.anneal_time if anneal_time is None else anneal_time
        self.cache = CorrelationCache(make_topology(chain.topology), AnnealSchedule.linear(t))

    def instances(self, headers):
        return [derive_instance(h, self.chain) for h in headers]

    def unsigned(self, instances) -> np.ndarray:
        V = self.cache.correlations(np.array([i.couplings for i in instances]))
        return np.array([project(v, i.hyperplanes) for v, i in zip(V, instances)])


def attack_header(seed: int, trial: int, candidate: int, n_zeros: int) -> BlockHeader:
    prev = hashlib.sha256(f"attack-prev|{seed}|{trial}".encode()).digest()
    root = hashlib.sha256(f"attack-root|{seed}|{trial}".encode()).digest()
    nonce = int(keyed_words(seed, "attack-nonce", trial, candidate))
    return BlockHeader(prev, root, trial, nonce, 1, n_zeros)


def _signed_bits(unsigned, instances) -> np.ndarray:
    signs = np.array([i.signs for i in instances])
    thr = np.array([i.thresholds for i in instances])
    return signs * unsigned >= thr


def _report(cfg: AttackConfig, accepted: int, trials: int, landed: int, cost: float,
            extra: dict) -> AttackReport:
    p = accepted / trials
    c = cfg.costs
    reward = p * c.reward - cost
    return AttackReport(cfg.strategy, trials, accepted, p, math.sqrt(p * (1 - p) / trials),
                        2.0 ** -cfg.n_zeros, landed, reward, asdict(c), extra)


def _chunks(n, size=2000):
    for start in range(0, n, size):
        yield range(start, min(n, start + size))


def no_work_attack(cfg: AttackConfig) -> AttackReport:
    """Broadcast a random nonce with a claimed all-zero hash and no experiment."""
    hasher = ExactHasher(cfg.chain_config())
    accepted = 0
    for block in _chunks(cfg.trials):
        headers = [attack_header(cfg.seed, t, 0, cfg.n_zeros) for t in block]
        inst = hasher.instances(headers)
        bits = _signed_bits(hasher.unsigned(inst), inst)
        accepted += int(np.count_nonzero(~bits.any(axis=1)))
    cost = cfg.costs.broadcast
    return _report(cfg, accepted, cfg.trials, 0, cost, {})


def spoof_scores(instances, strength: float) -> np.ndarray:
    """Classical plausibility that every bit is 0: minus the largest predicted signed witness."""
    pred = np.array([project(np.clip(spoof_estimate(i, strength), -1, 1), i.hyperplanes) * i.signs
                     for i in instances])
    return -pred.max(axis=1), pred < np.array([i.thresholds for i in instances])


def filter_attack(cfg: AttackConfig) -> AttackReport:
    """Rank candidate nonces by a classical spoof and broadcast the best one.

    A paired control broadcasts a uniformly chosen candidate from the same
    pool; also reports the spoofer's per-bit accuracy.
    """
    hasher = ExactHasher(cfg.chain_config())
    K = cfg.candidates
    acc_f = acc_r = 0
    agree = total = 0
    for block in _chunks(cfg.trials, max(1, 4000 // K)):
        headers = [attack_header(cfg.seed, t, c, cfg.n_zeros) for t in block for c in range(K)]
        inst = hasher.instances(headers)
        truth = _signed_bits(hasher.unsigned(inst), inst)  # (T*K, N)
        score, pred_zero = spoof_scores(inst, cfg.spoof_strength)
        agree += int(np.count_nonzero(pred_zero == ~truth))
        total += truth.size
        ok = ~truth.any(axis=1)
        T = len(block)
        score, ok = score.reshape(T, K), ok.reshape(T, K)
        best = np.argmax(score, axis=1)  # first candidate wins ties
        pick = np.minimum((keyed_uniform(cfg.seed, "filter-pick", np.array(block)) * K)
                          .astype(np.int64), K - 1)
        rows = np.arange(T)
        acc_f += int(np.count_nonzero(ok[rows, best]))
        acc_r += int(np.count_nonzero(ok[rows, pick]))
    z, pval = proportion_test(acc_f, cfg.trials, acc_r, cfg.trials)
    cost = cfg.costs.broadcast + cfg.costs.preprocess * K
    extra = {"control_accepted": acc_r, "control_rate": acc_r / cfg.trials, "z": z,
             "p_value": pval, "spoof_bit_accuracy": agree / total, "candidates": K,
             "hyperplanes": cfg.chain_config().hyperplanes}
    return _report(cfg, acc_f, cfg.trials, 0, cost, extra)


def partial_quantum_attack(cfg: AttackConfig) -> AttackReport:
    """Mine with a cheaper experiment (shorter anneal) and claim its hash.

    The attacker picks signs that zero its own bits, exactly like an honest
    miner, but honest validators run the full-length experiment.
    """
    chain = cfg.chain_config()
    honest = ExactHasher(chain)
    cheap = ExactHasher(chain, cfg.partial_time)
    accepted = agree = total = 0
    for block in _chunks(cfg.trials):
        headers = [attack_header(cfg.seed, t, 0, cfg.n_zeros) for t in block]
        inst = honest.instances(headers)
        own = cheap.unsigned(inst)
        signs = np.where(own >= 0.0, -1, 1)
        truth = signs * honest.unsigned(inst) >= np.array([i.thresholds for i in inst])
        agree += int(np.count_nonzero(~truth))
        total += truth.size
        accepted += int(np.count_nonzero(~truth.any(axis=1)))
    frac = cfg.partial_time / chain.anneal_time
    cost = cfg.costs.broadcast + frac * cfg.costs.honest_hash
    return _report(cfg, accepted, cfg.trials, 0, cost,
                   {"bit_agreement": agree / total, "time_fraction": frac})


def multi_block_attack(cfg: AttackConfig) -> AttackReport:
    """Fraudulent block buried under attacker full-work blocks.

    Each trial runs an honest chain; at the first attacker event the attacker
    broadcasts a no-work block on its best tip, and every later attacker event
    extends its own branch with honest work. The trial ends once the honest
    observers' chain is ``bury_depth`` blocks past the fraud height; the
    attack lands if the fraud block is on an observer's strongest chain.
    """
    base = {"length": 400, "n_miners": 20, "n_zeros": 16, "policy": "basic", "seed": 0}
    base.update(cfg.sim)
    landed = accepted = 0
    depths = []
    for trial in range(cfg.trials):
        sc = SimConfig(**{**base, "seed": int(keyed_words(cfg.seed, "mb-trial", trial) >> 1)})
        land, acc, depth = _multi_block_trial(sc, cfg)
        landed += land
        accepted += acc
        depths.append(depth)
    cost = cfg.costs.broadcast
    rep = _report(cfg, accepted, cfg.trials, landed, cost,
                  {"off_chain_fraction": 1.0 - landed / cfg.trials,
                   "mean_depth": float(np.mean(depths)), "bury_depth": cfg.bury_depth})
    rep.expected_reward = landed / cfg.trials * cfg.costs.reward - cost
    return rep


def _multi_block_trial(sc: SimConfig, cfg: AttackConfig):
    run = ChainRun(sc)
    tree = run.tree
    obs = [observer_id(j) for j in range(sc.n_observers)]
    fraud = attacker_tip = None
    for event in range(1, sc.length + 1):
        is_attacker = float(keyed_uniform(sc.seed, "attacker", event)) < cfg.attacker_share
        if is_attacker:
            if fraud is None:
                parent = run.sync(ATTACKER).best
                fraud = attacker_tip = _fraud_block(run, event, parent)
            else:
                idx, _ = run.mine(ATTACKER, event, attacker_tip)
                attacker_tip = idx
        else:
            miner = miner_for_event(sc, event)
            idx, res = run.mine(miner, event, run.sync(miner).best)
            run.record_own(miner, idx, res.cost)
        tips = [run.sync(o, observer=True).best for o in obs]
        if fraud is not None:
            height = tree.depths[fraud]
            depth = min(tree.depths[t] for t in tips) - height
            if depth >= cfg.bury_depth:
                on = any(fraud in tree.path(t) for t in tips)
                acc = all(tree.view(o).mismatches[fraud] == 0 for o in obs)
                return int(on), int(acc), depth
    raise ConfigError("chain too short to bury the fraudulent block; raise sim.length")


def _fraud_block(run: ChainRun, event: int, parent: int) -> int:
    cfg = run.config
    template = BlockHeader(run.tree.blocks[parent].block_id, merkle_for(cfg.seed, event, ATTACKER),
                           event, 0, 1, cfg.n_zeros)
    header = template.with_nonce(int(keyed_words(cfg.seed, "fraud-nonce", event)))
    bw = run.source.block_witness(event, 0, header)
    # no experiment: signs are arbitrary, the claim is all zeros anyway
    signs = np.where(keyed_uniform(cfg.seed, "fraud-signs", event, np.arange(cfg.n_zeros)) < 0.5,
                     -1, 1).astype(np.int8)
    claim = np.zeros(cfg.n_zeros, dtype=bool)
    block = Block(header, ATTACKER, signs, bits_to_hex(claim), 1.0, {"attempt": 0})
    return run.add(block, bw, claim)


def run_adversary(cfg: AttackConfig) -> AttackReport:
    return {"no-work": no_work_attack, "filter": filter_attack,
            "partial-quantum": partial_quantum_attack,
            "multi-block": multi_block_attack}[cfg.strategy](cfg)
