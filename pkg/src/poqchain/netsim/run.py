"""Discrete-event chain simulation.

Broadcasts are sequential (perfect synchronization). At each event a miner
is chosen (uniformly among persistent miners, or a fresh stakeholder in the
many-miner limit), validates whatever blocks it has not seen, mines on its
strongest tip and broadcasts. Validations are keyed draws, so a stakeholder
validating lazily gets exactly the outcome it would have got eagerly.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..errors import ResourceError
from ..hashcore import N_BITS_CAP, BlockHeader, bits_to_hex, log2_confidences
from ..ledger import Block, BlockTree, membership_counts
from ..oracle.keyed import keyed_choice, keyed_uniform
from .config import SimConfig
from .mining import RateEstimate, accelerated_mine
from .sources import make_source

log = logging.getLogger(__name__)

OBSERVER_BASE = 1 << 40
FRESH_BASE = 1 << 41
ATTACKER = (1 << 42) + 1


def observer_id(j: int) -> int:
    return OBSERVER_BASE + j


def miner_for_event(config: SimConfig, event: int) -> int:
    if config.many_miner:
        return FRESH_BASE + event
    return int(keyed_choice(config.seed, "miner", config.n_miners, event))


def genesis_header(config: SimConfig) -> BlockHeader:
    root = hashlib.sha256(f"genesis|{config.seed}".encode()).digest()
    return BlockHeader(bytes(32), root, 0, 0, 1, config.n_zeros)


def merkle_for(seed: int, event: int, miner: int) -> bytes:
    return hashlib.sha256(f"txroot|{seed}|{event}|{miner}".encode()).digest()


class ChainRun:
    """Mutable state of one simulation: tree plus per-block witness tables."""

    def __init__(self, config: SimConfig, table=None, source=None):
        self.config = config
        self.policy = config.chain_policy()
        self.source = source if source is not None else make_source(config, table)
        dw = self.source.delta_w
        self.delta_w = 0.0 if dw is None else float(dw)
        self.gaussian = config.uses_gaussian()
        self.tree = BlockTree(genesis_header(config), self.policy)
        self.rate = RateEstimate()
        cap = config.length + 1
        n, d = config.n_zeros, self.source.n_devices
        self.mean = np.zeros((cap, d, n))
        self.sigma = np.zeros((cap, d, n))
        self.p_one = np.zeros((cap, d, n))
        self.signs = np.ones((cap, n), dtype=np.int8)
        self.claim = np.zeros((cap, n), dtype=bool)
        self.attempt = np.zeros(cap, dtype=np.int64)
        self.forced = set(config.forced_rejections)
        self.validations = 0
        self.observer_validations = 0
        self.bit_checks = 0
        self.bit_mismatches = 0

    # -- validation -------------------------------------------------------

    def _grow(self, need):
        cap = self.mean.shape[0]
        if need <= cap:
            return
        new = max(need, 2 * cap)

        def pad(a, value=0):
            out = np.full((new,) + a.shape[1:], value, dtype=a.dtype)
            out[:cap] = a
            return out

        self.mean, self.sigma, self.p_one = pad(self.mean), pad(self.sigma), pad(self.p_one)
        self.signs, self.claim, self.attempt = pad(self.signs, 1), pad(self.claim), pad(self.attempt)

    def validate_many(self, stakeholder: int, idx: np.ndarray):
        """(n_validator, mismatches) for blocks ``idx`` as seen by ``stakeholder``."""
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int64)
        seed = self.config.seed
        att = self.attempt[idx]
        n_dev = self.mean.shape[1]
        dev = np.minimum((keyed_uniform(seed, "device", stakeholder, idx, att) * n_dev)
                         .astype(np.int64), n_dev - 1)
        bits = np.arange(self.mean.shape[2])
        u = keyed_uniform(seed, "read", stakeholder, idx[:, None], att[:, None], bits[None, :])
        signs = self.signs[idx]
        claim = self.claim[idx]
        if self.gaussian:
            w = np.clip(self.mean[idx, dev] + self.sigma[idx, dev] * special.ndtri(u), -1.0, 1.0)
            own = signs * w >= 0.0
            match = own == claim
            mism = np.count_nonzero(~match, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                d = np.abs(w) / (math.sqrt(2.0) * self.delta_w) if self.delta_w > 0 \
                    else np.full(w.shape, np.inf)
            lp, lq = log2_confidences(d)
            n_val = np.clip(-np.where(match, lp, lq).sum(axis=1), 0.0, N_BITS_CAP)
        else:
            unsigned = u >= 1.0 - self.p_one[idx, dev]
            own = np.where(signs > 0, unsigned, ~unsigned)
            mism = np.count_nonzero(own != claim, axis=1)
            # Bernoulli resampling carries no confidence: bits count as certain
            n_val = np.where(mism == 0, 0.0, N_BITS_CAP)
        self.bit_checks += mism.size * self.mean.shape[2]
        self.bit_mismatches += int(mism.sum())
        if self.forced:
            for k, b in enumerate(idx):
                if (stakeholder, int(b)) in self.forced:
                    mism[k] = max(int(mism[k]), 1)
                    n_val[k] = N_BITS_CAP
        return n_val, mism

    def sync(self, stakeholder: int, observer: bool = False):
        view = self.tree.view(stakeholder)
        todo = np.arange(view.n_known, len(self.tree))
        if todo.size:
            if observer:
                self.observer_validations += todo.size
            else:
                self.validations += todo.size
                if self.validations > self.config.max_validations:
                    raise ResourceError("validation budget exceeded")
            n_val, mism = self.validate_many(stakeholder, todo)
            self.tree.record(stakeholder, n_val, mism)
        return view

    # -- mining -----------------------------------------------------------

    def mine(self, miner: int, event: int, parent: int):
        cfg = self.config
        template = BlockHeader(self.tree.blocks[parent].block_id, merkle_for(cfg.seed, event, miner),
                               event, 0, 1, cfg.n_zeros)
        res = accelerated_mine(template, self.source, seed=cfg.seed, miner=miner, index=event,
                               policy_kind=self.policy.kind, n_max=self.policy.n_max,
                               delta_w=self.delta_w, gaussian=self.gaussian,
                               self_check=cfg.self_check, k_cap=cfg.k_cap,
                               pattern_cap=cfg.pattern_cap, max_attempts=cfg.max_attempts,
                               rate=self.rate)
        claim = np.zeros(cfg.n_zeros, dtype=bool)
        block = Block(res.header, miner, res.signs, bits_to_hex(claim), res.implied_hashes,
                      {"attempt": res.attempt})
        return self.add(block, res.witness, claim), res

    def add(self, block: Block, bw, claim) -> int:
        idx = len(self.tree)
        self._grow(idx + 1)
        # tables are written before insertion so validators can use them
        self.mean[idx], self.sigma[idx], self.p_one[idx] = bw.mean, bw.sigma, bw.p_one
        self.signs[idx] = block.signs
        self.claim[idx] = claim
        self.attempt[idx] = int(block.extension.get("attempt", 0))
        got = self.tree.insert(block)
        assert got == idx
        return idx

    def record_own(self, miner: int, idx: int, cost: float):
        view = self.tree.view(miner)
        if view.n_known == idx:
            n_val = cost if self.policy.kind == "confidence" else 0.0
            self.tree.record(miner, [n_val], [0])


@dataclass
class ChainStats:
    efficiency: float
    efficiency_series: list
    pair_delays: list
    transaction_delay_95: int
    hashes_per_broadcast: float
    mining_rate: float
    status_counts: dict
    immutable_fraction: float
    validations: int
    observer_validations: int
    draws: int
    saturated: int
    bit_validation_rate: float
    rows: list = field(default_factory=list)
    watch_tips: dict = field(default_factory=dict)
    observer_tips: list = field(default_factory=list)
    transfers: dict = field(default_factory=dict)  # block -> observers adopting it on broadcast

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k not in ("rows",)}


@dataclass
class ChainResult:
    config: SimConfig
    run: ChainRun
    stats: ChainStats
    status: list

    @property
    def tree(self) -> BlockTree:
        return self.run.tree


def run_chain(config: SimConfig, table=None, source=None, watch=()) -> ChainResult:
    from .stats import finish_stats

    run = ChainRun(config, table, source)
    tree = run.tree
    observers = [observer_id(j) for j in range(config.n_observers)]
    watch = sorted(set(watch) | {s for s, _ in config.forced_rejections})
    eff, delays, rows = [], [], []
    watch_tips = {s: [] for s in watch}
    obs_tips = []
    transfers = {}
    for event in range(1, config.length + 1):
        miner = miner_for_event(config, event)
        view = run.sync(miner)
        idx, res = run.mine(miner, event, view.best)
        if config.many_miner:
            tree.views.pop(miner, None)
        else:
            run.record_own(miner, idx, res.cost)
        tips = [run.sync(o, observer=True).best for o in observers]
        for s in watch:
            watch_tips[s].append(run.sync(s).best)
        transfers[idx] = sum(1 for t in tips if t == idx)
        depths = [tree.depths[t] for t in tips]
        e = float(np.mean(depths)) / event
        eff.append(e)
        obs_tips.append(tips)
        pd = [_delay(tree, a, b) for i, a in enumerate(tips) for b in tips[i + 1:]]
        delays.append(pd)
        rows.append({"broadcast": event, "miner": miner, "efficiency": e,
                     "depth": int(np.mean(depths)), "draws": res.draws,
                     "implied_hashes": res.implied_hashes,
                     **_panel_counts(tree, observers)})
        log.debug("event %d miner %d eff %.3f", event, miner, e)
    if config.many_miner:
        panel = observers
    else:
        panel = list(range(config.n_miners))
        for m in panel:
            run.sync(m)
    counts, tips = membership_counts(tree, panel)
    stats, status = finish_stats(config, run, eff, delays, rows, counts, tips, len(panel))
    stats.watch_tips = watch_tips
    stats.observer_tips = obs_tips
    stats.transfers = transfers
    return ChainResult(config, run, stats, status)


def _delay(tree, tip_a, tip_b) -> int:
    pb = set(tree.path(tip_b))
    return sum(1 for k in tree.path(tip_a) if k not in pb)


def _panel_counts(tree, panel) -> dict:
    counts, tips = membership_counts(tree, panel)
    n = len(panel)
    tipset = set(tips)
    out = {"immutable": 0, "rejected": 0, "contended": 0, "frontier": 0}
    for k in range(1, len(tree)):
        if k in tipset:
            out["frontier"] += 1
        elif counts[k] == n:
            out["immutable"] += 1
        elif counts[k] == 0:
            out["rejected"] += 1
        else:
            out["contended"] += 1
    return out
