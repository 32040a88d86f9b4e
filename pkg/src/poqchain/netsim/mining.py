"""Accelerated mining by hyperplane-sign resampling, and its brute-force oracle.

In real mining every nonce is one experiment whose message-derived signs are
uniform, so a nonce succeeds with probability (number of sign vectors that
would be accepted) / 2^N. Acceleration runs the experiment once and then
picks the signs directly:

* basic/strict: the unique sign vector that makes every hash bit 0; the
  implied number of nonces is Geometric(2^-N).
* confidence with miner self-check: the broadcast hash is all zeros and the
  miner's confidence in it must satisfy N_miner <= N_max. The accepted sign
  vectors given the draw are enumerated (there are k of them); a draw is kept
  with probability min(1, k / k_cap) so kept draws are weighted by k as in
  real mining, and one of the k vectors is chosen uniformly. The per-nonce
  success rate is estimated as sum(k) / (draws * 2^N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import ResourceError
from ..hashcore import N_BITS_CAP, BlockHeader, log2_confidences
from ..oracle.keyed import keyed_uniform, keyed_words
from .sources import BlockWitness, Experiment, experiment


def nonce_for(seed: int, miner: int, index: int, attempt: int) -> int:
    return int(keyed_words(seed, "nonce", miner, index, attempt))


def geometric_hashes(p: float, u: float) -> float:
    """Number of trials to first success, from one uniform; exact for p = 1."""
    if p >= 1.0:
        return 1.0
    return float(max(1.0, math.ceil(math.log(u) / math.log1p(-p))))


def sign_costs(witness, delta_w: float):
    """(base, extra): cost of the all-matching sign vector and per-bit surcharges."""
    d = np.abs(np.asarray(witness, dtype=float)) / (math.sqrt(2.0) * delta_w) \
        if delta_w > 0 else np.full(np.shape(witness), np.inf)
    lp, lq = log2_confidences(d)
    return float(-lp.sum()), lp - lq


def _sorted_extras(extra):
    order = np.argsort(extra, kind="stable")
    return order, [float(x) for x in np.asarray(extra)[order]]


def count_patterns(extra, budget: float, cap: int) -> int:
    """Number of bit subsets whose surcharges sum to at most ``budget``."""
    if budget < 0:
        return 0
    _, xs = _sorted_extras(extra)
    n = len(xs)
    total = 0

    def walk(i, rem):
        nonlocal total
        total += 1
        if total > cap:
            raise ResourceError(f"more than {cap} accepted sign patterns")
        for j in range(i, n):
            if xs[j] > rem:
                break
            walk(j + 1, rem - xs[j])

    walk(0, budget)
    return total


def nth_pattern(extra, budget: float, rank: int) -> np.ndarray:
    """Mismatch mask of the rank-th subset in the walk order of count_patterns."""
    order, xs = _sorted_extras(extra)
    n = len(xs)
    seen = -1
    chosen: list[int] = []

    def walk(i, rem, picked):
        nonlocal seen, chosen
        seen += 1
        if seen == rank:
            chosen = list(picked)
            return True
        for j in range(i, n):
            if xs[j] > rem:
                break
            if walk(j + 1, rem - xs[j], picked + [j]):
                return True
        return False

    walk(0, budget, [])
    mask = np.zeros(n, dtype=bool)
    mask[order[chosen]] = True
    return mask


@dataclass
class RateEstimate:
    draws: int = 0
    patterns: float = 0.0
    saturated: int = 0

    def p_hat(self, n_zeros: int) -> float:
        if self.draws == 0:
            return 2.0 ** -n_zeros
        return self.patterns / (self.draws * 2.0 ** n_zeros)


@dataclass(frozen=True, eq=False)
class MiningResult:
    header: BlockHeader
    attempt: int
    signs: np.ndarray
    draws: int
    patterns: int
    cost: float  # miner's -log2 confidence in the broadcast all-zero hash
    implied_hashes: float
    witness: BlockWitness
    experiment: Experiment


def zero_signs(exp: Experiment) -> np.ndarray:
    """Signs making every hash bit of this experiment 0."""
    return np.where(exp.bits, -1, 1).astype(np.int8)


def accelerated_mine(template: BlockHeader, source, *, seed: int, miner: int, index: int,
                     policy_kind: str, n_max: float, delta_w: float, gaussian: bool,
                     self_check: bool = True, k_cap: float = 8.0, pattern_cap: int = 1 << 20,
                     max_attempts: int = 100_000, rate: RateEstimate | None = None
                     ) -> MiningResult:
    n = template.hardness
    if n > 64:
        raise ResourceError("sign enumeration limited to 64 hash bits")
    rate = rate if rate is not None else RateEstimate()
    confidence = policy_kind == "confidence" and self_check
    for attempt in range(max_attempts):
        header = template.with_nonce(nonce_for(seed, miner, index, attempt))
        bw = source.block_witness(index, attempt, header)
        exp = experiment(seed, bw, miner, index, attempt, gaussian or confidence)
        if not confidence:
            signs = zero_signs(exp)
            cost = _claim_cost(exp, signs, delta_w)
            u = float(keyed_uniform(seed, "geometric", miner, index))
            rate.draws += 1
            rate.patterns += 1.0
            return MiningResult(header, attempt, signs, attempt + 1, 1, cost,
                                geometric_hashes(2.0 ** -n, u), bw, exp)
        base, extra = sign_costs(exp.witness, delta_w)
        budget = n_max - base
        k = count_patterns(extra, budget, pattern_cap)
        rate.draws += 1
        rate.patterns += k
        if k == 0:
            continue
        if k > k_cap:
            rate.saturated += 1
        if float(keyed_uniform(seed, "accept", miner, index, attempt)) >= min(1.0, k / k_cap):
            continue
        rank = int(keyed_uniform(seed, "pattern", miner, index, attempt) * k)
        mismatch = nth_pattern(extra, budget, min(rank, k - 1))
        signs = zero_signs(exp) * np.where(mismatch, -1, 1).astype(np.int8)
        cost = base + float(extra[mismatch].sum())
        u = float(keyed_uniform(seed, "geometric", miner, index))
        return MiningResult(header, attempt, signs, attempt + 1, k, cost,
                            geometric_hashes(rate.p_hat(n), u), bw, exp)
    raise ResourceError(f"no acceptable draw in {max_attempts} attempts")


def _claim_cost(exp: Experiment, signs, delta_w) -> float:
    """Miner's -log2 confidence that the all-zero claim is right."""
    if exp.witness is None:
        return 0.0
    own = signs * exp.witness >= 0.0
    base, extra = sign_costs(exp.witness, delta_w)
    return min(base + float(extra[own].sum()), N_BITS_CAP)


def brute_force_rate(source, *, seed: int, n_zeros: int, n_max: float, delta_w: float,
                     nonces: int, miner: int = 0, index: int = 1, chunk: int = 20_000
                     ) -> tuple[int, int]:
    """Direct per-nonce mining: fresh draw, uniform signs, accept if cost <= n_max.

    Returns (successes, nonces). Used as an oracle for the accelerated rate.
    """
    successes = 0
    done = 0
    bits = np.arange(n_zeros)
    while done < nonces:
        m = min(chunk, nonces - done)
        att = np.arange(done, done + m) + (1 << 32)  # disjoint from accelerated attempts
        rows = [source.block_witness(index, int(a), None) for a in att]
        mean = np.stack([r.mean for r in rows])
        sigma = np.stack([r.sigma for r in rows])
        dev = _device_choice(seed, mean.shape[1], miner, index, att)
        u = keyed_uniform(seed, "read", miner, index, att[:, None], bits[None, :])
        take = np.arange(m)
        w = np.clip(mean[take, dev] + sigma[take, dev] * special.ndtri(u), -1.0, 1.0)
        s = np.where(keyed_uniform(seed, "bf-signs", miner, index, att[:, None],
                                   bits[None, :]) < 0.5, -1, 1)
        d = np.abs(w) / (math.sqrt(2.0) * delta_w) if delta_w > 0 else np.full(w.shape, np.inf)
        lp, lq = log2_confidences(d)
        own_zero = s * w < 0.0
        cost = -np.where(own_zero, lp, lq).sum(axis=1)
        successes += int(np.count_nonzero(cost <= n_max))
        done += m
    return successes, done


def _device_choice(seed, n_devices, miner, index, att):
    u = keyed_uniform(seed, "device", miner, index, att)
    return np.minimum((u * n_devices).astype(np.int64), n_devices - 1)


def accelerated_rate(source, *, seed: int, n_zeros: int, n_max: float, delta_w: float,
                     draws: int, miner: int = 0, index: int = 1,
                     pattern_cap: int = 1 << 20) -> tuple[float, float]:
    """Mean and standard error of k / 2^N over independent accelerated draws."""
    ks = np.empty(draws)
    for a in range(draws):
        bw = source.block_witness(index, a, None)
        exp = experiment(seed, bw, miner, index, a, True)
        base, extra = sign_costs(exp.witness, delta_w)
        ks[a] = count_patterns(extra, n_max - base, pattern_cap)
    scale = 2.0 ** -n_zeros
    return float(ks.mean() * scale), float(ks.std(ddof=1) / math.sqrt(draws) * scale)
