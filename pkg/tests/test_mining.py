import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poqchain.errors import ResourceError
from poqchain.hashcore import BlockHeader
from poqchain.netsim.config import SimConfig
from poqchain.netsim.mining import (RateEstimate, accelerated_mine, accelerated_rate,
                                    brute_force_rate, count_patterns, geometric_hashes,
                                    nth_pattern, sign_costs)
from poqchain.netsim.run import ChainRun
from poqchain.oracle.keyed import keyed_uniform

RATE_CAL = {"witness_scale": 0.1, "programming_sigma": 0.02, "n_rows": 256}


def subsets_within(extra, budget):
    n = len(extra)
    out = set()
    for r in range(n + 1):
        for c in itertools.combinations(range(n), r):
            if sum(extra[i] for i in c) <= budget:
                out.add(c)
    return out


def test_geometric_mean_is_inverse_rate():
    for n in (0, 3, 8):
        p = 2.0 ** -n
        u = keyed_uniform(5, "g", np.arange(40_000))
        x = np.array([geometric_hashes(p, float(v)) for v in u])
        se = math.sqrt((1 - p) / p ** 2 / len(x))
        assert abs(x.mean() - 2.0 ** n) <= 4 * se + 1e-12
        assert x.min() >= 1


@given(st.lists(st.floats(0, 4), min_size=0, max_size=9), st.floats(-1, 6))
def test_count_patterns_matches_subset_enumeration(extra, budget):
    expect = subsets_within(extra, budget) if budget >= 0 else set()
    k = count_patterns(np.array(extra), budget, cap=1 << 12)
    assert k == len(expect)
    masks = {tuple(np.flatnonzero(nth_pattern(np.array(extra), budget, r))) for r in range(k)}
    assert masks == expect


def test_count_patterns_cap():
    with pytest.raises(ResourceError):
        count_patterns(np.zeros(12), 1.0, cap=100)


def test_sign_costs_zero_width():
    base, extra = sign_costs(np.array([0.1, -0.2]), 0.0)
    assert base == 0.0 and np.all(extra >= -math.log2(1e-300) - 1e-9)


def rate_config(n):
    return SimConfig(n_zeros=n, policy="confidence", n_max=2.0, oracle="resampled",
                     witness_model="gaussian", calibration=RATE_CAL)


@pytest.mark.parametrize("n", [4, 6, 8])
def test_accelerated_rate_agrees_with_brute_force(n):
    run = ChainRun(rate_config(n))
    common = dict(seed=0, n_zeros=n, n_max=2.0, delta_w=run.delta_w)
    k, m = brute_force_rate(run.source, nonces=60_000, **common)
    acc, err = accelerated_rate(run.source, draws=1500, **common)
    p = k / m
    se = math.hypot(math.sqrt(p * (1 - p) / m), err)
    assert k > 30
    assert abs(acc - p) <= 3 * se
    assert acc > 2.0 ** -n  # confidence admits strictly more sign patterns


def test_accelerated_mine_basic_gives_zero_hash():
    cfg = SimConfig(n_zeros=12, policy="basic", witness_model="gaussian", calibration=RATE_CAL)
    run = ChainRun(cfg)
    tmpl = BlockHeader(bytes(32), bytes(32), 1, 0, 1, 12)
    res = accelerated_mine(tmpl, run.source, seed=0, miner=3, index=1, policy_kind="basic",
                           n_max=0.0, delta_w=run.delta_w, gaussian=True)
    assert res.attempt == 0 and res.patterns == 1
    assert np.all(res.signs * res.experiment.witness < 0)
    assert res.implied_hashes >= 1


def test_accelerated_mine_confidence_respects_budget():
    cfg = rate_config(10)
    run = ChainRun(cfg)
    tmpl = BlockHeader(bytes(32), bytes(32), 1, 0, 1, 10)
    rate = RateEstimate()
    for idx in range(1, 6):
        res = accelerated_mine(tmpl, run.source, seed=0, miner=1, index=idx,
                               policy_kind="confidence", n_max=2.0, delta_w=run.delta_w,
                               gaussian=True, rate=rate)
        assert res.cost <= 2.0 + 1e-9
        assert 1 <= res.patterns
    assert rate.draws >= 5 and rate.p_hat(10) > 0
    with pytest.raises(ResourceError):
        accelerated_mine(tmpl, run.source, seed=0, miner=1, index=1, policy_kind="confidence",
                         n_max=0.0, delta_w=run.delta_w * 1e-3, gaussian=True, max_attempts=3)
