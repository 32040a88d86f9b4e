import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from poqchain.errors import ConfigError, DomainError, TableError
from poqchain.hashcore import BlockHeader, ChainConfig, compute_witnesses, derive_instance
from poqchain.oracle import exact_hash, quench_exact
from poqchain.oracle import (CalibrationTable, DeviceModel, SyntheticCalibration, fit_programmings,
                             keyed_choice, keyed_normal, keyed_uniform, keyed_words, resample_bits,
                             sample_witnesses, spoof_bits, spoof_estimate, synthesize_programmings,
                             synthesize_table)


def instance(nonce=1, **kw):
    return derive_instance(BlockHeader(bytes(32), bytes(32), 0, nonce, 1, 16), ChainConfig(**kw))


# -- keyed randomness -----------------------------------------------------------


@given(st.integers(0, 2 ** 63), st.integers(-2 ** 40, 2 ** 40), st.integers(0, 2 ** 40))
def test_keyed_words_deterministic_and_broadcast(seed, a, b):
    w = keyed_words(seed, "t", a, b)
    assert w == keyed_words(seed, "t", a, b)
    arr = keyed_words(seed, "t", np.array([a, a]), b)
    assert arr.shape == (2,) and arr[0] == w
    assert keyed_words(seed, "u", a, b) != w


def test_keyed_uniform_distribution():
    u = keyed_uniform(3, "x", np.arange(200_000))
    assert 0 < u.min() and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    z = keyed_normal(3, "x", np.arange(200_000))
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    c = keyed_choice(1, "c", 5, np.arange(50_000))
    assert set(np.unique(c)) == set(range(5))
    assert np.abs(np.bincount(c) / 50_000 - 0.2).max() < 0.01


def test_keyed_streams_are_independent_across_parts():
    u = keyed_uniform(0, "p", np.arange(50_000), 0)
    v = keyed_uniform(0, "p", np.arange(50_000), 1)
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.02


# -- devices -------------------------------------------------------------------


def test_noiseless_device_reproduces_ground_truth():
    inst = instance()
    V = np.linspace(-0.5, 0.5, 12)
    rep = sample_witnesses(inst, DeviceModel(0, 0.0), V)
    assert np.allclose(rep.witnesses, inst.signs * (inst.hyperplanes @ V) / 12)
    assert np.all(np.isinf(rep.distances) | (rep.witnesses == 0))


def test_noisy_device_statistics():
    inst = instance()
    V = np.linspace(-0.5, 0.5, 12)
    dev = DeviceModel(1, 0.02, offset_sigma=0.01, seed=9)
    rng = np.random.default_rng(0)
    draws = np.array([sample_witnesses(inst, dev, V, 4, rng).witnesses for _ in range(4000)])
    mean = dev.means(inst.hyperplanes @ V / 12, int.from_bytes(inst.source_id[:8], "big") >> 1)
    assert np.allclose(draws.mean(axis=0), inst.signs * mean, atol=0.001)
    assert np.allclose(draws.std(axis=0), 0.01, rtol=0.05)
    with pytest.raises(DomainError):
        sample_witnesses(inst, dev, V)
    with pytest.raises(DomainError):
        DeviceModel(0, -1.0)
    with pytest.raises(DomainError):
        dev.read_sigma(0)


def test_spoof_estimate():
    inst = instance()
    assert np.array_equal(spoof_estimate(inst, 0.5), -0.5 * inst.couplings)
    assert spoof_bits(inst).shape == (16,)
    with pytest.raises(DomainError):
        spoof_estimate(inst, 1.5)


# -- calibration ---------------------------------------------------------------


def test_fit_programmings_matches_numpy():
    x = np.random.default_rng(1).normal(0.05, 0.02, (3, 2, 4, 20))
    m, s, p = fit_programmings(x)
    assert np.allclose(m, x.mean(-1)) and np.allclose(s, x.std(-1, ddof=1))
    assert np.allclose(p, (x >= 0).mean(-1))
    with pytest.raises(DomainError):
        fit_programmings(x[..., :1])


def test_resample_bits_frequency_and_keyed_agreement():
    p = np.full(100_000, 0.3)
    bits = resample_bits(p, rng=np.random.default_rng(2))
    assert abs(bits.mean() - 0.3) < 0.01
    u = keyed_uniform(0, "r", np.arange(10))
    assert np.array_equal(resample_bits(np.full(10, 0.5), u), u >= 0.5)
    with pytest.raises(TableError):
        resample_bits([1.2], rng=np.random.default_rng(0))
    with pytest.raises(DomainError):
        resample_bits([0.5])


def test_synthetic_table_properties():
    params = SyntheticCalibration(n_rows=64, n_bits=16, n_devices=3, programming_sigma=0.01,
                                  offset_sigma=0.005)
    table = synthesize_table(params, seed=4)
    assert table.mean.shape == (64, 3, 16)
    raw = synthesize_programmings(params, 4)
    pooled = raw - raw.mean(axis=(1, 3), keepdims=True)
    assert table.delta_w == pytest.approx(np.sqrt(np.mean(pooled ** 2)))
    assert table.delta_w == pytest.approx(np.hypot(0.01, 0.005), rel=0.1)
    assert np.array_equal(synthesize_table(params, 4).mean, table.mean)
    with pytest.raises(ConfigError):
        SyntheticCalibration(n_programmings=1)


def test_table_json_round_trip(tmp_path):
    table = synthesize_table(SyntheticCalibration(n_rows=5, n_bits=4, n_devices=2), seed=1)
    text = table.to_json()
    back = CalibrationTable.from_json(text)
    assert back.to_json() == text
    assert np.array_equal(back.p_one, table.p_one)
    doc = json.loads(text)
    assert doc["schema_version"] == 1 and len(doc["devices"]) == 2
    path = tmp_path / "t.json"
    table.save(path)
    assert CalibrationTable.load(path).to_json() == text
    doc["schema_version"] = 9
    with pytest.raises(TableError):
        CalibrationTable.from_json(json.dumps(doc))
    with pytest.raises(TableError):
        CalibrationTable.from_json("{}")
    with pytest.raises(TableError):
        CalibrationTable(table.mean, table.sigma, table.p_one * 2, 0.1)


def test_exact_hash_matches_manual_pipeline():
    chain = ChainConfig(topology="chain:5", n_h=12, anneal_time=1.5)
    headers = [BlockHeader(bytes(32), bytes(32), 3, n, 1, 12) for n in range(6)]
    got = exact_hash(headers, chain)
    for h, row in zip(headers, got):
        inst = derive_instance(h, chain)
        w = compute_witnesses(quench_exact(inst), inst)
        assert np.array_equal(row, w >= inst.thresholds)
    assert got.shape == (6, 12) and got.dtype == bool
