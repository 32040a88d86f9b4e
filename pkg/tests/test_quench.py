import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import ground_state_zz, propagate_fixed_step, zz_dense
from poqchain.errors import ConfigError, DomainError, ResourceError
from poqchain.hashcore import BlockHeader, ChainConfig, derive_instance
from poqchain.oracle.quench import (AnnealSchedule, CorrelationCache, evolve, gauge_canonical,
                                    magnetizations, quench_exact, read_schedule_csv,
                                    write_schedule_csv, zz_correlations)
from poqchain.topology import make_topology

CUBE = make_topology("cubic:2,2,2")


def corr(topo, J, ta, **kw):
    return zz_correlations(topo, evolve(topo, J, AnnealSchedule.linear(ta), **kw))[0]


def test_adiabatic_limit_pair_and_chain():
    pair = make_topology("chain:2")
    assert corr(pair, [-1.0], 200.0)[0] == pytest.approx(1.0, abs=1e-3)
    chain = make_topology("chain:4")
    J = np.array([0.7, -1.0, 0.4])
    assert np.allclose(corr(chain, J, 300.0), ground_state_zz(4, chain.edges, J), atol=1e-3)


def test_sudden_limit():
    J = np.random.default_rng(0).choice([-1.0, 1.0], CUBE.n_edges)
    assert np.abs(corr(CUBE, J, 1e-4)).max() < 1e-3
    assert np.array_equal(corr(CUBE, J, 0.0), np.zeros(CUBE.n_edges))


def test_matches_fixed_step_propagator_on_cube():
    J = np.random.default_rng(5).choice([-1.0, 1.0], CUBE.n_edges)
    psi = propagate_fixed_step(8, CUBE.edges, J, 2.0, steps=100)
    assert np.abs(corr(CUBE, J, 2.0) - zz_dense(8, CUBE.edges, psi)).max() < 1e-6


def test_fixed_step_agreement_mid_anneal():
    ring = make_topology("ring:5")
    J = np.array([1.0, -1.0, 0.5, -0.3, 1.0])
    psi = evolve(ring, J, AnnealSchedule.linear(3.0), s_stop=0.6)[0]
    ref = propagate_fixed_step(5, ring.edges, J, 3.0, steps=120, s_stop=0.6)
    assert abs(abs(np.vdot(ref, psi)) - 1.0) < 1e-8


def test_norm_and_spin_flip_invariants():
    J = np.random.default_rng(2).choice([-1.0, 1.0], CUBE.n_edges)
    psi = evolve(CUBE, J, AnnealSchedule.linear(2.0))[0]
    assert abs(np.vdot(psi, psi).real - 1.0) < 1e-8
    # global spin flip is a symmetry at zero field
    assert np.abs(magnetizations(CUBE, psi)).max() < 1e-8
    assert np.allclose(psi, psi[::-1], atol=1e-8)


@given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=8, max_size=8))
def test_gauge_transform_of_correlations(gauge):
    g = np.array(gauge)
    J = np.random.default_rng(3).choice([-1.0, 1.0], CUBE.n_edges)
    e = CUBE.edge_array()
    gg = g[e[:, 0]] * g[e[:, 1]]
    assert np.allclose(corr(CUBE, gg * J, 1.0), gg * corr(CUBE, J, 1.0), atol=1e-8)


def test_gauge_canonical_is_idempotent():
    J = np.random.default_rng(4).choice([-1.0, 1.0], CUBE.n_edges)
    g, Jc = gauge_canonical(CUBE, J)
    e = CUBE.edge_array()
    assert np.array_equal(g[e[:, 0]] * g[e[:, 1]] * J, Jc)
    assert np.array_equal(gauge_canonical(CUBE, Jc)[1], Jc)


def test_cache_matches_direct_and_reuses_classes():
    rng = np.random.default_rng(6)
    Js = rng.choice([-1.0, 1.0], (30, CUBE.n_edges))
    cache = CorrelationCache(CUBE, AnnealSchedule.linear(2.0))
    got = cache.correlations(Js)
    assert len(cache) <= 32  # 2^12 couplings / 2^7 gauges
    for k in (0, 7, 19):
        assert np.allclose(got[k], corr(CUBE, Js[k], 2.0), atol=1e-8)
    again = cache.correlations(Js[:5])
    assert np.array_equal(again, got[:5])


def test_quench_exact_on_instance():
    inst = derive_instance(BlockHeader(bytes(32), bytes(32), 0, 1, 1, 8), ChainConfig())
    c = quench_exact(inst)
    assert c.shape == (12,) and np.all(np.abs(c) <= 1.0)


def test_resource_and_domain_guards():
    big = make_topology("ring:15")
    with pytest.raises(ResourceError):
        evolve(big, np.ones(15), AnnealSchedule.linear(1.0))
    with pytest.raises(DomainError):
        evolve(CUBE, np.ones(3), AnnealSchedule.linear(1.0))
    with pytest.raises(DomainError):
        AnnealSchedule.linear(-1.0)


def test_schedule_table_and_csv(tmp_path):
    sched = AnnealSchedule.linear(2.0)
    path = tmp_path / "s.csv"
    write_schedule_csv(path, sched)
    back = read_schedule_csv(path, 2.0)
    for s in (0.0, 0.33, 1.0):
        assert back.gamma(s) == pytest.approx(sched.gamma(s))
        assert back.jscale(s) == pytest.approx(sched.jscale(s))
    sched.check()
    with pytest.raises(ConfigError):
        AnnealSchedule.tabulated([0, 0.5], [1, 0], [0, 1], 1.0)
    with pytest.raises(ConfigError):
        AnnealSchedule.tabulated([0, 1], [1, 0.5], [0.1, 1], 1.0).check()
