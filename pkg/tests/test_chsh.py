import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import chsh_bruteforce
from poqchain.chsh import (CLASSICAL_BOUND, TSIRELSON, all_pairs, bell_expectation, chsh_hash_bits,
                           chsh_max, chsh_value, classical_bell_value, classical_vector_bound,
                           correlation_block, pair_values, reduced_pair, tradeoff_check,
                           validate_density)
from poqchain.errors import DomainError
from poqchain.oracle.quench import AnnealSchedule, evolve
from poqchain.topology import make_topology

BELL = np.array([1, 0, 0, 1]) / math.sqrt(2)


def random_state(rng, n):
    v = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    return v / np.linalg.norm(v)


def random_mixed(rng, n=2, rank=3):
    A = rng.standard_normal((2 ** n, rank)) + 1j * rng.standard_normal((2 ** n, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def closed_form(rho):
    s = np.linalg.svd(correlation_block(rho), compute_uv=False)
    return 2 * math.sqrt(s[0] ** 2 + s[1] ** 2)


def ry(t):
    return np.array([[math.cos(t / 2), -math.sin(t / 2)], [math.sin(t / 2), math.cos(t / 2)]])


def test_bell_state_reaches_tsirelson():
    assert chsh_max(BELL) == pytest.approx(TSIRELSON, abs=1e-6)
    assert bell_expectation(BELL) == pytest.approx(TSIRELSON, abs=1e-12)
    a, a2, b, b2 = 0.0, math.pi / 2, math.pi / 4, -math.pi / 4
    assert chsh_value(correlation_block(np.outer(BELL, BELL)), a, a2, b, b2) == pytest.approx(TSIRELSON)


def test_separable_states_obey_classical_bound():
    rng = np.random.default_rng(0)
    for _ in range(50):
        rho = np.zeros((4, 4), dtype=complex)
        w = rng.dirichlet(np.ones(3))
        for k in range(3):
            p = np.kron(random_state(rng, 1), random_state(rng, 1))
            rho += w[k] * np.outer(p, p.conj())
        assert chsh_max(rho) <= CLASSICAL_BOUND + 1e-9


def test_chsh_max_matches_closed_form_and_grid_oracle():
    rng = np.random.default_rng(1)
    for k in range(40):
        if k % 2:
            rho = random_mixed(rng)
        else:
            psi = random_state(rng, 2)
            rho = np.outer(psi, psi.conj())
        rho = validate_density(0.5 * (rho + rho.conj().T))
        v = chsh_max(rho)
        assert v == pytest.approx(min(closed_form(rho), TSIRELSON), abs=1e-6)
        if k < 6:
            assert chsh_bruteforce(rho, grid=24) <= v + 1e-9


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_chsh_max_invariant_under_plane_rotations(t1, t2):
    rho = random_mixed(np.random.default_rng(7))
    U = np.kron(ry(t1), ry(t2))
    assert chsh_max(U @ rho @ U.conj().T) == pytest.approx(chsh_max(rho), abs=1e-7)


def test_classical_vector_bound_is_sqrt2():
    assert classical_vector_bound() == math.sqrt(2)
    t = np.random.default_rng(2).uniform(0, 2 * math.pi, (1000, 2))
    assert np.all(classical_bell_value(t[:, 0], t[:, 1]) <= math.sqrt(2) + 1e-15)


def test_tradeoff_on_random_three_qubit_states():
    rng = np.random.default_rng(3)
    for _ in range(120):
        psi = random_state(rng, 3)
        fixed = tradeoff_check(pair_values(psi, 3), 3)
        opt = tradeoff_check(pair_values(psi, 3, maximize=True), 3)
        assert fixed.passed and opt.passed
        assert fixed.bound == 12.0


def test_ghz_saturates_tradeoff_only_with_optimized_settings():
    ghz = np.zeros(8)
    ghz[0] = ghz[7] = 1 / math.sqrt(2)
    assert tradeoff_check(pair_values(ghz, 3), 3).total == pytest.approx(6.0)
    assert tradeoff_check(pair_values(ghz, 3, maximize=True), 3).total == pytest.approx(12.0, abs=1e-9)


def test_tradeoff_input_validation():
    with pytest.raises(DomainError):
        tradeoff_check([1.0], 2)
    with pytest.raises(DomainError):
        tradeoff_check({(0, 1): 1.0}, 3)
    with pytest.raises(DomainError):
        tradeoff_check([1.0, 2.0], 3)
    assert tradeoff_check({(1, 0): 2.0, (0, 2): 2.0, (2, 1): 2.0}, 3).passed
    assert not tradeoff_check([2.5, 2.5, 2.5], 3).passed
    assert all_pairs(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_reduced_pair_and_domain_errors():
    rng = np.random.default_rng(4)
    psi = random_state(rng, 3)
    rho = np.outer(psi, psi.conj())
    assert np.allclose(reduced_pair(psi, (0, 2)), reduced_pair(rho, (0, 2)))
    assert np.trace(reduced_pair(psi, (2, 1))).real == pytest.approx(1.0)
    with pytest.raises(DomainError):
        reduced_pair(psi, (1, 1))
    with pytest.raises(DomainError):
        chsh_max(2 * np.eye(4) / 4)
    with pytest.raises(DomainError):
        chsh_max(np.array([1, 1, 0, 0.0]))
    with pytest.raises(DomainError):
        chsh_max(np.eye(8) / 8)


def test_mid_anneal_chain_entanglement_bits():
    # ferromagnetic 6-qubit chain stopped at s = 0.9 of a t_a = 6 linear anneal
    topo = make_topology("chain:6")
    psi = evolve(topo, -np.ones(5), AnnealSchedule.linear(6.0), s_stop=0.9)[0]
    pairs = [(k, k + 1) for k in range(5)]
    vals = [chsh_max(reduced_pair(psi, p)) for p in pairs]
    assert vals == pytest.approx([2.051, 1.630, 1.604, 1.630, 2.051], abs=2e-3)
    assert chsh_hash_bits(psi, pairs).tolist() == [True, False, False, False, True]
