"""Independent reference implementations used only by the tests.

None of these import from poqchain internals beyond plain data types: the
propagator builds dense Kronecker-product Hamiltonians and steps with
exponentials of Hermitian matrices, the error function is a power series,
and the strongest chain is found by exhaustive path enumeration.
"""

from __future__ import annotations

import math
from functools import reduce

import numpy as np

_I = np.eye(2)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.diag([1.0, -1.0])


def _site(op, k, n):
    return reduce(np.kron, [op if q == k else _I for q in range(n)])


def dense_hamiltonians(n, edges, couplings):
    """(H_driver, H_problem) as dense matrices, qubit 0 leftmost in the kron."""
    hx = -sum(_site(_X, k, n) for k in range(n))
    hz = sum(J * _site(_Z, i, n) @ _site(_Z, j, n) for (i, j), J in zip(edges, couplings))
    return hx, hz


def _expm_hermitian(H, dt):
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * dt * w)) @ v.conj().T


def propagate_fixed_step(n, edges, couplings, anneal_time, steps=4000, s_stop=1.0):
    """Fourth-order commutator-free Magnus stepper for H(s) = (1-s) H_x + s H_z.

    Two exponentials per step at the Gauss-Legendre nodes; global error O(h^4).
    """
    hx, hz = dense_hamiltonians(n, edges, couplings)
    dim = 2 ** n
    psi = np.full(dim, 1.0 / math.sqrt(dim), dtype=complex)
    if anneal_time == 0 or s_stop == 0:
        return psi
    h = s_stop / steps
    c1, c2 = 0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6
    a1, a2 = 0.25 + math.sqrt(3) / 6, 0.25 - math.sqrt(3) / 6

    def H(s):
        return (1 - s) * hx + s * hz

    for k in range(steps):
        s0 = k * h
        H1, H2 = H(s0 + c1 * h), H(s0 + c2 * h)
        # exp(-i h T (a2 H1 + a1 H2)) exp(-i h T (a1 H1 + a2 H2))
        psi = _expm_hermitian(a1 * H1 + a2 * H2, h * anneal_time) @ psi
        psi = _expm_hermitian(a2 * H1 + a1 * H2, h * anneal_time) @ psi
    return psi


def zz_dense(n, edges, psi):
    return np.array([np.real(psi.conj() @ (_site(_Z, i, n) @ _site(_Z, j, n)) @ psi)
                     for i, j in edges])


def ground_state_zz(n, edges, couplings):
    """<ZZ> over the (uniform mixture of) classical ground states."""
    best, states = None, []
    for idx in range(2 ** n):
        z = [1 - 2 * ((idx >> (n - 1 - q)) & 1) for q in range(n)]
        e = sum(J * z[i] * z[j] for (i, j), J in zip(edges, couplings))
        if best is None or e < best - 1e-12:
            best, states = e, [z]
        elif abs(e - best) <= 1e-12:
            states.append(z)
    return np.array([np.mean([z[i] * z[j] for z in states]) for i, j in edges])


def erf_series(x: float, terms: int = 80) -> float:
    """Maclaurin series of erf, adequate for |x| <= 3."""
    total, term = 0.0, x
    for k in range(terms):
        total += term / (2 * k + 1)
        term *= -x * x / (k + 1)
    return 2.0 / math.sqrt(math.pi) * total


def strongest_by_enumeration(parents, work):
    """Tip of the maximum-work root path; earliest index wins ties.

    Sums work along every root-to-node path independently (no prefix reuse).
    """
    best, best_val = 0, None
    for node in range(len(parents)):
        total, k = 0.0, node
        while k >= 0:
            total += work[k]
            k = parents[k]
        if best_val is None or total > best_val:
            best, best_val = node, total
    return best, best_val


def chsh_bruteforce(rho, grid=48):
    """Max over a coarse four-angle grid of the Bell value in the x-z plane."""
    th = np.linspace(0, np.pi, grid, endpoint=False)

    def obs(t):
        return np.sin(t) * _X + np.cos(t) * _Z

    ops = [obs(t) for t in th]
    T = np.array([[np.real(np.trace(rho @ np.kron(a, b))) for b in ops] for a in ops])
    best = 0.0
    for i in range(grid):
        for k in range(grid):
            # for fixed Alice pair the best Bob pair is separable in the sum
            s = T[i] + T[k]
            d = T[i] - T[k]
            best = max(best, np.max(np.abs(s[:, None] + d[None, :])),
                       np.max(np.abs(s[:, None] - d[None, :])))
    return best
