"""CHSH entanglement witnesses on exact small states.

Qubit k of an n-qubit state is tensor axis k (matching the quench module).
Measurement settings live in the x-z plane: A(theta) = cos(theta) Z + sin(theta) X.
For a two-qubit state only the 2x2 correlation block T_ab = <sigma_a sigma_b>,
a, b in {x, z}, enters the CHSH value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
TSIRELSON = 2.0 * SQRT2
CLASSICAL_BOUND = 2.0

X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
BELL_OPERATOR = SQRT2 * (np.kron(X, X) + np.kron(Z, Z))

_GRID = 64
_GOLDEN_ROUNDS = 3
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _n_qubits(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if n < 1 or 2 ** n != dim:
        raise DomainError(f"dimension {dim} is not a power of two")
    return n


def _as_density(state) -> np.ndarray:
    a = np.asarray(state, dtype=complex)
    if a.ndim == 1:
        norm = np.vdot(a, a).real
        if abs(norm - 1.0) > 1e-8:
            raise DomainError("state vector is not normalized")
        return np.outer(a, a.conj())
    if a.ndim == 2 and a.shape[0] == a.shape[1]:
        return a
    raise DomainError("expected a state vector or a square density matrix")


def validate_density(rho, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise DomainError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise DomainError("density matrix has negative eigenvalues")
    return rho


def reduced_pair(state, pair) -> np.ndarray:
    """4x4 reduced density matrix of qubits (i, j), in that order."""
    i, j = (int(k) for k in pair)
    a = np.asarray(state, dtype=complex)
    n = _n_qubits(a.shape[0])
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise DomainError(f"pair {pair} invalid for {n} qubits")
    rest = [k for k in range(n) if k not in (i, j)]
    if a.ndim == 1:
        psi = a.reshape((2,) * n).transpose([i, j] + rest).reshape(4, -1)
        rho = psi @ psi.conj().T
        # integrated states carry norm drift ~1e-9; renormalize the marginal
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-6:
            raise DomainError("state vector is not normalized")
        return rho / tr
    rho = _as_density(a).reshape((2,) * (2 * n))
    perm = [i, j] + rest
    rho = rho.transpose(perm + [n + k for k in perm]).reshape(4, 2 ** (n - 2), 4, 2 ** (n - 2))
    return np.einsum("akbk->ab", rho)


def bell_expectation(state, pair=(0, 1)) -> float:
    """<sqrt2 (X_i X_j + Z_i Z_j)> with the fixed settings of the modified operator."""
    rho = reduced_pair(state, pair)
    return float(np.real(np.trace(rho @ BELL_OPERATOR)))


def correlation_block(rho) -> np.ndarray:
    """T[a, b] = Tr(rho sigma_a x sigma_b) with a, b over (x, z)."""
    rho = np.asarray(rho, dtype=complex)
    ops = (X, Z)
    return np.array([[np.real(np.trace(rho @ np.kron(p, q))) for q in ops] for p in ops])


def _unit(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.sin(theta), np.cos(theta)], axis=-1)  # (x, z) components


def chsh_value(T, a, a2, b, b2) -> float:
    """E(a,b) + E(a,b') + E(a',b) - E(a',b') for angles in the x-z plane."""
    ua, ua2, ub, ub2 = _unit(a), _unit(a2), _unit(b), _unit(b2)
    return float(ua @ T @ ub + ua @ T @ ub2 + ua2 @ T @ ub - ua2 @ T @ ub2)


def _alice_optimum(T, b, b2):
    """Best value over Alice's two settings for Bob's (b, b'): |T(u+u')| + |T(u-u')|."""
    ub, ub2 = _unit(b), _unit(b2)
    plus = (ub + ub2) @ T.T
    minus = (ub - ub2) @ T.T
    return np.linalg.norm(plus, axis=-1) + np.linalg.norm(minus, axis=-1)


def _golden(f, lo, hi, iters=60):
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def chsh_max(rho) -> float:
    """max over x-z plane settings of the CHSH expectation.

    Alice's settings are optimized in closed form; Bob's two angles go through
    a 64x64 grid and then alternating golden-section refinement.
    """
    rho = validate_density(_as_density(rho))
    if rho.shape != (4, 4):
        raise DomainError("chsh_max expects a two-qubit state")
    T = correlation_block(rho)
    grid = np.linspace(0.0, math.pi, _GRID, endpoint=False)
    bb, bb2 = np.meshgrid(grid, grid, indexing="ij")
    vals = _alice_optimum(T, bb, bb2)
    k = np.unravel_index(np.argmax(vals), vals.shape)
    b, b2, best = grid[k[0]], grid[k[1]], float(vals[k])
    step = math.pi / _GRID
    for _ in range(_GOLDEN_ROUNDS):
        b, v = _golden(lambda x: float(_alice_optimum(T, x, b2)), b - step, b + step)
        b2, v = _golden(lambda x: float(_alice_optimum(T, b, x)), b2 - step, b2 + step)
        best = max(best, v)
    return min(best, TSIRELSON)


def classical_bell_value(theta_i, theta_j) -> np.ndarray:
    """Modified operator for classical unit spins in the x-z plane: sqrt2 cos(ti - tj)."""
    ti, tj = np.asarray(theta_i, dtype=float), np.asarray(theta_j, dtype=float)
    # the difference form never rounds above 1, so aligned spins give sqrt2 exactly
    return SQRT2 * np.cos(ti - tj)


def classical_vector_bound(points: int = 720) -> float:
    """Grid maximum of the classical value; attained at aligned spins."""
    t = np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)
    return float(np.max(classical_bell_value(t[:, None], t[None, :])))


@dataclass(frozen=True)
class TradeoffResult:
    passed: bool
    total: float
    bound: float
    margin: float  # bound - total


def all_pairs(n_q: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n_q), 2))


def tradeoff_check(values, n_q: int, tol: float = 1e-6) -> TradeoffResult:
    """Check sum over pairs of W^2 <= 2 n_q (n_q - 1).

    ``values`` maps (i, j) pairs to witness values, or is a sequence ordered
    like :func:`all_pairs`.
    """
    if n_q < 3:
        raise DomainError("trade-off relation is checked for n_q >= 3 only")
    pairs = all_pairs(n_q)
    if isinstance(values, dict):
        norm = {tuple(sorted(map(int, k))): float(v) for k, v in values.items()}
        if set(norm) != set(pairs):
            raise DomainError("value set must cover every pair exactly once")
        w = np.array([norm[p] for p in pairs])
    else:
        w = np.asarray(values, dtype=float).ravel()
        if w.size != len(pairs):
            raise DomainError(f"expected {len(pairs)} pair values, got {w.size}")
    total = float(np.sum(w ** 2))
    bound = 2.0 * n_q * (n_q - 1)
    return TradeoffResult(total <= bound + tol, total, bound, bound - total)


def pair_values(state, n_q: int, maximize: bool = False) -> dict:
    """Per-pair witness values of a joint state, fixed or optimized settings."""
    out = {}
    for p in all_pairs(n_q):
        out[p] = chsh_max(reduced_pair(state, p)) if maximize else bell_expectation(state, p)
    return out


def chsh_hash_bits(state, pairs, threshold: float = CLASSICAL_BOUND) -> np.ndarray:
    """bit = 1 iff the pair's optimized CHSH value exceeds ``threshold``."""
    return np.array([chsh_max(reduced_pair(state, p)) > threshold for p in pairs], dtype=bool)
