"""Exact statevector quench of a transverse-field Ising spin glass.

H(s) = -Gamma(s) sum_i X_i + Jscale(s) sum_<ij> J_ij Z_i Z_j, s = t / t_a,
started in the uniform superposition (ground state of the driver). Qubit k
is tensor axis k, so basis index bit (n-1-k) encodes qubit k; bit 0 is the
+1 eigenstate of Z.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import ConfigError, DomainError, ResourceError
from ..hashcore import ProblemInstance
from ..topology import Topology

MAX_QUBITS = 14


@dataclass(frozen=True)
class AnnealSchedule:
    gamma: Callable[[float], float]
    jscale: Callable[[float], float]
    anneal_time: float
    label: str = "linear"

    def __post_init__(self):
        if self.anneal_time < 0:
            raise DomainError("anneal time must be nonnegative")

    @classmethod
    def linear(cls, anneal_time: float, gamma0: float = 1.0, j0: float = 1.0):
        return cls(lambda s: gamma0 * (1.0 - s), lambda s: j0 * s, float(anneal_time),
                   f"linear:{gamma0:g},{j0:g}")

    @classmethod
    def tabulated(cls, s, gamma, jscale, anneal_time: float, label="table"):
        s = np.asarray(s, dtype=float)
        g = np.asarray(gamma, dtype=float)
        j = np.asarray(jscale, dtype=float)
        if s.ndim != 1 or s.shape != g.shape or s.shape != j.shape or s.size < 2:
            raise ConfigError("schedule table columns must be equal-length vectors")
        if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ConfigError("schedule s must increase from 0 to 1")
        if np.any(g < 0) or np.any(j < 0):
            raise ConfigError("energy scales must be nonnegative")
        return cls(lambda x: float(np.interp(x, s, g)), lambda x: float(np.interp(x, s, j)),
                   float(anneal_time), label)

    def endpoint_ratios(self) -> tuple[float, float]:
        """(Gamma(0)/J(0), J(1)/Gamma(1)); infinite where the divisor vanishes."""
        g0, j0, g1, j1 = self.gamma(0.0), self.jscale(0.0), self.gamma(1.0), self.jscale(1.0)
        r0 = np.inf if j0 == 0 else g0 / j0
        r1 = np.inf if g1 == 0 else j1 / g1
        return r0, r1

    def check(self, min_ratio: float = 100.0) -> None:
        r0, r1 = self.endpoint_ratios()
        if r0 < min_ratio or r1 < min_ratio:
            raise ConfigError(f"schedule endpoints not separated by {min_ratio}x")

    def with_time(self, anneal_time: float) -> "AnnealSchedule":
        return AnnealSchedule(self.gamma, self.jscale, float(anneal_time), self.label)

    def cache_key(self) -> tuple:
        probe = np.linspace(0.0, 1.0, 17)
        return (self.label, self.anneal_time,
                tuple(round(self.gamma(x), 12) for x in probe),
                tuple(round(self.jscale(x), 12) for x in probe))


def read_schedule_csv(path, anneal_time: float) -> AnnealSchedule:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh)]
    try:
        s = [float(r["s"]) for r in rows]
        g = [float(r["gamma"]) for r in rows]
        j = [float(r["J"]) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigError("schedule CSV needs numeric columns s,gamma,J") from exc
    return AnnealSchedule.tabulated(s, g, j, anneal_time, label=f"csv:{path}")


def write_schedule_csv(path, schedule: AnnealSchedule, points: int = 101) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "gamma", "J"])
        for s in np.linspace(0.0, 1.0, points):
            w.writerow([repr(float(s)), repr(float(schedule.gamma(s))), repr(float(schedule.jscale(s)))])


def spin_table(n: int) -> np.ndarray:
    """(2**n, n) array of Z eigenvalues, +1 for bit 0."""
    idx = np.arange(2 ** n)[:, None]
    bits = (idx >> (n - 1 - np.arange(n))) & 1
    return 1 - 2 * bits


def _check_size(topology: Topology, max_qubits: int) -> None:
    if topology.n_qubits > max_qubits:
        raise ResourceError(f"{topology.n_qubits} qubits exceeds exact-simulation cap {max_qubits}")


def _problem_diagonals(topology: Topology, couplings: np.ndarray) -> np.ndarray:
    """Diagonal of H_P for each coupling row: (batch, 2**n)."""
    z = spin_table(topology.n_qubits)
    e = topology.edge_array()
    zz = z[:, e[:, 0]] * z[:, e[:, 1]]  # (dim, n_edges)
    return np.atleast_2d(couplings) @ zz.T


def evolve(topology: Topology, couplings, schedule: AnnealSchedule, s_stop: float = 1.0,
           rtol: float = 1e-10, atol: float = 1e-12, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    """Final state(s) of the quench; returns (batch, 2**n) complex amplitudes."""
    _check_size(topology, max_qubits)
    couplings = np.atleast_2d(np.asarray(couplings, dtype=float))
    if couplings.shape[1] != topology.n_edges:
        raise DomainError("coupling vector length differs from edge count")
    n = topology.n_qubits
    dim = 2 ** n
    batch = couplings.shape[0]
    diag = _problem_diagonals(topology, couplings)
    psi0 = np.full((batch, dim), 1.0 / np.sqrt(dim), dtype=complex)
    ta = schedule.anneal_time
    if ta == 0.0 or s_stop == 0.0:
        return psi0
    shape = (batch,) + (2,) * n

    def rhs(s, y):
        psi = y.reshape(shape)
        drive = np.zeros_like(psi)
        for axis in range(1, n + 1):
            drive += np.flip(psi, axis=axis)
        h_psi = (-schedule.gamma(s)) * drive.reshape(batch, dim)
        h_psi += schedule.jscale(s) * diag * psi.reshape(batch, dim)
        return (-1j * ta) * h_psi.ravel()

    sol = solve_ivp(rhs, (0.0, float(s_stop)), psi0.ravel(), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise ResourceError(f"integrator failed: {sol.message}")
    return sol.y[:, -1].reshape(batch, dim)


def zz_correlations(topology: Topology, psi: np.ndarray) -> np.ndarray:
    z = spin_table(topology.n_qubits)
    e = topology.edge_array()
    probs = np.abs(np.atleast_2d(psi)) ** 2
    return probs @ (z[:, e[:, 0]] * z[:, e[:, 1]])


def magnetizations(topology: Topology, psi: np.ndarray) -> np.ndarray:
    probs = np.abs(np.atleast_2d(psi)) ** 2
    return probs @ spin_table(topology.n_qubits)


def quench_state(instance: ProblemInstance, schedule: AnnealSchedule, s_stop: float = 1.0,
                 **kw) -> np.ndarray:
    if np.any(instance.fields != 0):
        raise ConfigError("nonzero longitudinal fields are unsupported")
    return evolve(instance.topology, instance.couplings, schedule, s_stop=s_stop, **kw)[0]


def quench_exact(instance: ProblemInstance, schedule: AnnealSchedule | None = None,
                 max_qubits: int = MAX_QUBITS, **kw) -> np.ndarray:
    """Exact <Z_i Z_j> per edge at the end of the anneal."""
    if schedule is None:
        schedule = AnnealSchedule.linear(instance.anneal_time)
    _check_size(instance.topology, max_qubits)
    psi = quench_state(instance, schedule, max_qubits=max_qubits, **kw)
    return zz_correlations(instance.topology, psi)[0]


# ---------------------------------------------------------------------------
# Gauge-canonical cache
# ---------------------------------------------------------------------------


def _spanning_forest(topology: Topology):
    """BFS order of (vertex, parent, edge index) over every component."""
    adj = [[] for _ in range(topology.n_qubits)]
    for k, (i, j) in enumerate(topology.edges):
        adj[i].append((j, k))
        adj[j].append((i, k))
    seen = [False] * topology.n_qubits
    order = []
    for root in range(topology.n_qubits):
        if seen[root]:
            continue
        seen[root] = True
        queue = [root]
        order.append((root, -1, -1))
        while queue:
            v = queue.pop(0)
            for u, k in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    order.append((u, v, k))
                    queue.append(u)
    return order


def gauge_canonical(topology: Topology, couplings) -> tuple[np.ndarray, np.ndarray]:
    """Spin-reversal gauge g making every tree edge ferromagnetic.

    Returns (g, J') with J'_ij = g_i g_j J_ij; correlations transform as
    C_ij(J) = g_i g_j C_ij(J').
    """
    J = np.asarray(couplings, dtype=float)
    g = np.ones(topology.n_qubits)
    e = topology.edge_array()
    for v, parent, k in _spanning_forest(topology):
        if parent >= 0:
            # want g_v g_p J_k < 0
            g[v] = -g[parent] if J[k] > 0 else g[parent]
    gg = g[e[:, 0]] * g[e[:, 1]]
    return g, gg * J


class CorrelationCache:
    """Memoizes exact correlations by gauge class of J for one schedule.

    For h = 0 the spin-reversal transform is an exact symmetry of the quench,
    so one simulation per gauge class covers every coupling pattern in it.
    """

    def __init__(self, topology: Topology, schedule: AnnealSchedule, batched: bool = False,
                 **kw):
        self.topology = topology
        self.schedule = schedule
        # batched integration shares step control across classes, which makes
        # results depend (at ~1e-10) on batch composition; off by default
        self.batched = batched
        self.kw = kw
        self._store: dict[bytes, np.ndarray] = {}

    def __len__(self):
        return len(self._store)

    def correlations(self, couplings) -> np.ndarray:
        """(batch, n_edges) correlations for a (batch, n_edges) coupling array."""
        J = np.atleast_2d(np.asarray(couplings, dtype=float))
        e = self.topology.edge_array()
        gauges, keys, canon = [], [], {}
        for row in J:
            g, Jc = gauge_canonical(self.topology, row)
            key = Jc.tobytes()
            gauges.append(g[e[:, 0]] * g[e[:, 1]])
            keys.append(key)
            if key not in self._store and key not in canon:
                canon[key] = Jc
        if canon:
            todo = list(canon)
            if self.batched:
                psi = evolve(self.topology, np.array([canon[k] for k in todo]),
                             self.schedule, **self.kw)
                corr = zz_correlations(self.topology, psi)
            else:
                corr = [zz_correlations(self.topology,
                                        evolve(self.topology, canon[k], self.schedule,
                                               **self.kw))[0]
                        for k in todo]
            for k, c in zip(todo, corr):
                self._store[k] = c
        return np.array([gg * self._store[k] for gg, k in zip(gauges, keys)])


def exact_hash(headers, chain, cache: CorrelationCache | None = None) -> np.ndarray:
    """Zero-noise quantum hash bits, shape (len(headers), n_h), for a ChainConfig.

    Every header gets its own instance, exact correlations and projection;
    signs and thresholds are the message-derived ones.
    """
    from ..hashcore import compute_witnesses, derive_instance, digitalize
    from ..topology import make_topology

    if cache is None:
        cache = CorrelationCache(make_topology(chain.topology),
                                 AnnealSchedule.linear(chain.anneal_time))
    inst = [derive_instance(h, chain) for h in headers]
    V = cache.correlations(np.array([i.couplings for i in inst]))
    return np.array([digitalize(compute_witnesses(v, i), i.thresholds) for v, i in zip(V, inst)])
