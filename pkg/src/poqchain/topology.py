"""Coupling graphs for the spin-glass problems.

A topology is a fixed, canonically ordered edge list. The edge order defines
the order of the correlation (feature) vector everywhere else in the package.

Spec strings accepted by :func:`make_topology`::

    ring:N              periodic chain
    chain:N             open chain
    cubic:X,Y,Z         cubic lattice, periodic where a side exceeds 2
    cubic-dimer:X,Y,Z   cubic lattice of two-qubit dimers
    biclique-dimer:N    K_{N,N} with each vertex a two-qubit dimer
    edges:0-1,1-2,...   explicit edge list
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Topology:
    name: str
    n_qubits: int
    edges: tuple[tuple[int, int], ...]
    # True for intra-dimer ("chain") couplers; drives the biclique ensemble.
    chain_mask: tuple[bool, ...]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)


def _finish(name, n, edges, chain=None):
    seen = {}
    for k, (i, j) in enumerate(edges):
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen[key] = bool(chain[k]) if chain is not None else False
    if not seen:
        raise ConfigError(f"topology {name!r} has no edges")
    ordered = tuple(seen)
    return Topology(name, n, ordered, tuple(seen[e] for e in ordered))


def ring(n: int) -> Topology:
    if n < 2:
        raise ConfigError("ring needs at least 2 qubits")
    return _finish(f"ring:{n}", n, [(i, (i + 1) % n) for i in range(n)])


def chain(n: int) -> Topology:
    if n < 2:
        raise ConfigError("chain needs at least 2 qubits")
    return _finish(f"chain:{n}", n, [(i, i + 1) for i in range(n - 1)])


def _lattice_neighbours(shape):
    """Yield (site, neighbour, axis) for the cubic lattice of ``shape``.

    Sides of length > 2 wrap periodically; sides of 2 are open since wrapping
    would duplicate the bond.
    """
    for site in itertools.product(*(range(s) for s in shape)):
        for axis, size in enumerate(shape):
            if size == 1:
                continue
            nxt = list(site)
            nxt[axis] += 1
            if nxt[axis] == size:
                if size <= 2:
                    continue
                nxt[axis] = 0
            yield site, tuple(nxt), axis


def cubic(shape) -> Topology:
    shape = tuple(int(s) for s in shape)
    index = {c: k for k, c in enumerate(itertools.product(*(range(s) for s in shape)))}
    edges = [(index[a], index[b]) for a, b, _ in _lattice_neighbours(shape)]
    return _finish("cubic:" + ",".join(map(str, shape)), len(index), edges)


def cubic_dimer(shape) -> Topology:
    """Cubic lattice whose sites are ferro-embeddable two-qubit dimers.

    Qubits 2k and 2k+1 form dimer k. Inter-dimer bonds follow a regular
    pattern: x-bonds join the first qubits, y-bonds the second qubits and
    z-bonds the first qubit of a site to the second qubit of its neighbour.
    """
    shape = tuple(int(s) for s in shape)
    sites = list(itertools.product(*(range(s) for s in shape)))
    index = {c: k for k, c in enumerate(sites)}
    edges, mask = [], []
    for k in range(len(sites)):
        edges.append((2 * k, 2 * k + 1))
        mask.append(True)
    pattern = {0: (0, 0), 1: (1, 1), 2: (0, 1)}
    for a, b, axis in _lattice_neighbours(shape):
        qa, qb = pattern[axis]
        edges.append((2 * index[a] + qa, 2 * index[b] + qb))
        mask.append(False)
    return _finish("cubic-dimer:" + ",".join(map(str, shape)), 2 * len(sites), edges, mask)


def biclique_dimer(n: int) -> Topology:
    """K_{n,n} where each logical vertex is a dimer (4n qubits).

    Left vertex i owns qubits (2i, 2i+1); right vertex j owns (2n+2j, 2n+2j+1).
    Left i couples to right j through left qubit j%2 and right qubit i%2.
    """
    if n < 1:
        raise ConfigError("biclique needs n >= 1")
    edges, mask = [], []
    for v in range(2 * n):
        edges.append((2 * v, 2 * v + 1))
        mask.append(True)
    for i in range(n):
        for j in range(n):
            edges.append((2 * i + (j % 2), 2 * n + 2 * j + (i % 2)))
            mask.append(False)
    return _finish(f"biclique-dimer:{n}", 4 * n, edges, mask)


def from_edges(pairs) -> Topology:
    pairs = [(int(i), int(j)) for i, j in pairs]
    if not pairs:
        raise ConfigError("empty edge list")
    n = 1 + max(max(p) for p in pairs)
    spec = "edges:" + ",".join(f"{i}-{j}" for i, j in pairs)
    return _finish(spec, n, pairs)


def make_topology(spec: str | Topology) -> Topology:
    if isinstance(spec, Topology):
        return spec
    if not isinstance(spec, str) or ":" not in spec:
        raise ConfigError(f"unknown topology {spec!r}")
    kind, _, args = spec.partition(":")
    try:
        if kind == "ring":
            return ring(int(args))
        if kind == "chain":
            return chain(int(args))
        if kind == "cubic":
            return cubic(args.split(","))
        if kind == "cubic-dimer":
            return cubic_dimer(args.split(","))
        if kind == "biclique-dimer":
            return biclique_dimer(int(args))
        if kind == "edges":
            return from_edges(tuple(p.split("-")) for p in args.split(","))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad topology arguments in {spec!r}") from exc
    raise ConfigError(f"unknown topology {spec!r}")
