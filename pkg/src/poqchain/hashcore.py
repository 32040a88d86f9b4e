"""Four-stage quantum hash pipeline and the confidence arithmetic around it.

Pipeline: header -> SHA-256 classical id -> pseudo-random problem instance
(couplings J, hyperplanes G, signs, thresholds) -> correlation vector V from
some witness source -> witnesses W = s * (G V) / N_V -> Heaviside bits.

Everything here is pure: no global RNG, no mutable module state.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError, ShapeError
from .topology import Topology, make_topology

HEADER_FORMAT = ">32s32sQQII"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)  # 88 bytes
N_BITS_CAP = 1024.0
P_FLOOR = 1e-300
_LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# Block header
# ---------------------------------------------------------------------------


def _as_digest(value, name) -> bytes:
    if isinstance(value, (bytes, bytearray)):
        raw = bytes(value)
    elif isinstance(value, str):
        try:
            raw = bytes.fromhex(value)
        except ValueError as exc:
            raise DomainError(f"{name} is not hex") from exc
    else:
        raise DomainError(f"{name} must be bytes or hex string")
    if len(raw) != 32:
        raise DomainError(f"{name} must be 32 bytes, got {len(raw)}")
    return raw


def _check_uint(value, bits, name) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DomainError(f"{name} must be an integer")
    value = int(value)
    if not 0 <= value < (1 << bits):
        raise DomainError(f"{name} out of range for u{bits}")
    return value


@dataclass(frozen=True)
class BlockHeader:
    """Block header with a canonical 88-byte big-endian layout.

    Layout (declared order): prev_hash[32] | merkle_root[32] | timestamp u64 |
    nonce u64 | version u32 | hardness u32.
    """

    prev_hash: bytes
    merkle_root: bytes
    timestamp: int
    nonce: int
    version: int = 1
    hardness: int = 0

    def __post_init__(self):
        object.__setattr__(self, "prev_hash", _as_digest(self.prev_hash, "prev_hash"))
        object.__setattr__(self, "merkle_root", _as_digest(self.merkle_root, "merkle_root"))
        object.__setattr__(self, "timestamp", _check_uint(self.timestamp, 64, "timestamp"))
        object.__setattr__(self, "nonce", _check_uint(self.nonce, 64, "nonce"))
        object.__setattr__(self, "version", _check_uint(self.version, 32, "version"))
        object.__setattr__(self, "hardness", _check_uint(self.hardness, 32, "hardness"))

    def serialize(self) -> bytes:
        return struct.pack(
            HEADER_FORMAT,
            self.prev_hash,
            self.merkle_root,
            self.timestamp,
            self.nonce,
            self.version,
            self.hardness,
        )

    @classmethod
    def deserialize(cls, raw: bytes) -> "BlockHeader":
        if len(raw) != HEADER_SIZE:
            raise DomainError(f"header must be {HEADER_SIZE} bytes")
        return cls(*struct.unpack(HEADER_FORMAT, raw))

    def classical_id(self) -> bytes:
        return hashlib.sha256(self.serialize()).digest()

    @property
    def id_hex(self) -> str:
        return self.classical_id().hex()

    def to_dict(self) -> dict:
        return {
            "prev_hash": self.prev_hash.hex(),
            "merkle_root": self.merkle_root.hex(),
            "timestamp": self.timestamp,
            "nonce": self.nonce,
            "version": self.version,
            "hardness": self.hardness,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BlockHeader":
        if not isinstance(data, dict):
            raise DomainError("header must be a JSON object")
        missing = {"prev_hash", "merkle_root", "timestamp", "nonce"} - set(data)
        if missing:
            raise DomainError(f"header missing fields: {sorted(missing)}")
        return cls(
            prev_hash=data["prev_hash"],
            merkle_root=data["merkle_root"],
            timestamp=data["timestamp"],
            nonce=data["nonce"],
            version=data.get("version", 1),
            hardness=data.get("hardness", 0),
        )

    def with_nonce(self, nonce: int) -> "BlockHeader":
        return BlockHeader(self.prev_hash, self.merkle_root, self.timestamp, nonce,
                           self.version, self.hardness)


# ---------------------------------------------------------------------------
# Difficulty
# ---------------------------------------------------------------------------


def required_zeros(target: int, n_h: int = 256) -> int:
    """Number of leading zero bits a hash below ``target`` must have."""
    target, n_h = int(target), int(n_h)
    if n_h < 0:
        raise DomainError("n_h must be nonnegative")
    if not 0 <= target < (1 << n_h):
        raise DomainError("target must satisfy 0 <= target < 2**n_h")
    # math.log2 is exact enough on arbitrary-size ints for rounding purposes.
    return int(round(n_h - math.log2(target + 1)))


def target_for_zeros(n_zeros: int, n_h: int = 256) -> int:
    if not 0 <= n_zeros <= n_h:
        raise DomainError("n_zeros must lie in [0, n_h]")
    return (1 << (n_h - n_zeros)) - 1


# ---------------------------------------------------------------------------
# Problem instance derivation
# ---------------------------------------------------------------------------

ENSEMBLES = ("pm1", "biclique")
HYPERPLANE_MODES = ("iid", "j-orthogonal")


@dataclass(frozen=True)
class ChainConfig:
    """Parameters that, together with a header, fix the hash experiment."""

    topology: str = "cubic:2,2,2"
    ensemble: str = "pm1"
    n_h: int | None = None  # defaults to the header hardness
    hyperplanes: str = "iid"
    anneal_time: float = 2.0
    threshold: float = 0.0

    def __post_init__(self):
        if self.ensemble not in ENSEMBLES:
            raise ConfigError(f"unknown ensemble {self.ensemble!r}")
        if self.hyperplanes not in HYPERPLANE_MODES:
            raise ConfigError(f"unknown hyperplane mode {self.hyperplanes!r}")
        make_topology(self.topology)

    def hash_bits(self, header: BlockHeader) -> int:
        n_h = header.hardness if self.n_h is None else self.n_h
        if n_h < 1:
            raise ConfigError("hash needs at least one bit (set n_h or hardness)")
        return n_h

    def to_dict(self) -> dict:
        return {
            "topology": self.topology,
            "ensemble": self.ensemble,
            "n_h": self.n_h,
            "hyperplanes": self.hyperplanes,
            "anneal_time": self.anneal_time,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChainConfig":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    source_id: bytes
    topology: Topology
    couplings: np.ndarray  # (n_edges,) in topology edge order
    fields: np.ndarray  # (n_qubits,), zero in scope
    hyperplanes: np.ndarray  # G, (n_h, n_v)
    signs: np.ndarray  # (n_h,) of +-1
    thresholds: np.ndarray  # W0, (n_h,)
    anneal_time: float

    @property
    def n_h(self) -> int:
        return self.hyperplanes.shape[0]

    @property
    def n_v(self) -> int:
        return self.hyperplanes.shape[1]

    def to_bytes(self) -> bytes:
        """Canonical byte image, used to assert bit-identical re-derivation."""
        parts = [
            self.source_id,
            self.topology.name.encode(),
            np.ascontiguousarray(self.couplings, dtype="<f8").tobytes(),
            np.ascontiguousarray(self.fields, dtype="<f8").tobytes(),
            np.ascontiguousarray(self.hyperplanes, dtype="<f8").tobytes(),
            np.ascontiguousarray(self.signs, dtype="<i1").tobytes(),
            np.ascontiguousarray(self.thresholds, dtype="<f8").tobytes(),
            struct.pack("<d", self.anneal_time),
        ]
        return b"".join(parts)

    def with_signs(self, signs) -> "ProblemInstance":
        signs = np.asarray(signs, dtype=np.int8)
        if signs.shape != self.signs.shape:
            raise ShapeError("sign vector length mismatch")
        return ProblemInstance(self.source_id, self.topology, self.couplings, self.fields,
                               self.hyperplanes, signs, self.thresholds, self.anneal_time)

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id.hex(),
            "topology": self.topology.name,
            "couplings": self.couplings.tolist(),
            "hyperplanes": self.hyperplanes.tolist(),
            "signs": self.signs.astype(int).tolist(),
            "thresholds": self.thresholds.tolist(),
            "anneal_time": self.anneal_time,
        }


def keyed_rng(key: bytes, tag: str) -> np.random.Generator:
    """PCG64 stream keyed by SHA-256(key | tag); one tag per consumer."""
    digest = hashlib.sha256(key + b"|" + tag.encode()).digest()
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int.from_bytes(digest, "big"))))


def draw_couplings(topology: Topology, ensemble: str, rng: np.random.Generator) -> np.ndarray:
    signs = rng.choice(np.array([-1.0, 1.0]), size=topology.n_edges)
    if ensemble == "pm1":
        return signs
    if ensemble == "biclique":
        # side length n of K_{n,n} recovered from the qubit count (4n qubits)
        n = topology.n_qubits // 4
        scale = np.where(np.asarray(topology.chain_mask), 1.0, 1.0 / math.sqrt(max(n, 1)))
        return signs * scale
    raise ConfigError(f"unknown ensemble {ensemble!r}")


def orthogonalize_rows(G: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Project each row of G onto the complement of J."""
    J = np.asarray(J, dtype=float)
    norm2 = float(J @ J)
    if norm2 == 0.0:
        return G.copy()
    out = G - np.outer(G @ J, J) / norm2
    # one refinement pass drives residual inner products to ~1e-16
    out -= np.outer(out @ J, J) / norm2
    return out


def derive_instance(header: BlockHeader, config: ChainConfig) -> ProblemInstance:
    topo = make_topology(config.topology)
    cid = header.classical_id()
    n_h = config.hash_bits(header)
    J = draw_couplings(topo, config.ensemble, keyed_rng(cid, "J"))
    G = keyed_rng(cid, "G").standard_normal((n_h, topo.n_edges))
    if config.hyperplanes == "j-orthogonal":
        if topo.n_edges < 2:
            raise ConfigError("J-orthogonal hyperplanes need at least two edges")
        G = orthogonalize_rows(G, J)
    if not np.all(np.any(G != 0.0, axis=1)):
        raise ConfigError("degenerate hyperplane row")
    signs = keyed_rng(cid, "signs").choice(np.array([-1, 1], dtype=np.int8), size=n_h)
    thresholds = np.full(n_h, float(config.threshold))
    return ProblemInstance(
        source_id=cid,
        topology=topo,
        couplings=J,
        fields=np.zeros(topo.n_qubits),
        hyperplanes=G,
        signs=signs.astype(np.int8),
        thresholds=thresholds,
        anneal_time=float(config.anneal_time),
    )


# ---------------------------------------------------------------------------
# Projection and digitalization
# ---------------------------------------------------------------------------


def project(V, G) -> np.ndarray:
    """Unsigned witnesses (1/N_V) G V; works on a trailing batch axis too."""
    V = np.asarray(V, dtype=float)
    G = np.asarray(G, dtype=float)
    if V.shape[-1] != G.shape[1]:
        raise ShapeError(f"feature length {V.shape[-1]} != hyperplane width {G.shape[1]}")
    return (V @ G.T) / G.shape[1]


def compute_witnesses(V, instance: ProblemInstance, signs=None) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if np.any(np.abs(V) > 1.0 + 1e-12):
        raise DomainError("correlations must satisfy |V| <= 1")
    s = instance.signs if signs is None else np.asarray(signs)
    if s.shape[-1] != instance.n_h:
        raise ShapeError("sign vector length mismatch")
    return project(V, instance.hyperplanes) * s


def digitalize(W, W0) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    W0 = np.broadcast_to(np.asarray(W0, dtype=float), W.shape)
    return W >= W0


def bits_to_hex(bits) -> str:
    """MSB-first hex; a trailing partial nibble is zero-padded on the right."""
    bits = [int(bool(b)) for b in np.asarray(bits).ravel()]
    if not bits:
        return ""
    pad = (-len(bits)) % 4
    bits = bits + [0] * pad
    digits = []
    for k in range(0, len(bits), 4):
        a, b, c, d = bits[k:k + 4]
        digits.append("0123456789abcdef"[(a << 3) | (b << 2) | (c << 1) | d])
    return "".join(digits)


def hex_to_bits(text: str, n_bits: int) -> np.ndarray:
    value = int(text, 16) if text else 0
    total = 4 * len(text)
    if n_bits > total:
        raise DomainError("hex string too short")
    return np.array([(value >> (total - 1 - k)) & 1 for k in range(n_bits)], dtype=bool)


# ---------------------------------------------------------------------------
# Confidence arithmetic
# ---------------------------------------------------------------------------


def bit_error_rate(d):
    """Probability a Gaussian witness lands on the wrong side: erfc(d)/2."""
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("distance must be nonnegative")
    out = 0.5 * special.erfc(arr)
    return float(out) if out.ndim == 0 else out


def distances(W, W0, sigma) -> np.ndarray:
    """|W - W0| / (sqrt(2) sigma); zero sigma gives infinite distance."""
    W = np.asarray(W, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), W.shape)
    gap = np.abs(W - np.asarray(W0, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        d = gap / (math.sqrt(2.0) * sigma)
    # 0/0 (on the hyperplane with no noise) is maximally uncertain
    return np.where(np.isnan(d), 0.0, d)


def log2_confidences(d) -> tuple[np.ndarray, np.ndarray]:
    """(log2 P, log2 (1-P)) per bit from distances, with P floored at 1e-300."""
    x = math.sqrt(2.0) * np.asarray(d, dtype=float)
    floor = math.log2(P_FLOOR)
    lp = np.maximum(special.log_ndtr(x) / _LN2, floor)
    lq = np.maximum(special.log_ndtr(-x) / _LN2, floor)
    return lp, lq


def _log2_pair_from_eps(eps) -> tuple[np.ndarray, np.ndarray]:
    eps = np.asarray(eps, dtype=float)
    floor = math.log2(P_FLOOR)
    with np.errstate(divide="ignore"):
        lp = np.maximum(np.log1p(-eps) / _LN2, floor)
        lq = np.maximum(np.log2(eps), floor)
    return lp, lq


@dataclass(frozen=True, eq=False)
class WitnessReport:
    witnesses: np.ndarray
    sigma: np.ndarray
    distances: np.ndarray
    bits: np.ndarray
    p_bit: np.ndarray
    thresholds: np.ndarray | None = None
    # exact 1 - p_bit, kept separately so tiny error rates survive
    error_rates: np.ndarray | None = None

    @classmethod
    def from_witnesses(cls, W, sigma, W0=0.0) -> "WitnessReport":
        W = np.atleast_1d(np.asarray(W, dtype=float))
        W0 = np.broadcast_to(np.asarray(W0, dtype=float), W.shape).copy()
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), W.shape).copy()
        if np.any(sigma < 0):
            raise DomainError("sigma must be nonnegative")
        d = distances(W, W0, sigma)
        eps = np.atleast_1d(bit_error_rate(d))
        return cls(W, sigma, d, digitalize(W, W0), 1.0 - eps, W0, eps)

    @property
    def n_bits(self) -> int:
        return int(np.asarray(self.bits).shape[0])

    def log2_terms(self) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(self.p_bit, dtype=float)
        if np.any(~(p > 0)) or np.any(p > 1):
            raise DomainError("invalid report: per-bit confidence outside (0, 1]")
        eps = 1.0 - p if self.error_rates is None else np.asarray(self.error_rates)
        return _log2_pair_from_eps(eps)


@dataclass(frozen=True)
class ConfidenceSummary:
    p_total: float
    n_bits: float
    role: str


def _summary(log2_terms, role, cap) -> ConfidenceSummary:
    n = float(-np.sum(log2_terms))
    n = min(max(n, 0.0), cap)
    return ConfidenceSummary(p_total=2.0 ** (-n), n_bits=n, role=role)


def miner_confidence(report: WitnessReport, cap: float = N_BITS_CAP) -> ConfidenceSummary:
    lp, _ = report.log2_terms()
    return _summary(lp, "miner", cap)


def validator_terms(lp, lq, own_bits, received_bits) -> np.ndarray:
    """Per-bit log2 factors: log2 P where bits match, log2 (1-P) otherwise."""
    own_bits = np.asarray(own_bits, dtype=bool)
    received_bits = np.asarray(received_bits, dtype=bool)
    if own_bits.shape != received_bits.shape:
        raise ShapeError("bit vectors differ in length")
    return np.where(own_bits == received_bits, lp, lq)


def validator_confidence(own: WitnessReport, received_bits: Sequence[bool],
                         cap: float = N_BITS_CAP) -> ConfidenceSummary:
    received = np.asarray(received_bits, dtype=bool)
    if received.shape != np.asarray(own.bits).shape:
        raise ShapeError("received hash length differs from own report")
    lp, lq = own.log2_terms()
    return _summary(validator_terms(lp, lq, own.bits, received), "validator", cap)
