"""Counter-based keyed randomness.

Every random quantity in a simulation is a pure function of a key tuple
(seed, tag, stakeholder, block, bit). Draws therefore do not depend on the
order in which validations happen, vectorize trivially, and can be
recomputed later (e.g. when re-verifying a stored chain).

The mixer is splitmix64's finalizer applied along the key; uniforms use the
top 53 bits, offset by half an ulp so they lie strictly inside (0, 1).
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy import special

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(k) for k in (30, 27, 31, 11))


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def tag_word(tag: str) -> int:
    return int.from_bytes(hashlib.sha256(tag.encode()).digest()[:8], "big")


def keyed_words(seed: int, tag: str, *parts) -> np.ndarray:
    """uint64 words for the broadcast of integer key ``parts``."""
    arrays = np.broadcast_arrays(*[np.asarray(p, dtype=np.int64) for p in parts]) if parts \
        else [np.zeros((), dtype=np.int64)]
    with np.errstate(over="ignore"):
        h = _mix(np.full(arrays[0].shape, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF),
                         dtype=np.uint64))
        h = _mix(h ^ np.uint64(tag_word(tag)))
        for a in arrays:
            h = _mix(h ^ a.astype(np.uint64))
    return h


def keyed_uniform(seed: int, tag: str, *parts) -> np.ndarray:
    h = keyed_words(seed, tag, *parts)
    return ((h >> _S11).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def keyed_normal(seed: int, tag: str, *parts) -> np.ndarray:
    return special.ndtri(keyed_uniform(seed, tag, *parts))


def keyed_choice(seed: int, tag: str, n: int, *parts) -> np.ndarray:
    """Uniform integers in [0, n)."""
    u = keyed_uniform(seed, tag, *parts)
    return np.minimum((u * n).astype(np.int64), n - 1)


def keyed_generator(seed: int, tag: str, *parts) -> np.random.Generator:
    """A numpy Generator seeded from a key; for bulk draws without structure."""
    words = keyed_words(seed, tag, *[int(p) for p in parts])
    return np.random.Generator(np.random.PCG64(int(words)))
