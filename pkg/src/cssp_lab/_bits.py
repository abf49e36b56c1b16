"""64-bit mixing primitives behind the simulated VRF.

Everything here is plain-integer Python so results are exact and portable.
The jitted kernels in ``_sim_kernel`` re-implement the same arithmetic on
``uint64``; ``tests/test_backends.py`` pins the two implementations to each
other word for word.

Construction: chained splitmix64 finalizers absorbing (key, message, tag,
index). This is a statistical PRF, not a cryptographic one -- the protocol
model only needs per-(account, seed) independent uniforms.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15  # 2^64 / phi, the splitmix64 stream increment
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# Domain-separation tags for the per-seed streams.
TAG_CRED = 1  # an account's credential for a seed
TAG_SPACING = 2  # ladder spacing uniforms (order-statistic increments)
TAG_LADDER_CRED = 3  # credential identities of ladder entries


def mix64(z: int) -> int:
    """splitmix64 finalizer: a full-avalanche 64-bit permutation."""
    z &= MASK64
    z ^= z >> 30
    z = (z * _M1) & MASK64
    z ^= z >> 27
    z = (z * _M2) & MASK64
    return z ^ (z >> 31)


def stream64(key: int, index: int) -> int:
    """index-th word of the splitmix64 stream seeded by ``key``."""
    return mix64((key + (index + 1) * GOLDEN) & MASK64)


def prf64(k0: int, k1: int, k2: int, k3: int, msg: int, tag: int, index: int) -> int:
    """Keyed PRF word for (message, tag, index) under a 256-bit key."""
    z = mix64((msg ^ k0) & MASK64)
    z = mix64(z ^ k1 ^ ((tag * GOLDEN) & MASK64))
    z = mix64(z ^ k2 ^ ((index * _M1) & MASK64))
    return mix64(z ^ k3)


def unit_from_bits(bits: int) -> float:
    """Map a 64-bit word into the open interval (0, 1).

    Uses the top 52 bits: ((n >> 12) + 0.5) / 2^52 is exact in float64 and
    stays strictly inside (0, 1) -- the naive (n + 0.5) / 2^64 rounds to 1.0
    for the largest words. Smallest representable credential: 2^-53, so -log
    stays finite everywhere.
    """
    return ((bits >> 12) + 0.5) * 2.0**-52


def stream64_array(key: int, count: int) -> np.ndarray:
    """Vectorized ``stream64`` for indices 0..count-1 (uint64 output)."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(key) + idx * np.uint64(GOLDEN)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    return z ^ (z >> np.uint64(31))
