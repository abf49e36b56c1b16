"""Numeric and sampling primitives for the self-selection game.

The scoring rule is ``score = -ln(credential) / stake``: a uniform credential
then scores exponentially with rate equal to the stake, the minimum over
independent players scores exponentially with the summed rate, and an account
wins with probability proportional to its stake. Those three facts carry the
whole protocol, so they each get an explicit helper here alongside the
simulated VRF and the adversary's order-statistic score ladder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ._bits import (
    GOLDEN,
    MASK64,
    TAG_CRED,
    TAG_LADDER_CRED,
    TAG_SPACING,
    mix64,
    prf64,
    stream64,
    unit_from_bits,
)

# Scores and stakes travel as plain floats; validation happens at the
# operation boundary. Stake fractions live in (0, 1]; with fluctuating totals
# an effective per-round rate may reach 1 + delta.
Score = float
Stake = float


@dataclass(frozen=True)
class UnitValue:
    """A value in the open interval (0, 1) plus the bit pattern that made it.

    Seed equality is bit-pattern equality: floats round-trip too loosely to
    key a deterministic VRF, so the originating 64-bit word is carried along.
    """

    value: float
    bits: int

    def __post_init__(self) -> None:
        if not 0.0 < self.value < 1.0:
            raise ValueError(f"unit value must lie in (0, 1), got {self.value}")
        if not 0 <= self.bits <= MASK64:
            raise ValueError("bit pattern must fit in 64 bits")

    @classmethod
    def from_bits(cls, bits: int) -> "UnitValue":
        return cls(unit_from_bits(bits), bits)

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class AccountKey:
    """Opaque 256-bit signing-key stand-in; distinct accounts get distinct keys."""

    words: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.words) != 4 or any(not 0 <= w <= MASK64 for w in self.words):
            raise ValueError("account key is four 64-bit words")

    @classmethod
    def from_int(cls, value: int) -> "AccountKey":
        if value < 0:
            raise ValueError("key integer must be nonnegative")
        return cls(tuple((value >> (64 * i)) & MASK64 for i in range(4)))

    @classmethod
    def derive(cls, seed: int, slot: int) -> "AccountKey":
        """Expand a 64-bit master seed into the slot-th independent key."""
        return cls(tuple(stream64(seed, 4 * slot + i) for i in range(4)))


@dataclass(frozen=True)
class ScoreLadder:
    """First ``K`` order statistics of the adversary's per-seed account scores.

    ``entries[i] - entries[i-1]`` are the realized Exp(rate) spacings, so the
    sequence is strictly increasing and ``entries[0] ~ Exp(rate)``.
    ``credential_bits[i]`` is the credential identity backing entry ``i`` --
    the word that seeds the next round should that entry win.
    """

    rate: float
    entries: np.ndarray
    credential_bits: np.ndarray

    def __len__(self) -> int:
        return len(self.entries)

    def credential(self, index: int) -> UnitValue:
        return UnitValue.from_bits(int(self.credential_bits[index]))


def score_of(credential: UnitValue | float, stake: Stake) -> Score:
    """Score a credential: ``-ln(credential) / stake``.

    Strictly decreasing in the credential and scaling as 1/stake, so lower
    credentials and larger stakes both help win.
    """
    x = float(credential)
    if not 0.0 < x < 1.0:
        raise ValueError(f"credential must lie in (0, 1), got {x}")
    if stake <= 0.0:
        raise ValueError(f"stake must be positive, got {stake}")
    return -math.log(x) / stake


def exp_cdf(rate: float, z) -> float | np.ndarray:
    """CDF of the exponential distribution with the given rate."""
    if rate <= 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0):
        raise ValueError("scores are nonnegative")
    out = -np.expm1(-rate * z)
    return float(out) if out.ndim == 0 else out


def erlang_cdf(shape: int, rate: float, z) -> float | np.ndarray:
    """CDF of the sum of ``shape`` i.i.d. Exp(rate) variables.

    Evaluated as the regularized lower incomplete gamma function P(shape,
    rate*z); ``_erlang_cdf_series`` provides an independent recurrence used in
    tests for shapes up to 64.
    """
    if shape < 1 or int(shape) != shape:
        raise ValueError(f"shape must be a positive integer, got {shape}")
    if rate <= 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0):
        raise ValueError("scores are nonnegative")
    out = special.gammainc(shape, rate * z)
    return float(out) if out.ndim == 0 else out


def _erlang_cdf_series(shape: int, rate: float, z) -> float | np.ndarray:
    """Recurrence form 1 - e^{-x} sum_{k<shape} x^k / k!, for cross-checks."""
    if shape > 64:
        raise ValueError("series recurrence is only validated for shape <= 64")
    x = np.asarray(z, dtype=float) * rate
    term = np.ones_like(x)
    acc = np.ones_like(x)
    for k in range(1, shape):
        term = term * x / k
        acc = acc + term
    out = 1.0 - np.exp(-x) * acc
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def prob_first_smaller(rate_a: float, rate_b: float) -> float:
    """P[X < Y] for independent X ~ Exp(rate_a), Y ~ Exp(rate_b)."""
    if rate_a <= 0.0 or rate_b <= 0.0:
        raise ValueError("rates must be positive")
    return rate_a / (rate_a + rate_b)


def prf_uniform(key: AccountKey, seed: UnitValue) -> UnitValue:
    """Simulated VRF: a deterministic uniform draw for (key, seed).

    Distinct keys give independent-looking streams; the output is itself a
    credential whose bit pattern can seed further evaluations.
    """
    k0, k1, k2, k3 = key.words
    bits = prf64(k0, k1, k2, k3, seed.bits, TAG_CRED, 0)
    return UnitValue.from_bits(bits)


def score_ladder(
    key: AccountKey, seed: UnitValue, stake: Stake, count: int = 16
) -> ScoreLadder:
    """Build the adversary's ordered credential scores for one seed.

    The adversary splits its stake across arbitrarily many accounts, so its
    sorted scores form a Poisson process of rate ``stake``: entry ``i`` is the
    sum of ``i+1`` independent Exp(stake) spacings. Only a prefix matters for
    any decision (see ``strategies.one_lookahead_decide`` for the dominance
    bound); ``count`` truncates there.
    """
    if count < 1:
        raise ValueError("ladder depth must be at least 1")
    if stake <= 0.0:
        raise ValueError(f"stake must be positive, got {stake}")
    k0, k1, k2, k3 = key.words
    entries = np.empty(count, dtype=float)
    creds = np.empty(count, dtype=np.uint64)
    acc = 0.0
    for i in range(count):
        u = unit_from_bits(prf64(k0, k1, k2, k3, seed.bits, TAG_SPACING, i))
        acc += -math.log(u) / stake
        entries[i] = acc
        creds[i] = prf64(k0, k1, k2, k3, seed.bits, TAG_LADDER_CRED, i)
    return ScoreLadder(rate=stake, entries=entries, credential_bits=creds)


def ladder_entry_zero(key: AccountKey, seed_bits: int, stake: Stake) -> float:
    """Score of a seed's first ladder entry without building the ladder."""
    k0, k1, k2, k3 = key.words
    u = unit_from_bits(prf64(k0, k1, k2, k3, seed_bits, TAG_SPACING, 0))
    return -math.log(u) / stake


def derive_master_layout(master_seed: int) -> dict:
    """Expand a 64-bit master seed into all per-run key material.

    Slots are fixed so every consumer (reference engine, jitted kernels,
    stake schedule) sees the same expansion.
    """
    master_seed &= MASK64
    return {
        "adversary": AccountKey.derive(master_seed, 0),
        "honest_b": AccountKey.derive(master_seed, 1),
        "honest_c": AccountKey.derive(master_seed, 2),
        "initial_seed": stream64(master_seed, 12),
        "stake_key": stream64(master_seed, 13),
    }


def subsystem_seed(master_seed: int, label: int) -> int:
    """A 64-bit sub-seed for auxiliary randomness (bootstraps, permutations)."""
    return mix64((master_seed ^ (label * GOLDEN)) & MASK64)
