"""Resampling kernels for the detection tests.

The bootstrap and permutation loops dominate detection runtime, so they get
jitted implementations with counter-based sub-seeds: replicate ``j`` of seed
``s`` always uses the stream keyed ``mix(s + (j+1) * GOLDEN)``, which makes
results independent of how the replicate range is chunked across threads.

The NumPy fallbacks are statistically equivalent but draw through NumPy's
own generators where sequential mixing would be too slow in pure Python, so
p-values can differ between backends within Monte Carlo error. Within one
backend everything is deterministic given the seed.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend
from ._bits import GOLDEN, MASK64, mix64, stream64_array

njit = backend.njit

_U = np.uint64
_GOLD = _U(GOLDEN)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_S30, _S27, _S31 = _U(30), _U(27), _U(31)
_TWO_NEG64 = 2.0**-64
_TWO_NEG52 = 2.0**-52
_S12 = _U(12)


@njit(cache=True, nogil=True, inline="always")
def _mix(z):
    z = z ^ (z >> _S30)
    z = z * _M1
    z = z ^ (z >> _S27)
    z = z * _M2
    return z ^ (z >> _S31)


def ks_exp_sorted(sorted_x: np.ndarray, rate: float) -> float:
    """Two-sided KS distance of a sorted sample against Exp(rate)."""
    n = sorted_x.shape[0]
    cdf = -np.expm1(-rate * sorted_x)
    steps = np.arange(1, n + 1, dtype=float) / n
    d_plus = float(np.max(steps - cdf))
    d_minus = float(np.max(cdf - (steps - 1.0 / n)))
    return max(d_plus, d_minus)


@njit(cache=True, nogil=True)
def _ks_exp_sorted_nb(sorted_x, rate):
    n = sorted_x.shape[0]
    best = 0.0
    for i in range(n):
        cdf = 1.0 - math.exp(-rate * sorted_x[i])
        d_plus = (i + 1.0) / n - cdf
        d_minus = cdf - i / n
        if d_plus > best:
            best = d_plus
        if d_minus > best:
            best = d_minus
    return best


@njit(cache=True, nogil=True)
def _lilliefors_chunk_nb(n, start, stop, seed):
    """Null statistics for replicates [start, stop): draw Exp(1) of size n,
    refit the rate by maximum likelihood, return the KS distance."""
    out = np.empty(stop - start)
    x = np.empty(n)
    for j in range(start, stop):
        key = _mix(seed + _U(j + 1) * _GOLD)
        total = 0.0
        for i in range(n):
            u = ((_mix(key + _U(i + 1) * _GOLD) >> _S12) + 0.5) * _TWO_NEG52
            v = -math.log(u)
            x[i] = v
            total += v
        rate = n / total
        x_sorted = np.sort(x)
        out[j - start] = _ks_exp_sorted_nb(x_sorted, rate)
    return out


def _lilliefors_chunk_np(n: int, start: int, stop: int, seed: int) -> np.ndarray:
    out = np.empty(stop - start)
    for j in range(start, stop):
        key = mix64((seed + (j + 1) * GOLDEN) & MASK64)
        u = ((stream64_array(key, n) >> np.uint64(12)).astype(np.float64) + 0.5) * _TWO_NEG52
        x = -np.log(u)
        rate = n / float(np.sum(x))
        out[j - start] = ks_exp_sorted(np.sort(x), rate)
    return out


def lilliefors_chunk(n: int, start: int, stop: int, seed: int) -> np.ndarray:
    # NumPy's sort dominates this workload and beats the jitted loop about
    # 2x at n = 1e6 (see benchmarks/bench_backends.py), so both backends
    # take the vectorized path; the jitted twin stays as a cross-check.
    return _lilliefors_chunk_np(n, start, stop, seed)


@njit(cache=True, nogil=True)
def _spearman_perm_chunk_nb(rb, start, stop, seed):
    """Permutation sums S_p = sum_i i * rb[pi(i)] for p in [start, stop).

    rb must be the second coordinate's ranks arranged by the first
    coordinate's rank order (so the first coordinate is implicitly
    0..m-1). Inside-out Fisher-Yates builds each permutation from scratch,
    so every p is self-contained and chunking can never change a result.
    int64-exact accumulation.
    """
    m = rb.shape[0]
    out = np.empty(stop - start, dtype=np.int64)
    c = np.empty_like(rb)
    for p in range(start, stop):
        s = _mix(seed + _U(p + 1) * _GOLD)
        c[0] = rb[0]
        for i in range(1, m):
            s = _mix(s + _GOLD)
            # float64(s) can round up to 2^64 exactly; clamp the index.
            j = np.int64(np.float64(s) * _TWO_NEG64 * (i + 1.0))
            if j > i:
                j = np.int64(i)
            c[i] = c[j]
            c[j] = rb[i]
        acc = np.int64(0)
        for i in range(m):
            acc += np.int64(i) * np.int64(c[i])
        out[p - start] = acc
    return out


def _spearman_perm_chunk_np(
    rb: np.ndarray, start: int, stop: int, seed: int
) -> np.ndarray:
    m = rb.shape[0]
    idx = np.arange(m, dtype=np.int64)
    vals = rb.astype(np.int64)
    out = np.empty(stop - start, dtype=np.int64)
    for p in range(start, stop):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(p,))
        )
        out[p - start] = int(np.dot(idx, vals[rng.permutation(m)]))
    return out


def spearman_perm_chunk(
    rb: np.ndarray, start: int, stop: int, seed: int
) -> np.ndarray:
    if backend.HAS_NUMBA:
        return _spearman_perm_chunk_nb(rb.astype(np.int32), start, stop, _U(seed))
    return _spearman_perm_chunk_np(rb, start, stop, seed)


@njit(cache=True, nogil=True)
def _envelope_scan_nb(sorted_x, gammas, delta):
    """min over gamma of the worst excursion outside the fluctuation band."""
    n = sorted_x.shape[0]
    best = np.inf
    best_gamma = gammas[0]
    for g in range(gammas.shape[0]):
        hi_rate = (1.0 + delta) * gammas[g]
        lo_rate = (1.0 - delta) * gammas[g]
        worst = 0.0
        for i in range(n):
            hi = 1.0 - math.exp(-hi_rate * sorted_x[i])
            lo = 1.0 - math.exp(-lo_rate * sorted_x[i])
            over = (i + 1.0) / n - hi
            under = lo - i / n
            if over > worst:
                worst = over
            if under > worst:
                worst = under
            if worst >= best:
                break
        if worst < best:
            best = worst
            best_gamma = gammas[g]
    return best, best_gamma


def _envelope_scan_np(
    sorted_x: np.ndarray, gammas: np.ndarray, delta: float
) -> tuple[float, float]:
    n = sorted_x.shape[0]
    hi_steps = np.arange(1, n + 1, dtype=float) / n
    lo_steps = np.arange(0, n, dtype=float) / n
    best = np.inf
    best_gamma = float(gammas[0])
    for g in gammas:
        hi = -np.expm1(-(1.0 + delta) * g * sorted_x)
        lo = -np.expm1(-(1.0 - delta) * g * sorted_x)
        worst = max(float(np.max(hi_steps - hi)), float(np.max(lo - lo_steps)), 0.0)
        if worst < best:
            best = worst
            best_gamma = float(g)
    return best, best_gamma


def envelope_scan(
    sorted_x: np.ndarray, gammas: np.ndarray, delta: float
) -> tuple[float, float]:
    if backend.HAS_NUMBA:
        v, g = _envelope_scan_nb(sorted_x, np.asarray(gammas, dtype=float), delta)
        return float(v), float(g)
    return _envelope_scan_np(sorted_x, np.asarray(gammas, dtype=float), delta)


def exp_sample(rate: float, n: int, seed: int) -> np.ndarray:
    """Deterministic Exp(rate) sample from the counter-based stream."""
    bits = stream64_array(seed, n)
    u = ((bits >> np.uint64(12)).astype(np.float64) + 0.5) * _TWO_NEG52
    return -np.log(u) / rate
