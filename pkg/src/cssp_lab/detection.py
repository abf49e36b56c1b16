"""The onlooker's statistical tests over winning-score series.

Tests consume only the observer view -- the ordered winning scores -- never
hidden trace fields. The one exception, ``dominance_test``, is an explicitly
labeled hidden-state diagnostic over the adversary's own reset-round
broadcasts.

Nulls and calibrations:

* distribution test: KS distance against the MLE-fitted exponential, with a
  parametric-bootstrap threshold (Lilliefors-style). The statistic is
  pivotal in the fitted rate (rescaling a sample rescales its MLE), so the
  bootstrap draws at unit rate and the null table caches per sample size.
* correlation test: rank correlation of consecutive rounds against a
  permutation null.
* envelope test: empirical CDF containment between two exponential CDFs a
  multiplicative stake-fluctuation band apart, DKW-padded, searched over a
  rate grid around the MLE. DKW makes it conservative.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _stat_kernels as kern
from .core import exp_cdf, subsystem_seed

MIN_SERIES_LENGTH = 1000

_WORKERS = max(1, min(2, os.cpu_count() or 1))


class InsufficientSampleError(ValueError):
    """The series is too short for the requested test."""


@dataclass(frozen=True)
class ScoreSeries:
    """The observer's view: ordered winning scores, one per round."""

    scores: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.scores, dtype=float)
        if arr.ndim != 1:
            raise ValueError("score series must be one-dimensional")
        if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr < 0.0)):
            raise ValueError("scores must be finite and nonnegative")
        object.__setattr__(self, "scores", arr)

    def __len__(self) -> int:
        return len(self.scores)

    @classmethod
    def from_trace(cls, trace) -> "ScoreSeries":
        return cls(trace.winning_score.copy())

    @classmethod
    def from_csv(cls, path: str) -> "ScoreSeries":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "round,winning_score":
                raise ValueError(f"unexpected observer CSV header: {header!r}")
            scores = [float(line.split(",")[1]) for line in fh if line.strip()]
        return cls(np.asarray(scores))

    @classmethod
    def from_jsonl(cls, path: str) -> "ScoreSeries":
        from .protocol import read_trace_jsonl

        return cls(np.asarray([r["winning_score"] for r in read_trace_jsonl(path)]))


@dataclass
class DetectionReport:
    """Outcome of one statistical test."""

    test: str
    statistic: float
    threshold: float
    verdict: str  # "consistent" | "reject"
    sample_size: int
    p_value: Optional[float] = None
    fitted_gamma: Optional[float] = None
    parameters: dict = field(default_factory=dict)

    @property
    def rejected(self) -> bool:
        return self.verdict == "reject"

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "p_value": self.p_value,
            "fitted_gamma": self.fitted_gamma,
            "verdict": self.verdict,
            "sample_size": self.sample_size,
            "parameters": self.parameters,
        }


def mle_rate(series: ScoreSeries) -> float:
    """Maximum-likelihood exponential rate: n over the score total."""
    n = len(series)
    if n == 0:
        raise InsufficientSampleError("empty series")
    total = float(np.sum(series.scores))
    if total <= 0.0:
        raise ValueError("degenerate series: all scores are zero")
    return n / total


def _require_length(series: ScoreSeries, test: str) -> None:
    if len(series) < MIN_SERIES_LENGTH:
        raise InsufficientSampleError(
            f"{test} needs at least {MIN_SERIES_LENGTH} rounds, got {len(series)}"
        )


def _chunk_ranges(total: int) -> list[tuple[int, int]]:
    if _WORKERS == 1 or total < 2 * _WORKERS:
        return [(0, total)]
    edges = np.linspace(0, total, _WORKERS + 1, dtype=int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if a < b]


def _run_chunked(fn, total: int) -> np.ndarray:
    """Run replicate ranges concurrently; sub-seeds are pre-assigned per
    replicate index, so the merge order never changes the result."""
    ranges = _chunk_ranges(total)
    if len(ranges) == 1:
        return fn(*ranges[0])
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        parts = list(pool.map(lambda se: fn(*se), ranges))
    return np.concatenate(parts)


_lilliefors_cache: dict[tuple[int, int, int], np.ndarray] = {}


def lilliefors_null_statistics(n: int, reps: int, seed: int) -> np.ndarray:
    """Sorted bootstrap null KS statistics for sample size ``n``.

    Drawn at unit rate: the statistic's law does not depend on the true rate
    (the MLE refit rescales every sample to unit mean), so one table serves
    every fitted gamma. Cached per (n, reps, seed).
    """
    key = (n, reps, seed)
    cached = _lilliefors_cache.get(key)
    if cached is None:
        stats = _run_chunked(
            lambda a, b: kern.lilliefors_chunk(n, a, b, seed), reps
        )
        cached = np.sort(stats)
        _lilliefors_cache[key] = cached
    return cached


def _order_statistic_threshold(sorted_null: np.ndarray, significance: float) -> float:
    """k-th order statistic rule: exact (reps+1-k)/(reps+1) rejection rate."""
    reps = len(sorted_null)
    k = math.ceil((reps + 1) * (1.0 - significance))
    k = min(max(k, 1), reps)
    return float(sorted_null[k - 1])


def distribution_test(
    series: ScoreSeries,
    significance: float = 0.01,
    bootstrap_reps: int = 1000,
    seed: int = 0,
) -> DetectionReport:
    """Are the winning scores i.i.d. exponential with some unknown rate?

    Fits the rate by maximum likelihood, measures the KS distance, and
    compares against the bootstrap null of the same two-step procedure.
    """
    _require_length(series, "distribution test")
    if not 0.0 < significance < 1.0:
        raise ValueError("significance must lie in (0, 1)")
    n = len(series)
    gamma_hat = mle_rate(series)
    statistic = kern.ks_exp_sorted(np.sort(series.scores), gamma_hat)
    null = lilliefors_null_statistics(n, bootstrap_reps, seed)
    threshold = _order_statistic_threshold(null, significance)
    p_value = (1.0 + float(np.sum(null >= statistic))) / (bootstrap_reps + 1.0)
    return DetectionReport(
        test="distribution",
        statistic=statistic,
        threshold=threshold,
        verdict="reject" if statistic > threshold else "consistent",
        sample_size=n,
        p_value=p_value,
        fitted_gamma=gamma_hat,
        parameters={
            "significance": significance,
            "bootstrap_reps": bootstrap_reps,
            "seed": seed,
        },
    )


def _ordinal_ranks(x: np.ndarray) -> np.ndarray:
    """Ranks 0..m-1 with stable order on ties (scores tie with probability 0)."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.int64)
    ranks[order] = np.arange(len(x), dtype=np.int64)
    return ranks


def correlation_test(
    series: ScoreSeries,
    significance: float = 0.01,
    permutations: int = 10_000,
    seed: int = 0,
) -> DetectionReport:
    """Are consecutive winning scores independent?

    Spearman rank correlation over the overlapping (round r, round r+1)
    pairs; two-sided p-value from random permutations of one coordinate.
    """
    _require_length(series, "correlation test")
    if permutations < 1000:
        raise ValueError("at least 1000 permutations are required")
    x = series.scores
    m = len(x) - 1
    rb = _ordinal_ranks(x[1:])
    # Arrange the second coordinate's ranks by the first coordinate's rank
    # order (= its stable argsort); the first coordinate is then implicitly
    # 0..m-1.
    arranged = rb[np.argsort(x[:-1], kind="stable")]

    idx = np.arange(m, dtype=np.int64)
    s_obs = int(np.dot(idx, arranged))
    mu = (m - 1) / 2.0
    var = (m * m - 1) / 12.0
    center = m * mu * mu
    scale = m * var
    rho_obs = (s_obs - center) / scale

    sums = _run_chunked(
        lambda a, b: kern.spearman_perm_chunk(arranged, a, b, seed), permutations
    )
    rho_perm = (sums.astype(float) - center) / scale
    extreme = int(np.sum(np.abs(rho_perm) >= abs(rho_obs)))
    p_value = (1.0 + extreme) / (permutations + 1.0)
    abs_sorted = np.sort(np.abs(rho_perm))
    threshold = _order_statistic_threshold(abs_sorted, significance)
    sign = "negative" if rho_obs < 0 else ("positive" if rho_obs > 0 else "zero")
    return DetectionReport(
        test="correlation",
        statistic=rho_obs,
        threshold=threshold,
        verdict="reject" if p_value < significance else "consistent",
        sample_size=len(series),
        p_value=p_value,
        fitted_gamma=None,
        parameters={
            "significance": significance,
            "permutations": permutations,
            "seed": seed,
            "sign": sign,
        },
    )


def dkw_epsilon(n: int, significance: float, one_sided: bool = False) -> float:
    """Dvoretzky-Kiefer-Wolfowitz uniform deviation at the given level."""
    num = 1.0 if one_sided else 2.0
    return math.sqrt(math.log(num / significance) / (2.0 * n))


def envelope_test(
    series: ScoreSeries,
    delta: float,
    significance: float = 0.01,
    gamma_grid: int = 512,
) -> DetectionReport:
    """Does some baseline rate put the empirical CDF inside the 1 +/- delta
    stake-fluctuation envelope?

    Consistent iff some rate gamma on a geometric grid around the MLE keeps
    every empirical CDF point within [Exp((1-delta) gamma) - eps,
    Exp((1+delta) gamma) + eps], eps the DKW deviation. Any series consistent
    at delta is consistent at every wider band.
    """
    _require_length(series, "envelope test")
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    n = len(series)
    gamma_hat = mle_rate(series)
    gammas = np.geomspace(gamma_hat / 2.0, 2.0 * gamma_hat, gamma_grid)
    sorted_x = np.sort(series.scores)
    statistic, best_gamma = kern.envelope_scan(sorted_x, gammas, delta)
    threshold = dkw_epsilon(n, significance)
    return DetectionReport(
        test="envelope",
        statistic=statistic,
        threshold=threshold,
        verdict="reject" if statistic > threshold else "consistent",
        sample_size=n,
        p_value=None,
        fitted_gamma=best_gamma,
        parameters={
            "significance": significance,
            "delta": delta,
            "gamma_grid": gamma_grid,
        },
    )


def profitability(trace, alpha: float) -> tuple[float, float]:
    """Adversary win fraction and its excess over the stake share."""
    win_fraction = trace.win_fraction()
    return win_fraction, win_fraction - alpha


def reset_broadcast_series(trace) -> np.ndarray:
    """Adversary broadcast scores at reset rounds, one entry per reset round.

    Hidden-state diagnostic input for ``dominance_test``; requires the full
    trace, not the observer view. Reset rounds where the adversary stayed
    silent appear as +inf -- a missing broadcast can only make the score
    distribution heavier, so it belongs in the denominator.
    """
    scores = trace.adversary_broadcast[trace.is_reset].copy()
    scores[np.isnan(scores)] = np.inf
    return scores


def dominance_test(
    reset_series: np.ndarray,
    alpha: float,
    significance: float = 0.01,
) -> DetectionReport:
    """One-sided check that reset-round broadcasts dominate Exp(alpha).

    Dominance means P[broadcast < z] never exceeds the Exp(alpha) CDF; the
    statistic is the worst upward excursion of the empirical sub-CDF (silent
    rounds count as +inf), compared to a one-sided DKW deviation.
    """
    x = np.asarray(reset_series, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < 0.0):
        raise ValueError("reset series must be nonnegative (inf marks silence)")
    n = len(x)
    if n < MIN_SERIES_LENGTH:
        raise InsufficientSampleError(
            f"dominance test needs at least {MIN_SERIES_LENGTH} reset rounds, got {n}"
        )
    x = np.sort(x)
    finite = x[np.isfinite(x)]
    if len(finite):
        cdf = exp_cdf(alpha, finite)
        ranks = np.arange(1, len(finite) + 1, dtype=float) / n
        statistic = float(np.max(ranks - cdf))
    else:
        statistic = 0.0
    threshold = dkw_epsilon(n, significance, one_sided=True)
    return DetectionReport(
        test="dominance",
        statistic=statistic,
        threshold=threshold,
        verdict="reject" if statistic > threshold else "consistent",
        sample_size=n,
        p_value=None,
        fitted_gamma=None,
        parameters={"significance": significance, "alpha": alpha},
    )


@dataclass
class Theorem51Report:
    """Synthetic check of the undetectable-profit algebra.

    An independent adversary at rate alpha+epsilon against honest stake
    1-alpha must produce a minimum distributed Exp(1+epsilon) and win with
    frequency (alpha+epsilon)/(1+epsilon).
    """

    alpha: float
    epsilon: float
    samples: int
    win_frequency: float
    expected_win_frequency: float
    win_tolerance: float
    ks_statistic: float
    ks_critical: float
    win_ok: bool
    ks_ok: bool

    @property
    def passed(self) -> bool:
        return self.win_ok and self.ks_ok

    def to_dict(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def theorem51_consistency_check(
    alpha: float,
    epsilon: float,
    samples: int = 1_000_000,
    significance: float = 0.01,
    seed: int = 0,
) -> Theorem51Report:
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    honest = kern.exp_sample(1.0 - alpha, samples, subsystem_seed(seed, 1))
    adversary = kern.exp_sample(alpha + epsilon, samples, subsystem_seed(seed, 2))
    win_frequency = float(np.mean(adversary < honest))
    expected = (alpha + epsilon) / (1.0 + epsilon)
    tolerance = 3.0 * math.sqrt(expected * (1.0 - expected) / samples)
    minima = np.sort(np.minimum(honest, adversary))
    ks = kern.ks_exp_sorted(minima, 1.0 + epsilon)
    critical = math.sqrt(math.log(2.0 / significance) / 2.0) / math.sqrt(samples)
    return Theorem51Report(
        alpha=alpha,
        epsilon=epsilon,
        samples=samples,
        win_frequency=win_frequency,
        expected_win_frequency=expected,
        win_tolerance=tolerance,
        ks_statistic=ks,
        ks_critical=critical,
        win_ok=abs(win_frequency - expected) <= tolerance,
        ks_ok=ks < critical,
    )
