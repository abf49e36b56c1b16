"""Closed-form side of the lookahead strategy.

Everything in here is derived from the two-state seed chain the one-round
lookahead adversary induces: state C (the seed is a fresh uniform) and state
H (the seed was cherry-picked among several winning credentials). The chain,
the law of the number of winning credentials, the resulting Erlang/exponential
mixture for the winning score, the conditional per-transition distributions,
and the best single-exponential approximation are all computed here with
explicit truncation bounds -- no simulation involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import erlang_cdf, exp_cdf


@dataclass(frozen=True)
class MarkovSpec:
    """Transition probabilities and stationary masses of the seed chain."""

    p_cc: float
    p_ch: float
    p_hc: float
    p_hh: float
    s_c: float
    s_h: float

    def transition_matrix(self) -> np.ndarray:
        return np.array([[self.p_cc, self.p_ch], [self.p_hc, self.p_hh]])

    def stationary(self) -> np.ndarray:
        return np.array([self.s_c, self.s_h])


@dataclass(frozen=True)
class AnalyticDistribution:
    """A CDF on scores with an explicit truncation error bound."""

    cdf: Callable[[np.ndarray], np.ndarray]
    truncation_error_bound: float
    description: str

    def __call__(self, z) -> np.ndarray:
        return self.cdf(np.asarray(z, dtype=float))


class CdfValue(NamedTuple):
    value: float
    error_bound: float


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"adversary stake must lie in (0, 1), got {alpha}")


def markov_chain(alpha: float) -> MarkovSpec:
    """Seed chain of the lookahead strategy at full network visibility.

    From a fresh seed the adversary only gets to pick between futures when at
    least two of its credentials beat the honest minimum, which happens with
    probability alpha^2; a picked seed is spent immediately, so H always
    returns to C.
    """
    _check_alpha(alpha)
    p_ch = alpha * alpha
    s_c = 1.0 / (1.0 + alpha * alpha)
    return MarkovSpec(
        p_cc=1.0 - p_ch,
        p_ch=p_ch,
        p_hc=1.0,
        p_hh=0.0,
        s_c=s_c,
        s_h=1.0 - s_c,
    )


def w_size_pmf(alpha: float, count: int) -> float:
    """P[the adversary holds exactly ``count`` winning credentials] at a fresh seed."""
    _check_alpha(alpha)
    if count < 0 or int(count) != count:
        raise ValueError("count must be a nonnegative integer")
    return alpha**count * (1.0 - alpha)


def _omega_cutoff(alpha: float, tol: float) -> int:
    """Smallest geometric truncation point with dropped mass below ``tol``.

    Each of the two mixture groups drops sum_{w > m} alpha^w (1-alpha)
    = alpha^(m+1), so the combined dropped mass is 2 alpha^(m+1) / (1+alpha^2).
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    m = max(2, math.ceil(math.log(tol * (1.0 - alpha)) / math.log(alpha)))
    while 2.0 * alpha ** (m + 1) / (1.0 + alpha * alpha) >= tol:
        m += 1
    return m


def _mixture_components(alpha: float, tol: float):
    """Weights of the winning-score mixture, truncated at omega_max.

    Group one collects the Erlang components: weight on the i-th order
    statistic Exp_i(1) is sum over omega >= max(i, 2) of alpha^omega
    (1-alpha)/omega, plus the full (1 - alpha^2) honest-looking mass on i=1
    from C->C rounds. Group two collects the biased-round exponentials
    Exp(1 + (omega-1) alpha) with weight alpha^omega (1-alpha).
    """
    omega_max = _omega_cutoff(alpha, tol)
    norm = 1.0 / (1.0 + alpha * alpha)
    geo = np.array([alpha**w * (1.0 - alpha) for w in range(2, omega_max + 1)])

    erlang_w = np.zeros(omega_max)
    erlang_w[0] = 1.0 - alpha * alpha
    for w in range(2, omega_max + 1):
        erlang_w[: w] += geo[w - 2] / w
    biased_rates = np.array([1.0 + (w - 1) * alpha for w in range(2, omega_max + 1)])

    bound = 2.0 * alpha ** (omega_max + 1) * norm
    return norm * erlang_w, norm * geo, biased_rates, bound


def lookahead_mixture_cdf(alpha: float, z: float, tol: float = 1e-10) -> CdfValue:
    """Winning-score CDF under the lookahead strategy, with error bound.

    Evaluates the Erlang/exponential mixture with both geometric sums
    truncated so the dropped mass stays below ``tol``; the returned bound
    covers that truncation.
    """
    _check_alpha(alpha)
    if z < 0.0:
        raise ValueError("scores are nonnegative")
    dist = lookahead_mixture_distribution(alpha, tol)
    return CdfValue(float(dist.cdf(np.asarray([z]))[0]), dist.truncation_error_bound)


def lookahead_mixture_distribution(
    alpha: float, tol: float = 1e-10
) -> AnalyticDistribution:
    """The full mixture law as a vectorized ``AnalyticDistribution``."""
    _check_alpha(alpha)
    erlang_w, biased_w, biased_rates, bound = _mixture_components(alpha, tol)

    def cdf(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for i, w in enumerate(erlang_w):
            out += w * erlang_cdf(i + 1, 1.0, z)
        for w, rate in zip(biased_w, biased_rates):
            out += w * exp_cdf(rate, z)
        return out

    return AnalyticDistribution(
        cdf=cdf,
        truncation_error_bound=bound,
        description=f"lookahead winning-score mixture (alpha={alpha})",
    )


def conditional_cdfs(
    alpha: float, tol: float = 1e-10
) -> dict[str, AnalyticDistribution]:
    """The four per-transition winning-score laws: D_CH, D_CC, D_H, D_C.

    D_CC is exactly Exp(1); D_CH averages the first omega order statistics of
    the adversary's ladder; D_H is the biased-round law; D_C is the convex
    combination of D_CC and D_CH with the chain's transition weights.
    """
    _check_alpha(alpha)
    omega_max = _omega_cutoff(alpha, tol)
    # Conditional weights alpha^(w-2) (1-alpha) normalize over w >= 2 exactly.
    cond_geo = np.array([alpha ** (w - 2) * (1.0 - alpha) for w in range(2, omega_max + 1)])
    bound = alpha ** (omega_max - 1)

    ch_erlang = np.zeros(omega_max)
    for w in range(2, omega_max + 1):
        ch_erlang[: w] += cond_geo[w - 2] / w
    h_rates = np.array([1.0 + (w - 1) * alpha for w in range(2, omega_max + 1)])

    def cdf_ch(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for i, w in enumerate(ch_erlang):
            if w > 0.0:
                out += w * erlang_cdf(i + 1, 1.0, z)
        return out

    def cdf_cc(z: np.ndarray) -> np.ndarray:
        return exp_cdf(1.0, np.asarray(z, dtype=float))

    def cdf_h(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for w, rate in zip(cond_geo, h_rates):
            out += w * exp_cdf(rate, z)
        return out

    chain = markov_chain(alpha)

    def cdf_c(z: np.ndarray) -> np.ndarray:
        return chain.p_cc * cdf_cc(z) + chain.p_ch * cdf_ch(z)

    return {
        "D_CH": AnalyticDistribution(cdf_ch, bound, "fresh seed, adversary picks among >= 2"),
        "D_CC": AnalyticDistribution(cdf_cc, 0.0, "fresh seed, no pick (exactly Exp(1))"),
        "D_H": AnalyticDistribution(cdf_h, bound, "biased-seed round"),
        "D_C": AnalyticDistribution(cdf_c, bound, "fresh-seed round (either transition)"),
    }


def default_fit_grid(
    z_min: float = 1e-3, z_max: float = 20.0, points: int = 2048
) -> np.ndarray:
    """Fixed geometric score grid for reproducible sup-norm fits."""
    return np.geomspace(z_min, z_max, points)


def best_exp_fit(
    dist: AnalyticDistribution, z_grid: np.ndarray | None = None
) -> tuple[float, float]:
    """Closest single exponential to ``dist`` in sup norm over the grid.

    Golden-section search over the rate, bracketed on [0.1, 10]. Returns the
    minimizing rate and the achieved sup distance. A strictly positive
    distance at the mixture is the numerical witness that no exponential
    reproduces the lookahead law.
    """
    grid = default_fit_grid() if z_grid is None else np.asarray(z_grid, dtype=float)
    target = dist(grid)

    def sup_distance(rate: float) -> float:
        return float(np.max(np.abs(target - (1.0 - np.exp(-rate * grid)))))

    lo, hi = 0.1, 10.0
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = sup_distance(c), sup_distance(d)
    while b - a > 1e-10:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = sup_distance(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = sup_distance(d)
    rate = (a + b) / 2.0
    return rate, sup_distance(rate)


def analytic_win_rate(alpha: float, tol: float = 1e-12) -> float:
    """Stationary fraction of rounds the lookahead adversary leads.

    In a fresh-seed round it wins when it holds any winning credential
    (probability alpha); in a biased round with omega candidates it won the
    race of Exp(omega*alpha) against Exp(1-alpha). The geometric series over
    omega is truncated once the dropped mass falls below ``tol``.
    """
    _check_alpha(alpha)
    chain = markov_chain(alpha)
    total = 0.0
    w = 2
    while True:
        weight = alpha ** (w - 2) * (1.0 - alpha)
        total += weight * (alpha * w) / (1.0 + alpha * (w - 1))
        if weight < tol:
            break
        w += 1
    return chain.s_c * alpha + chain.s_h * total


def mixture_weight_total(alpha: float, tol: float = 1e-10) -> float:
    """Sum of all mixture weights; 1 up to the truncation bound by construction."""
    erlang_w, biased_w, _, _ = _mixture_components(alpha, tol)
    return float(np.sum(erlang_w) + np.sum(biased_w))


def export_cdf_table(
    dist: AnalyticDistribution, z_grid: np.ndarray, path: str
) -> None:
    """Write a (z, cdf) CSV table for plotting."""
    values = dist(z_grid)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("z,cdf\n")
        for z, v in zip(np.asarray(z_grid).tolist(), values.tolist()):
            fh.write(f"{z!r},{v!r}\n")
