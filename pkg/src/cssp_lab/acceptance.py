"""Acceptance criteria, runnable standalone (``cssp-lab verify``) or via pytest.

Each criterion is a function of a shared ``AcceptanceContext`` that lazily
builds and caches the expensive artifacts (trace batches, bootstrap tables)
so criteria can share them. The ``FULL`` scale runs everything at its stated
size; ``QUICK`` documents the reduced sizes and bars used for CI smoke runs
(power-sensitive checks keep the smallest size at which they remain
meaningful rather than a blanket 100x reduction).

Three sub-clauses are implemented exactly as stated but are not attainable
at the stated scale; see the failure details they print and the analysis in
the project notes: the tenfold analytic margin (6b), the five-sigma profit
margin at a tenth of the stake (8a), and the two-percent envelope rejection
at a million rounds (12b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats as scipy_stats

from . import analytics
from ._stat_kernels import exp_sample
from .core import subsystem_seed
from .detection import (
    DetectionReport,
    ScoreSeries,
    correlation_test,
    distribution_test,
    dkw_epsilon,
    dominance_test,
    envelope_test,
    lilliefors_null_statistics,
    reset_broadcast_series,
    theorem51_consistency_check,
)
from .protocol import STATE_C, STATE_H, SimConfig, run_simulation

DEFAULT_MASTER_SEED = 2718


@dataclass(frozen=True)
class Scale:
    """Sizes and bars for one acceptance run."""

    name: str
    calibration_traces: int  # honest traces for false-positive rates
    calibration_rounds: int
    correlation_calibration_traces: int
    power_replicates: int  # lookahead traces for detection power
    power_rounds: int
    power_bar: float  # required rejection fraction
    reset_rounds_target: int  # reset-round sample for the |W| law
    envelope_traces: int
    envelope_rounds: int
    silent_traces: int
    silent_rounds: int
    profit_rounds: int  # profitability sims (criterion 8)
    theorem51_samples: int
    bootstrap_reps: int
    permutations: int
    fixture_samples: int  # synthetic dominance violation


FULL = Scale(
    name="full",
    calibration_traces=500,
    calibration_rounds=100_000,
    correlation_calibration_traces=300,
    power_replicates=100,
    power_rounds=1_000_000,
    power_bar=0.99,
    reset_rounds_target=1_000_000,
    envelope_traces=100,
    envelope_rounds=100_000,
    silent_traces=200,
    silent_rounds=100_000,
    profit_rounds=1_000_000,
    theorem51_samples=1_000_000,
    bootstrap_reps=1000,
    permutations=1000,
    fixture_samples=100_000,
)

QUICK = Scale(
    name="quick",
    calibration_traces=60,
    calibration_rounds=1000,
    correlation_calibration_traces=60,
    power_replicates=20,
    power_rounds=200_000,
    power_bar=0.90,
    reset_rounds_target=10_000,
    envelope_traces=20,
    envelope_rounds=10_000,
    silent_traces=40,
    silent_rounds=10_000,
    profit_rounds=1_000_000,  # the profit margins need the stated scale
    theorem51_samples=100_000,
    bootstrap_reps=400,
    permutations=1000,
    fixture_samples=10_000,
)

ALPHA = 0.3  # the stake the criteria pin


@dataclass
class CriterionResult:
    criterion: str
    title: str
    passed: bool
    details: str


def _two_sided_band(rate: float, n: int) -> tuple[float, float]:
    se = math.sqrt(rate * (1.0 - rate) / n)
    return rate - 2.0 * se, rate + 2.0 * se


def _config(
    alpha: float,
    beta: float,
    rounds: int,
    strategy: str,
    master_seed: int,
    delta: float = 0.0,
) -> SimConfig:
    """Simulation config with a burn-in that scales down with short runs."""
    return SimConfig(
        alpha=alpha,
        beta=beta,
        rounds=rounds,
        strategy=strategy,
        master_seed=master_seed,
        delta=delta,
        burn_in=min(1000, max(rounds // 10, 1)),
    )


class AcceptanceContext:
    """Lazily built shared artifacts for one acceptance run."""

    def __init__(
        self,
        scale: Scale = FULL,
        master_seed: int = DEFAULT_MASTER_SEED,
        tamper: bool = False,
    ) -> None:
        self.scale = scale
        self.master_seed = master_seed
        self.tamper = tamper  # harness sanity: corrupt one input on purpose
        self.detection_seed = subsystem_seed(master_seed, 999)
        self._cache: dict = {}

    def sim_seed(self, block: int, index: int) -> int:
        return subsystem_seed(self.master_seed, (block << 20) + index)

    def _memo(self, key: str, build: Callable):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # -- shared artifact batches ------------------------------------------

    def honest_calibration(self) -> dict:
        """Honest traces at steady stake: per-trace test outcomes.

        Streamed so only scalar results are kept; the first trace's win
        fraction and first distribution report feed criteria 1 and 2.
        """

        def build():
            s = self.scale
            lilliefors_null_statistics(
                s.calibration_rounds, s.bootstrap_reps, self.detection_seed
            )
            dist_rejects = 0
            corr_rejects = 0
            first: dict = {}
            for i in range(s.calibration_traces):
                cfg = _config(
                    ALPHA, 1.0, s.calibration_rounds, "honest", self.sim_seed(1, i)
                )
                tr = run_simulation(cfg)
                series = ScoreSeries.from_trace(tr)
                if self.tamper and i == 0:
                    # duplicate consecutive scores: breaks both nulls
                    bad = series.scores.copy()
                    bad[1::2] = bad[0::2]
                    series = ScoreSeries(bad)
                rep = distribution_test(
                    series, 0.01, s.bootstrap_reps, seed=self.detection_seed
                )
                dist_rejects += rep.rejected
                if i == 0:
                    first = {
                        "win_fraction": tr.win_fraction(),
                        "distribution_report": rep,
                    }
                if i < s.correlation_calibration_traces:
                    crep = correlation_test(
                        series, 0.01, s.permutations, seed=self.detection_seed
                    )
                    corr_rejects += crep.rejected
            return {
                "dist_rejects": dist_rejects,
                "corr_rejects": corr_rejects,
                **first,
            }

        return self._memo("honest_calibration", build)

    def power_batch(self) -> dict:
        """Lookahead traces at the power scale: detection outcomes per
        replicate, plus replicate 0's arrays for the law-level criteria."""

        def build():
            s = self.scale
            lilliefors_null_statistics(
                s.power_rounds, s.bootstrap_reps, self.detection_seed
            )
            dist_rejects = 0
            corr_neg_rejects = 0
            first: dict = {}
            for i in range(s.power_replicates):
                cfg = _config(
                    ALPHA, 1.0, s.power_rounds, "one-lookahead", self.sim_seed(2, i)
                )
                tr = run_simulation(cfg)
                series = ScoreSeries.from_trace(tr)
                rep = distribution_test(
                    series, 0.01, s.bootstrap_reps, seed=self.detection_seed
                )
                dist_rejects += rep.rejected
                crep = correlation_test(
                    series, 0.01, s.permutations, seed=self.detection_seed
                )
                corr_neg_rejects += crep.rejected and crep.parameters["sign"] == "negative"
                if i == 0:
                    first = {
                        "scores": tr.winning_score.copy(),
                        "markov_state": tr.markov_state.copy(),
                        "win_fraction": tr.win_fraction(),
                        "reset_broadcasts": reset_broadcast_series(tr),
                        "rounds": len(tr),
                    }
            return {
                "dist_rejects": dist_rejects,
                "corr_neg_rejects": corr_neg_rejects,
                **first,
            }

        return self._memo("power_batch", build)

    def reset_statistics(self) -> dict:
        """A lookahead run long enough to hold the target reset-round count."""

        def build():
            s = self.scale
            rounds = int(s.reset_rounds_target * 1.15)
            cfg = _config(
                ALPHA, 1.0, rounds, "one-lookahead", self.sim_seed(3, 0)
            )
            tr = run_simulation(cfg)
            w = tr.w_size[tr.is_reset]
            return {"w_sizes": w, "available": len(w)}

        return self._memo("reset_statistics", build)

    def profit_runs(self) -> dict:
        """Win fractions for the profitability criteria."""

        def build():
            s = self.scale
            out = {}
            for idx, (key, alpha, beta) in enumerate(
                (
                    ("a01_b1", 0.1, 1.0),
                    ("a03_b1", ALPHA, 1.0),
                    ("a03_b0", ALPHA, 0.0),
                )
            ):
                cfg = _config(
                    alpha, beta, s.profit_rounds, "one-lookahead", self.sim_seed(4, idx)
                )
                out[key] = run_simulation(cfg).win_fraction()
            return out

        return self._memo("profit_runs", build)


# -- criteria ---------------------------------------------------------------


def criterion_1_balanced(ctx: AcceptanceContext) -> CriterionResult:
    calib = ctx.honest_calibration()
    n = ctx.scale.calibration_rounds
    wf = calib["win_fraction"]
    se = math.sqrt(ALPHA * (1.0 - ALPHA) / n)
    ok = abs(wf - ALPHA) <= 3.0 * se
    return CriterionResult(
        "1",
        "balanced selection under honesty",
        ok,
        f"win fraction {wf:.5f} vs {ALPHA} (3 SE = {3 * se:.5f})",
    )


def criterion_2_honest_null(ctx: AcceptanceContext) -> CriterionResult:
    calib = ctx.honest_calibration()
    rep: DetectionReport = calib["distribution_report"]
    n_traces = ctx.scale.calibration_traces
    lo, hi = _two_sided_band(0.01, n_traces)
    rate = calib["dist_rejects"] / n_traces
    ok = (not rep.rejected) and lo <= rate <= hi
    return CriterionResult(
        "2",
        "honest winning scores fit a fitted exponential",
        ok,
        f"first-trace KS {rep.statistic:.5f} <= {rep.threshold:.5f}; "
        f"rejection rate {rate:.4f} in [{lo:.4f}, {hi:.4f}] over {n_traces}",
    )


def criterion_3_w_law(ctx: AcceptanceContext) -> CriterionResult:
    stats = ctx.reset_statistics()
    target = ctx.scale.reset_rounds_target
    if stats["available"] < target:
        return CriterionResult(
            "3", "winning-credential count law", False,
            f"only {stats['available']} reset rounds available",
        )
    w = stats["w_sizes"][:target]
    ok = True
    parts = []
    for ell in range(6):
        p = analytics.w_size_pmf(ALPHA, ell)
        se = math.sqrt(p * (1.0 - p) / target)
        emp = float(np.mean(w == ell))
        cell_ok = abs(emp - p) <= 3.0 * se
        ok &= cell_ok
        parts.append(f"P[{ell}]={emp:.5f}~{p:.5f}")
    return CriterionResult(
        "3",
        "winning-credential count law at reset rounds",
        ok,
        "; ".join(parts) + f" (3 SE cells, n={target})",
    )


def criterion_4_markov(ctx: AcceptanceContext) -> CriterionResult:
    batch = ctx.power_batch()
    chain = analytics.markov_chain(ALPHA)
    states = batch["markov_state"]
    n = len(states)
    c_mask = states == STATE_C
    f_c = float(np.mean(c_mask))
    se_c = math.sqrt(chain.s_c * chain.s_h / n)
    ch = np.sum(c_mask[:-1] & (states[1:] == STATE_H))
    n_c = int(np.sum(c_mask[:-1]))
    f_ch = ch / n_c
    se_ch = math.sqrt(chain.p_ch * (1.0 - chain.p_ch) / n_c)
    ok = (
        abs(f_c - chain.s_c) <= 3.0 * se_c
        and abs((1.0 - f_c) - chain.s_h) <= 3.0 * se_c
        and abs(f_ch - chain.p_ch) <= 3.0 * se_ch
    )
    return CriterionResult(
        "4",
        "two-state seed chain frequencies",
        ok,
        f"fresh-state {f_c:.5f}~{chain.s_c:.5f}; C->H {f_ch:.5f}~{chain.p_ch:.5f}",
    )


def criterion_5_mixture(ctx: AcceptanceContext) -> CriterionResult:
    batch = ctx.power_batch()
    scores = np.sort(batch["scores"])
    n = len(scores)
    dist = analytics.lookahead_mixture_distribution(ALPHA, tol=1e-10)
    cdf = dist(scores)
    steps = np.arange(1, n + 1, dtype=float) / n
    ks = max(float(np.max(steps - cdf)), float(np.max(cdf - (steps - 1.0 / n))))
    bound = dkw_epsilon(n, 0.01) + 1e-9 + dist.truncation_error_bound
    ok = ks <= bound
    return CriterionResult(
        "5",
        "winning-score mixture law",
        ok,
        f"KS to mixture {ks:.6f} <= DKW99+tol {bound:.6f} (n={n})",
    )


def criterion_6a_positive_distance(ctx: AcceptanceContext) -> CriterionResult:
    dist = analytics.lookahead_mixture_distribution(ALPHA)
    rate, d = analytics.best_exp_fit(dist)
    ok = d > 1e-6
    return CriterionResult(
        "6a",
        "mixture is not exponential (positive best-fit distance)",
        ok,
        f"best rate {rate:.6f}, sup distance {d:.6f}",
    )


def criterion_6b_margin(ctx: AcceptanceContext) -> CriterionResult:
    dist = analytics.lookahead_mixture_distribution(ALPHA)
    _, d = analytics.best_exp_fit(dist)
    bar = 10.0 * dkw_epsilon(1_000_000, 0.01)
    ok = d >= bar
    return CriterionResult(
        "6b",
        "best-fit distance >= 10x the 99% DKW band at n=1e6",
        ok,
        f"distance {d:.6f} vs bar {bar:.6f} (ratio {d / bar * 10:.1f}x DKW)",
    )


def criterion_6c_distribution_power(ctx: AcceptanceContext) -> CriterionResult:
    batch = ctx.power_batch()
    n = ctx.scale.power_replicates
    rate = batch["dist_rejects"] / n
    ok = rate >= ctx.scale.power_bar
    return CriterionResult(
        "6c",
        "distribution test rejects the lookahead trace",
        ok,
        f"power {rate:.2f} over {n} replicates at R={ctx.scale.power_rounds}",
    )


def criterion_7a_correlation_power(ctx: AcceptanceContext) -> CriterionResult:
    batch = ctx.power_batch()
    n = ctx.scale.power_replicates
    rate = batch["corr_neg_rejects"] / n
    ok = rate >= ctx.scale.power_bar
    return CriterionResult(
        "7a",
        "correlation test rejects with negative sign",
        ok,
        f"negative-sign power {rate:.2f} over {n} replicates",
    )


def criterion_7b_correlation_calibration(ctx: AcceptanceContext) -> CriterionResult:
    calib = ctx.honest_calibration()
    n = ctx.scale.correlation_calibration_traces
    lo, hi = _two_sided_band(0.01, n)
    rate = calib["corr_rejects"] / n
    ok = lo <= rate <= hi
    return CriterionResult(
        "7b",
        "correlation test calibrated on honest traces",
        ok,
        f"rejection rate {rate:.4f} in [{lo:.4f}, {hi:.4f}] over {n}",
    )


def _profit_check(wf: float, alpha: float, rounds: int) -> tuple[bool, str]:
    se = math.sqrt(alpha * (1.0 - alpha) / rounds)
    gap = wf - alpha
    return gap > 5.0 * se, f"win {wf:.6f}, gap {gap:+.6f} vs 5 SE {5 * se:.6f}"


def criterion_8a_profit_small_stake(ctx: AcceptanceContext) -> CriterionResult:
    wf = ctx.profit_runs()["a01_b1"]
    ok, msg = _profit_check(wf, 0.1, ctx.scale.profit_rounds)
    return CriterionResult(
        "8a", "profitability at alpha=0.1, full visibility", ok, msg
    )


def criterion_8b_profit_main(ctx: AcceptanceContext) -> CriterionResult:
    wf = ctx.profit_runs()["a03_b1"]
    ok, msg = _profit_check(wf, ALPHA, ctx.scale.profit_rounds)
    return CriterionResult(
        "8b", "profitability at alpha=0.3, full visibility", ok, msg
    )


def criterion_8c_profit_blind(ctx: AcceptanceContext) -> CriterionResult:
    wf = ctx.profit_runs()["a03_b0"]
    ok, msg = _profit_check(wf, ALPHA, ctx.scale.profit_rounds)
    return CriterionResult("8c", "profitability at alpha=0.3, blind", ok, msg)


def criterion_8d_analytic_match(ctx: AcceptanceContext) -> CriterionResult:
    wf = ctx.profit_runs()["a03_b1"]
    expected = analytics.analytic_win_rate(ALPHA)
    se = math.sqrt(expected * (1.0 - expected) / ctx.scale.profit_rounds)
    ok = abs(wf - expected) <= 3.0 * se
    return CriterionResult(
        "8d",
        "win rate matches the stationary series",
        ok,
        f"win {wf:.6f} vs analytic {expected:.6f} (3 SE = {3 * se:.6f})",
    )


def criterion_9_reset_fraction(ctx: AcceptanceContext) -> CriterionResult:
    parts = []
    ok = True
    rounds = max(ctx.scale.reset_rounds_target // 5, 2000)
    for i, alpha in enumerate((0.1, 0.2, 0.3, 0.37)):
        cfg = _config(alpha, 1.0, rounds, "one-lookahead", ctx.sim_seed(5, i))
        frac = run_simulation(cfg).reset_fraction()
        ok &= frac > 0.0
        parts.append(f"alpha={alpha}: {frac:.4f}")
    return CriterionResult(
        "9", "reset rounds occur at every stake level", ok, "; ".join(parts)
    )


def criterion_10_dominance(ctx: AcceptanceContext) -> CriterionResult:
    batch = ctx.power_batch()
    rep = dominance_test(batch["reset_broadcasts"], ALPHA)
    violation = exp_sample(
        ALPHA + 0.1, ctx.scale.fixture_samples, subsystem_seed(ctx.master_seed, 77)
    )
    rep_bad = dominance_test(violation, ALPHA)
    ok = (not rep.rejected) and rep_bad.rejected
    return CriterionResult(
        "10",
        "reset-round broadcasts dominate the stake exponential",
        ok,
        f"lookahead stat {rep.statistic:.6f} ({rep.verdict}); "
        f"violation stat {rep_bad.statistic:.4f} ({rep_bad.verdict})",
    )


def criterion_11_theorem51(ctx: AcceptanceContext) -> CriterionResult:
    rep = theorem51_consistency_check(
        ALPHA, 0.2, ctx.scale.theorem51_samples, seed=ctx.master_seed
    )
    return CriterionResult(
        "11",
        "independent-adversary minimum algebra",
        rep.passed,
        f"win {rep.win_frequency:.6f}~{rep.expected_win_frequency:.6f} "
        f"(tol {rep.win_tolerance:.6f}); KS {rep.ks_statistic:.6f} < {rep.ks_critical:.6f}",
    )


def criterion_12a_envelope_honest(ctx: AcceptanceContext) -> CriterionResult:
    s = ctx.scale
    passes = 0
    for i in range(s.envelope_traces):
        cfg = _config(
            ALPHA, 1.0, s.envelope_rounds, "honest", ctx.sim_seed(6, i), delta=0.1
        )
        series = ScoreSeries.from_trace(run_simulation(cfg))
        passes += not envelope_test(series, delta=0.1).rejected
    rate = passes / s.envelope_traces
    ok = rate >= 0.99 if s.envelope_traces >= 100 else rate >= 0.95
    return CriterionResult(
        "12a",
        "fluctuating-stake honest traces fit the envelope",
        ok,
        f"pass rate {rate:.2f} over {s.envelope_traces} traces",
    )


def criterion_12b_envelope_power(ctx: AcceptanceContext) -> CriterionResult:
    batch = ctx.power_batch()
    rep = envelope_test(ScoreSeries(batch["scores"]), delta=0.02)
    ok = rep.rejected
    return CriterionResult(
        "12b",
        "lookahead trace rejected by the delta=0.02 envelope",
        ok,
        f"stat {rep.statistic:.6f} vs DKW {rep.threshold:.6f} -> {rep.verdict} "
        f"(n={rep.sample_size})",
    )


def criterion_13_silent(ctx: AcceptanceContext) -> CriterionResult:
    s = ctx.scale
    lilliefors_null_statistics(s.silent_rounds, s.bootstrap_reps, ctx.detection_seed)
    rejects = {"distribution": 0, "correlation": 0, "envelope": 0}
    for i in range(s.silent_traces):
        cfg = _config(ALPHA, 0.0, s.silent_rounds, "silent", ctx.sim_seed(7, i))
        series = ScoreSeries.from_trace(run_simulation(cfg))
        rejects["distribution"] += distribution_test(
            series, 0.01, s.bootstrap_reps, seed=ctx.detection_seed
        ).rejected
        rejects["correlation"] += correlation_test(
            series, 0.01, s.permutations, seed=ctx.detection_seed
        ).rejected
        rejects["envelope"] += envelope_test(series, delta=0.0).rejected
    n = s.silent_traces
    # "At nominal rates": the rejection count must not sit in the 1% upper
    # tail of Binomial(n, 0.01) -- an exact one-sided calibration check.
    tails = {
        k: float(scipy_stats.binom.sf(v - 1, n, 0.01)) for k, v in rejects.items()
    }
    ok = all(t >= 0.01 for t in tails.values())
    return CriterionResult(
        "13",
        "silent adversary is undetectable",
        ok,
        "; ".join(
            f"{k} {v}/{n} (tail p {tails[k]:.3f})" for k, v in rejects.items()
        ),
    )


CRITERIA: list[tuple[str, Callable[[AcceptanceContext], CriterionResult]]] = [
    ("1", criterion_1_balanced),
    ("2", criterion_2_honest_null),
    ("3", criterion_3_w_law),
    ("4", criterion_4_markov),
    ("5", criterion_5_mixture),
    ("6a", criterion_6a_positive_distance),
    ("6b", criterion_6b_margin),
    ("6c", criterion_6c_distribution_power),
    ("7a", criterion_7a_correlation_power),
    ("7b", criterion_7b_correlation_calibration),
    ("8a", criterion_8a_profit_small_stake),
    ("8b", criterion_8b_profit_main),
    ("8c", criterion_8c_profit_blind),
    ("8d", criterion_8d_analytic_match),
    ("9", criterion_9_reset_fraction),
    ("10", criterion_10_dominance),
    ("11", criterion_11_theorem51),
    ("12a", criterion_12a_envelope_honest),
    ("12b", criterion_12b_envelope_power),
    ("13", criterion_13_silent),
]

# Sub-clauses whose stated margins are not attainable; kept red on purpose.
KNOWN_UNATTAINABLE = ("6b", "8a", "12b")


def run_acceptance(
    scale: Scale = FULL,
    master_seed: int = DEFAULT_MASTER_SEED,
    tamper: bool = False,
    report: Optional[Callable[[CriterionResult], None]] = None,
) -> list[CriterionResult]:
    ctx = AcceptanceContext(scale=scale, master_seed=master_seed, tamper=tamper)
    results = []
    for _, fn in CRITERIA:
        res = fn(ctx)
        results.append(res)
        if report is not None:
            report(res)
    return results
