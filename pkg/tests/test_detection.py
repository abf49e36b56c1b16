"""Detection suite: estimators, calibration mechanics, fixtures, reports."""

import math

import numpy as np
import pytest

from cssp_lab._stat_kernels import exp_sample
from cssp_lab.detection import (
    InsufficientSampleError,
    ScoreSeries,
    Theorem51Report,
    correlation_test,
    distribution_test,
    dkw_epsilon,
    dominance_test,
    envelope_test,
    lilliefors_null_statistics,
    mle_rate,
    theorem51_consistency_check,
)
from cssp_lab.protocol import SimConfig, run_simulation


def honest_series(rounds=20_000, seed=7, delta=0.0):
    tr = run_simulation(
        SimConfig(
            alpha=0.3,
            beta=1.0,
            rounds=rounds,
            strategy="honest",
            delta=delta,
            burn_in=min(500, rounds // 2),
            master_seed=seed,
        )
    )
    return ScoreSeries.from_trace(tr)


def lookahead_series(rounds=200_000, seed=8):
    tr = run_simulation(
        SimConfig(
            alpha=0.3,
            beta=1.0,
            rounds=rounds,
            strategy="one-lookahead",
            master_seed=seed,
        )
    )
    return ScoreSeries.from_trace(tr)


# -- estimator -----------------------------------------------------------------

def test_mle_rate_examples():
    assert mle_rate(ScoreSeries(np.full(100, 0.5))) == pytest.approx(2.0, rel=1e-12)
    assert mle_rate(ScoreSeries(np.array([2.0]))) == 0.5
    with pytest.raises(ValueError):
        mle_rate(ScoreSeries(np.zeros(10)))
    with pytest.raises(InsufficientSampleError):
        mle_rate(ScoreSeries(np.array([])))


def test_mle_rate_monte_carlo():
    x = exp_sample(2.0, 100_000, 42)
    assert mle_rate(ScoreSeries(x)) == pytest.approx(2.0, abs=0.02)


def test_score_series_validation():
    with pytest.raises(ValueError):
        ScoreSeries(np.array([1.0, -0.1]))
    with pytest.raises(ValueError):
        ScoreSeries(np.array([1.0, np.inf]))
    with pytest.raises(ValueError):
        ScoreSeries(np.ones((2, 2)))


# -- distribution test -----------------------------------------------------------

def test_distribution_test_requires_length():
    with pytest.raises(InsufficientSampleError):
        distribution_test(ScoreSeries(np.ones(999)))


def test_distribution_test_consistent_on_exponential_data():
    x = exp_sample(0.73, 50_000, 11)
    rep = distribution_test(ScoreSeries(x), bootstrap_reps=400, seed=3)
    assert rep.verdict == "consistent"
    assert rep.fitted_gamma == pytest.approx(0.73, abs=0.02)
    assert rep.statistic <= rep.threshold


def test_distribution_test_rejects_lookahead():
    rep = distribution_test(lookahead_series(), bootstrap_reps=400, seed=3)
    assert rep.verdict == "reject"
    assert rep.p_value < 0.01


def test_distribution_test_rejects_gamma_shaped_data(rng):
    x = rng.gamma(2.0, 1.0, 20_000)  # not exponential at any rate
    rep = distribution_test(ScoreSeries(x), bootstrap_reps=400, seed=3)
    assert rep.verdict == "reject"


def test_silent_trace_is_consistent():
    tr = run_simulation(
        SimConfig(alpha=0.3, beta=0.0, rounds=50_000, strategy="silent", master_seed=9)
    )
    rep = distribution_test(ScoreSeries.from_trace(tr), bootstrap_reps=400, seed=3)
    assert rep.verdict == "consistent"


def test_lilliefors_null_is_pivotal():
    # thresholds computed from Exp(1) draws serve any fitted rate: the
    # statistic of scaled data is unchanged
    x = exp_sample(1.0, 5000, 21)
    rep_one = distribution_test(ScoreSeries(x), bootstrap_reps=300, seed=5)
    rep_scaled = distribution_test(ScoreSeries(7.5 * x), bootstrap_reps=300, seed=5)
    assert rep_one.statistic == pytest.approx(rep_scaled.statistic, abs=1e-12)
    assert rep_one.threshold == rep_scaled.threshold


def test_lilliefors_cache_and_determinism():
    a = lilliefors_null_statistics(2000, 200, 17)
    b = lilliefors_null_statistics(2000, 200, 17)
    assert a is b  # cached object
    rep1 = distribution_test(honest_series(), bootstrap_reps=300, seed=5)
    rep2 = distribution_test(honest_series(), bootstrap_reps=300, seed=5)
    assert rep1.to_dict() == rep2.to_dict()


def test_distribution_threshold_scales_like_inverse_sqrt_n():
    t1 = lilliefors_null_statistics(1000, 300, 3)
    t2 = lilliefors_null_statistics(4000, 300, 3)
    assert np.median(t1) == pytest.approx(2 * np.median(t2), rel=0.15)


# -- correlation test --------------------------------------------------------------

def test_correlation_test_consistent_on_honest():
    rep = correlation_test(honest_series(50_000), permutations=1000, seed=4)
    assert rep.verdict == "consistent"
    assert abs(rep.statistic) < 0.02


def test_correlation_test_rejects_lookahead_negative():
    rep = correlation_test(lookahead_series(), permutations=1000, seed=4)
    assert rep.verdict == "reject"
    assert rep.parameters["sign"] == "negative"
    assert rep.statistic < 0


def test_correlation_test_rejects_duplicated_values_positive():
    x = honest_series(20_000).scores.copy()
    x[1::2] = x[0::2]  # consecutive duplicates: strong positive dependence
    rep = correlation_test(ScoreSeries(x), permutations=1000, seed=4)
    assert rep.verdict == "reject"
    assert rep.parameters["sign"] == "positive"


def test_correlation_test_preconditions():
    with pytest.raises(InsufficientSampleError):
        correlation_test(ScoreSeries(np.ones(500)))
    with pytest.raises(ValueError):
        correlation_test(honest_series(2000), permutations=100)


def test_correlation_determinism():
    s = honest_series(5000)
    a = correlation_test(s, permutations=1000, seed=9)
    b = correlation_test(s, permutations=1000, seed=9)
    assert a.to_dict() == b.to_dict()


# -- envelope test -----------------------------------------------------------------

def test_envelope_consistent_on_fluctuating_honest():
    rep = envelope_test(honest_series(100_000, delta=0.1), delta=0.1)
    assert rep.verdict == "consistent"


def test_envelope_rejects_lookahead_at_zero_band():
    rep = envelope_test(lookahead_series(1_000_000), delta=0.0)
    assert rep.verdict == "reject"


def test_envelope_nesting_in_delta():
    # consistent at delta implies consistent at any wider band
    series = lookahead_series(100_000)
    stats = [
        envelope_test(series, delta=d).statistic for d in (0.0, 0.02, 0.05, 0.1)
    ]
    assert all(a >= b - 1e-12 for a, b in zip(stats, stats[1:]))


def test_envelope_statistic_zero_band_matches_plain_fit():
    series = honest_series(20_000)
    rep = envelope_test(series, delta=0.0)
    assert rep.statistic >= 0
    assert rep.fitted_gamma == pytest.approx(mle_rate(series), rel=0.5)


# -- dominance ----------------------------------------------------------------------

def test_dominance_consistent_on_exact_exponential():
    x = exp_sample(0.3, 100_000, 13)
    rep = dominance_test(x, 0.3)
    assert rep.verdict == "consistent"


def test_dominance_rejects_faster_rate():
    x = exp_sample(0.4, 100_000, 13)
    rep = dominance_test(x, 0.3)
    assert rep.verdict == "reject"


def test_dominance_accepts_silence_markers():
    x = exp_sample(0.3, 50_000, 13).copy()
    x[::3] = np.inf  # silence only thins the sub-CDF
    rep = dominance_test(x, 0.3)
    assert rep.verdict == "consistent"
    with pytest.raises(InsufficientSampleError):
        dominance_test(x[:100], 0.3)


# -- theorem 5.1 skeleton --------------------------------------------------------------

def test_theorem51_epsilon_zero():
    rep = theorem51_consistency_check(0.3, 0.0, samples=400_000, seed=2)
    assert rep.expected_win_frequency == pytest.approx(0.3, rel=1e-12)
    assert rep.passed


def test_theorem51_main_case():
    rep = theorem51_consistency_check(0.3, 0.2, samples=400_000, seed=2)
    assert rep.expected_win_frequency == pytest.approx(0.5 / 1.2, rel=1e-12)
    assert rep.passed
    d = rep.to_dict()
    assert d["passed"] and 0 < d["win_frequency"] < 1


def test_theorem51_rejects_negative_epsilon():
    with pytest.raises(ValueError):
        theorem51_consistency_check(0.3, -0.1)


# -- report invariants ------------------------------------------------------------------

def test_report_verdict_matches_rule():
    rep = distribution_test(honest_series(), bootstrap_reps=300, seed=5)
    assert (rep.statistic > rep.threshold) == (rep.verdict == "reject")
    crep = correlation_test(honest_series(5000), permutations=1000, seed=5)
    assert (crep.p_value < 0.01) == (crep.verdict == "reject")


def test_reports_serialize_to_json(tmp_path):
    import json

    rep = envelope_test(honest_series(5000), delta=0.05)
    path = tmp_path / "rep.json"
    path.write_text(json.dumps(rep.to_dict()))
    back = json.loads(path.read_text())
    assert back["test"] == "envelope" and back["verdict"] == rep.verdict
