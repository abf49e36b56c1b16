"""Strategy decision functions: contracts, the objective, the candidate set."""

import math

import numpy as np
import pytest

from cssp_lab.core import AccountKey, UnitValue, score_ladder
from cssp_lab.strategies import (
    Broadcast,
    ObservationView,
    StrategyContractError,
    StrategyDecision,
    decide,
    honest_decide,
    lookahead_objective,
    one_lookahead_decide,
    silent_decide,
)

KEY = AccountKey.derive(555, 0)
ALPHA, BETA = 0.3, 1.0


def make_view(seed_bits=42, beta=BETA, xb=2.0, pending=None):
    return ObservationView(
        seed_bits=seed_bits,
        honest_b_score=xb if beta > 0 else None,
        alpha=ALPHA,
        beta=beta,
        lambda_r=1.0,
        pending_commitment=pending,
    )


def oracle_for(alpha=ALPHA):
    return lambda bits: score_ladder(KEY, UnitValue.from_bits(bits), alpha, 1)


def ladder_for(seed_bits, depth=16, rate=ALPHA):
    return score_ladder(KEY, UnitValue.from_bits(seed_bits), rate, depth)


# -- honest / silent -----------------------------------------------------------

def test_honest_broadcasts_minimum():
    ladder = ladder_for(42)
    d = honest_decide(make_view(), ladder)
    assert d.broadcast.ladder_index == 0
    assert d.broadcast.score == ladder.entries[0]
    assert d.commit_next is None


def test_honest_broadcast_scores_are_exponential():
    n = 50_000
    vals = np.sort(
        [
            honest_decide(make_view(s), ladder_for(s, 1)).broadcast.score
            for s in range(1, n + 1)
        ]
    )
    cdf = 1 - np.exp(-ALPHA * vals)
    steps = np.arange(1, n + 1) / n
    ks = max(np.max(steps - cdf), np.max(cdf - (steps - 1 / n)))
    assert ks < 1.6276 / math.sqrt(n)


def test_silent_never_broadcasts():
    for s in range(50):
        assert silent_decide(make_view(s)).broadcast is None


# -- objective -------------------------------------------------------------------

def test_objective_frozen_value():
    # exact evaluation; a two-round Monte Carlo oracle at 4e6 draws gave
    # 0.846751 +/- 0.0008 for the same inputs
    got = lookahead_objective(1.0, 0.5, 0.3, 0.0)
    assert got == pytest.approx(0.8465230529025649, rel=1e-12)


def test_objective_monte_carlo(rng):
    n = 400_000
    s_i, s_next = 1.0, 0.5
    x_now = rng.exponential(1 / 0.7, n)
    x_next = rng.exponential(1 / 0.7, n)
    win_now = s_i < x_now
    wins = win_now.astype(float) + (win_now & (s_next < x_next))
    assert wins.mean() == pytest.approx(
        lookahead_objective(s_i, s_next, 0.3, 0.0), abs=3 * 0.8 / math.sqrt(n)
    )


def test_objective_full_visibility_form():
    # beta=1: winning now is certain, so the objective is 1 + next-round term
    for s_next in (0.1, 1.0, 4.0):
        assert lookahead_objective(5.0, s_next, 0.3, 1.0) == pytest.approx(
            1.0 + math.exp(-0.7 * s_next), rel=1e-12
        )


def test_objective_vanishes_for_hopeless_scores():
    assert lookahead_objective(200.0, 1.0, 0.3, 0.0) < 1e-50


# -- one-lookahead ----------------------------------------------------------------

def test_lookahead_empty_candidate_set_stays_silent():
    ladder = ladder_for(7)
    view = make_view(7, xb=ladder.entries[0] * 0.5)
    d = one_lookahead_decide(view, ladder, oracle_for())
    assert d.broadcast is None and d.commit_next is None


def test_lookahead_single_candidate_acts_honest():
    ladder = ladder_for(8)
    xb = (ladder.entries[0] + ladder.entries[1]) / 2
    d = one_lookahead_decide(make_view(8, xb=xb), ladder, oracle_for())
    assert d.broadcast.ladder_index == 0
    assert d.commit_next is None  # single candidate cannot bias the seed


def test_lookahead_multi_candidate_commits():
    ladder = ladder_for(9)
    xb = ladder.entries[3]  # candidates 0..2
    d = one_lookahead_decide(make_view(9, xb=xb), ladder, oracle_for())
    assert d.broadcast is not None and d.broadcast.ladder_index < 3
    assert d.commit_next is not None
    # the commitment is the follow-up ladder minimum of the chosen credential
    hyp = oracle_for()(d.broadcast.credential_bits)
    assert d.commit_next == int(hyp.credential_bits[0])


def test_lookahead_picks_objective_argmax():
    ladder = ladder_for(10)
    xb = ladder.entries[5]
    oracle = oracle_for()
    d = one_lookahead_decide(make_view(10, xb=xb), ladder, oracle)
    objs = [
        lookahead_objective(
            float(ladder.entries[i]),
            float(oracle(int(ladder.credential_bits[i])).entries[0]),
            ALPHA,
            BETA,
        )
        for i in range(5)
    ]
    assert d.broadcast.ladder_index == int(np.argmax(objs))


def test_lookahead_blind_uses_whole_prefix():
    ladder = ladder_for(11)
    view = make_view(11, beta=0.0)
    d = one_lookahead_decide(view, ladder, oracle_for())
    assert d.broadcast is not None
    assert d.commit_next is not None  # the prefix always has >= 2 candidates


def test_lookahead_commitment_broadcast_and_contract():
    ladder = ladder_for(12)
    committed = int(ladder.credential_bits[0])
    d = one_lookahead_decide(
        make_view(12, pending=committed), ladder, oracle_for()
    )
    assert d.broadcast.ladder_index == 0
    assert d.commit_next is None
    with pytest.raises(StrategyContractError):
        one_lookahead_decide(
            make_view(12, pending=committed ^ 1), ladder, oracle_for()
        )


def test_lookahead_decisions_are_deterministic():
    ladder = ladder_for(13)
    view = make_view(13, xb=ladder.entries[4])
    a = one_lookahead_decide(view, ladder, oracle_for())
    b = one_lookahead_decide(view, ladder, oracle_for())
    assert a == b


def test_truncation_depth_16_matches_32_blind():
    # the dominance bound: deeper ladders never change the blind argmax
    for seed_bits in range(200, 1200):
        l16 = ladder_for(seed_bits, 16)
        l32 = ladder_for(seed_bits, 32)
        v = make_view(seed_bits, beta=0.0)
        d16 = one_lookahead_decide(v, l16, oracle_for())
        d32 = one_lookahead_decide(v, l32, oracle_for())
        assert d16.broadcast.credential_bits == d32.broadcast.credential_bits


def test_view_validation():
    with pytest.raises(ValueError):
        ObservationView(1, None, 0.3, 0.5, 1.0)  # beta>0 needs the score
    with pytest.raises(ValueError):
        ObservationView(1, 2.0, 0.3, 0.0, 1.0)  # beta=0 must hide it


def test_decide_dispatch():
    ladder = ladder_for(21)
    assert decide("silent", make_view(21), ladder, oracle_for()).broadcast is None
    assert decide("honest", make_view(21), ladder, oracle_for()).broadcast is not None
    with pytest.raises(ValueError):
        decide("bogus", make_view(21), ladder, oracle_for())
