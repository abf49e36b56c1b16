"""Leader-election self-selection lab.

A simulator of the hash-lottery leader-election game with pluggable
honest/adversarial strategies, closed-form analytics for the one-round
lookahead manipulation, and an onlooker's statistical detection suite over
the public winning-score series.
"""

from .backend import HAS_NUMBA, active_backend
from .core import (
    AccountKey,
    ScoreLadder,
    UnitValue,
    erlang_cdf,
    exp_cdf,
    prf_uniform,
    prob_first_smaller,
    score_ladder,
    score_of,
)
from .protocol import (
    RoundRecord,
    SimConfig,
    Trace,
    mark_reset_rounds,
    run_round,
    run_simulation,
    stake_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "AccountKey",
    "HAS_NUMBA",
    "RoundRecord",
    "ScoreLadder",
    "SimConfig",
    "Trace",
    "UnitValue",
    "active_backend",
    "erlang_cdf",
    "exp_cdf",
    "mark_reset_rounds",
    "prf_uniform",
    "prob_first_smaller",
    "run_round",
    "run_simulation",
    "score_ladder",
    "score_of",
    "stake_schedule",
]
