"""Round-by-round game engine for the refined leader-election strategy space.

One strategic player (stake ``alpha``, split across unboundedly many
accounts) faces two aggregate honest players: B, whose broadcast the
adversary hears before acting (stake ``beta * (1 - alpha)``), and C, whose
broadcast it never hears in time (the rest). The winning credential of each
round seeds the next via the simulated VRF, so a full simulation is an
inherently sequential chain.

``run_simulation`` dispatches to a jitted kernel when available; the
pure-Python path below is the bit-exact reference the kernels are pinned to.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np

from . import backend
from ._bits import stream64_array
from .core import (
    AccountKey,
    ScoreLadder,
    UnitValue,
    derive_master_layout,
    prf_uniform,
    score_ladder,
    score_of,
)
from .strategies import ObservationView, STRATEGY_IDS, StrategyContractError, decide

WINNER_ADVERSARY = 0
WINNER_HONEST_B = 1
WINNER_HONEST_C = 2
WINNER_NONE = 3
WINNER_NAMES = ("adversary", "honest_B", "honest_C", "none")

STATE_NA = -1
STATE_C = 0
STATE_H = 1


class UnsupportedStrategyError(ValueError):
    """Reset rounds are only decidable for the strategies implemented here."""


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a simulation, bit for bit."""

    alpha: float
    beta: float
    rounds: int
    strategy: str = "honest"
    burn_in: int = 1000
    delta: float = 0.0
    ladder_depth: int = 16
    master_seed: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if self.burn_in < 0:
            raise ValueError("burn-in cannot be negative")
        if self.burn_in >= self.rounds:
            raise ValueError("burn-in must be smaller than the recorded rounds")
        if self.ladder_depth < 1:
            raise ValueError("ladder depth must be at least 1")
        if self.strategy not in STRATEGY_IDS:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGY_IDS}"
            )


@dataclass(frozen=True)
class RoundRecord:
    """Everything observable and hidden about one recorded round.

    ``w_size`` and ``fresh_decision`` are hidden-state diagnostics (how many
    of the adversary's credentials beat the heard honest score, and whether
    the decision re-optimized rather than honoring a commitment); they are
    not part of the serialized observer formats.
    """

    round: int
    seed_bits: int
    winning_score: float
    winner: str
    adversary_broadcast: Optional[float]
    honest_scores: tuple[Optional[float], Optional[float]]
    online_stake: float
    markov_state: Optional[str]
    is_reset: bool
    w_size: int = -1
    fresh_decision: bool = True


@dataclass(frozen=True)
class RoundState:
    """Chain state entering a round."""

    round_index: int
    seed: UnitValue
    online_stake: float
    pending_commitment: Optional[int] = None
    seed_biased: bool = False


@dataclass
class Trace:
    """A simulated run as column arrays plus its configuration."""

    config: SimConfig
    seed_bits: np.ndarray
    winning_score: np.ndarray
    winner: np.ndarray
    adversary_broadcast: np.ndarray  # nan where nothing was broadcast
    honest_b: np.ndarray  # +inf where B holds no stake (beta = 0)
    honest_c: np.ndarray  # +inf where C holds no stake (beta = 1)
    online_stake: np.ndarray
    markov_state: np.ndarray  # STATE_C / STATE_H, or STATE_NA for honest/silent
    is_reset: np.ndarray
    w_size: np.ndarray
    fresh: np.ndarray

    def __len__(self) -> int:
        return len(self.winning_score)

    def record(self, r: int) -> RoundRecord:
        adv = float(self.adversary_broadcast[r])
        state = int(self.markov_state[r])
        hb, hc = float(self.honest_b[r]), float(self.honest_c[r])
        return RoundRecord(
            round=r,
            seed_bits=int(self.seed_bits[r]),
            winning_score=float(self.winning_score[r]),
            winner=WINNER_NAMES[int(self.winner[r])],
            adversary_broadcast=None if math.isnan(adv) else adv,
            honest_scores=(
                None if math.isinf(hb) else hb,
                None if math.isinf(hc) else hc,
            ),
            online_stake=float(self.online_stake[r]),
            markov_state=None if state == STATE_NA else ("C", "H")[state],
            is_reset=bool(self.is_reset[r]),
            w_size=int(self.w_size[r]),
            fresh_decision=bool(self.fresh[r]),
        )

    def records(self) -> Iterator[RoundRecord]:
        for r in range(len(self)):
            yield self.record(r)

    def winning_scores(self) -> np.ndarray:
        return self.winning_score

    def win_fraction(self) -> float:
        return float(np.mean(self.winner == WINNER_ADVERSARY))

    def reset_fraction(self) -> float:
        return float(np.mean(self.is_reset))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return self.config == other.config and all(
            np.array_equal(getattr(self, name), getattr(other, name), equal_nan=True)
            for name in (
                "seed_bits",
                "winning_score",
                "winner",
                "adversary_broadcast",
                "honest_b",
                "honest_c",
                "online_stake",
                "markov_state",
                "is_reset",
                "w_size",
                "fresh",
            )
        )


def stake_schedule(delta: float, stake_key: int, count: int) -> np.ndarray:
    """Per-round online-stake factors, i.i.d. uniform on [1-delta, 1+delta].

    ``delta = 0`` gives the constant schedule exactly. The draws are a
    counter-based stream of ``stake_key``, so any sub-range can be recomputed
    independently.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if delta == 0.0:
        return np.ones(count)
    bits = stream64_array(stake_key, count)
    u = ((bits >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52
    return 1.0 - delta + 2.0 * delta * u


@dataclass(frozen=True)
class GameContext:
    """Key material and fixed parameters shared by every round of a run."""

    config: SimConfig
    adversary_key: AccountKey
    honest_b_key: AccountKey
    honest_c_key: AccountKey
    initial_seed: UnitValue
    stake_key: int

    @classmethod
    def from_config(cls, config: SimConfig) -> "GameContext":
        layout = derive_master_layout(config.master_seed)
        return cls(
            config=config,
            adversary_key=layout["adversary"],
            honest_b_key=layout["honest_b"],
            honest_c_key=layout["honest_c"],
            initial_seed=UnitValue.from_bits(layout["initial_seed"]),
            stake_key=layout["stake_key"],
        )


def _honest_draw(key: AccountKey, seed: UnitValue, rate: float):
    """Credential and score for an aggregate honest player; inf if no stake."""
    if rate <= 0.0:
        return None, math.inf
    cred = prf_uniform(key, seed)
    return cred, score_of(cred, rate)


def run_round(
    ctx: GameContext, state: RoundState, strategy: Optional[str] = None
) -> tuple[RoundState, RoundRecord]:
    """Play one round: draw credentials, ask the strategy, pick the leader.

    The strategy decides from its view alone -- C's score (and B's too when
    beta = 0) never reaches it, which is what makes blind decisions
    independent of the honest draws. The returned record's ``is_reset``
    reflects this round's seed state; the new state carries the winner's
    credential as the next seed.
    """
    cfg = ctx.config
    strategy = cfg.strategy if strategy is None else strategy
    lam = state.online_stake
    alpha_rate = cfg.alpha * lam
    b_rate = cfg.beta * (1.0 - cfg.alpha) * lam
    c_rate = (1.0 - cfg.beta) * (1.0 - cfg.alpha) * lam

    cred_b, score_b = _honest_draw(ctx.honest_b_key, state.seed, b_rate)
    cred_c, score_c = _honest_draw(ctx.honest_c_key, state.seed, c_rate)

    ladder = score_ladder(
        ctx.adversary_key, state.seed, alpha_rate, cfg.ladder_depth
    )

    view = ObservationView(
        seed_bits=state.seed.bits,
        honest_b_score=score_b if cfg.beta > 0.0 else None,
        alpha=cfg.alpha,
        beta=cfg.beta,
        lambda_r=lam,
        pending_commitment=state.pending_commitment,
    )

    def oracle(bits: int) -> ScoreLadder:
        # Hypothetical next-round ladders are scored at the baseline rate;
        # the unknown next-round stake factor rescales all candidates alike,
        # so the argmin credential is unaffected.
        return score_ladder(ctx.adversary_key, UnitValue.from_bits(bits), cfg.alpha, 1)

    decision = decide(strategy, view, ladder, oracle)

    adv_score = math.nan
    adv_bits = 0
    if decision.broadcast is not None:
        b = decision.broadcast
        if (
            b.ladder_index < 0
            or b.ladder_index >= len(ladder)
            or b.score != float(ladder.entries[b.ladder_index])
            or b.credential_bits != int(ladder.credential_bits[b.ladder_index])
        ):
            raise StrategyContractError(
                "broadcast is not on the ladder for the current seed"
            )
        adv_score = b.score
        adv_bits = b.credential_bits

    # Lowest score wins; exact float comparison with fixed priority
    # adversary < B < C on ties (ties have probability zero).
    winner = WINNER_NONE
    best = math.inf
    if not math.isnan(adv_score) and adv_score < best:
        winner, best = WINNER_ADVERSARY, adv_score
    if score_b < best:
        winner, best = WINNER_HONEST_B, score_b
    if score_c < best:
        winner, best = WINNER_HONEST_C, score_c
    if winner == WINNER_NONE:
        raise RuntimeError("no broadcast at all; unreachable while B or C holds stake")

    if winner == WINNER_ADVERSARY:
        next_bits = adv_bits
    elif winner == WINNER_HONEST_B:
        next_bits = cred_b.bits
    else:
        next_bits = cred_c.bits

    if cfg.beta > 0.0:
        w_size = int(np.searchsorted(ladder.entries, score_b))
    else:
        w_size = len(ladder)

    adversary_won = winner == WINNER_ADVERSARY
    pending_next = decision.commit_next if adversary_won else None

    record = RoundRecord(
        round=state.round_index,
        seed_bits=state.seed.bits,
        winning_score=best,
        winner=WINNER_NAMES[winner],
        adversary_broadcast=None if math.isnan(adv_score) else adv_score,
        honest_scores=(
            None if math.isinf(score_b) else score_b,
            None if math.isinf(score_c) else score_c,
        ),
        online_stake=lam,
        markov_state=("C", "H")[state.seed_biased]
        if strategy == "one-lookahead"
        else None,
        is_reset=not state.seed_biased,
        w_size=w_size if strategy == "one-lookahead" else -1,
        fresh_decision=state.pending_commitment is None,
    )

    new_state = RoundState(
        round_index=state.round_index + 1,
        seed=UnitValue.from_bits(next_bits),
        online_stake=math.nan,  # set by the driver from the schedule
        pending_commitment=pending_next,
        seed_biased=pending_next is not None,
    )
    return new_state, record


def _simulate_reference(config: SimConfig) -> Trace:
    """Pure-Python engine; the jitted kernels are pinned to this bit for bit."""
    ctx = GameContext.from_config(config)
    total = config.burn_in + config.rounds
    schedule = stake_schedule(config.delta, ctx.stake_key, total)

    n = config.rounds
    cols = dict(
        seed_bits=np.empty(n, dtype=np.uint64),
        winning_score=np.empty(n),
        winner=np.empty(n, dtype=np.int8),
        adversary_broadcast=np.empty(n),
        honest_b=np.empty(n),
        honest_c=np.empty(n),
        online_stake=np.empty(n),
        markov_state=np.empty(n, dtype=np.int8),
        is_reset=np.empty(n, dtype=bool),
        w_size=np.empty(n, dtype=np.int16),
        fresh=np.empty(n, dtype=bool),
    )

    state = RoundState(
        round_index=0, seed=ctx.initial_seed, online_stake=float(schedule[0])
    )
    for r in range(total):
        state = replace(state, online_stake=float(schedule[r]))
        new_state, rec = run_round(ctx, state)
        if r >= config.burn_in:
            i = r - config.burn_in
            cols["seed_bits"][i] = rec.seed_bits
            cols["winning_score"][i] = rec.winning_score
            cols["winner"][i] = WINNER_NAMES.index(rec.winner)
            cols["adversary_broadcast"][i] = (
                math.nan if rec.adversary_broadcast is None else rec.adversary_broadcast
            )
            cols["honest_b"][i] = (
                math.inf if rec.honest_scores[0] is None else rec.honest_scores[0]
            )
            cols["honest_c"][i] = (
                math.inf if rec.honest_scores[1] is None else rec.honest_scores[1]
            )
            cols["online_stake"][i] = rec.online_stake
            cols["markov_state"][i] = (
                STATE_NA if rec.markov_state is None else ("C", "H").index(rec.markov_state)
            )
            cols["is_reset"][i] = rec.is_reset
            cols["w_size"][i] = rec.w_size
            cols["fresh"][i] = rec.fresh_decision
        state = new_state
    return Trace(config=config, **cols)


def run_simulation(config: SimConfig) -> Trace:
    """Simulate ``config.rounds`` recorded rounds after the burn-in.

    Deterministic in the master seed. Uses the jitted kernel when the numba
    backend is active.
    """
    if backend.HAS_NUMBA:
        from . import _sim_kernel

        return _sim_kernel.simulate(config)
    return _simulate_reference(config)


def mark_reset_rounds(trace: Trace) -> Trace:
    """Recompute ``is_reset`` from the decision metadata and validate it.

    A round's seed is fresh unless the previous round's decision weighed two
    or more winning candidates and that broadcast won. Honest and silent play
    never bias the seed, so every round resets. Raises for strategies without
    an operational rule.
    """
    strategy = trace.config.strategy
    if strategy not in STRATEGY_IDS:
        raise UnsupportedStrategyError(strategy)
    if strategy != "one-lookahead":
        trace.is_reset = np.ones(len(trace), dtype=bool)
        return trace
    biased = (
        (trace.winner[:-1] == WINNER_ADVERSARY)
        & trace.fresh[:-1]
        & (trace.w_size[:-1] >= 2)
    )
    expected = np.empty(len(trace), dtype=bool)
    expected[0] = trace.markov_state[0] == STATE_C  # burn-in predecessor decides
    expected[1:] = ~biased
    recorded = trace.markov_state == STATE_C
    if not np.array_equal(expected, recorded):
        raise RuntimeError("trace markov states disagree with its decision metadata")
    trace.is_reset = expected
    return trace


# ---------------------------------------------------------------------------
# serialization


def _float_json(x: float) -> Optional[float]:
    return None if (math.isnan(x) or math.isinf(x)) else x


def write_trace_jsonl(trace: Trace, path: str) -> None:
    """Full trace, one JSON record per line; seed bits hex-encoded."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace.records():
            fh.write(
                json.dumps(
                    {
                        "round": rec.round,
                        "seed_bits": f"{rec.seed_bits:016x}",
                        "winning_score": rec.winning_score,
                        "winner": rec.winner,
                        "adversary_broadcast": rec.adversary_broadcast,
                        "honest_scores": list(rec.honest_scores),
                        "online_stake": rec.online_stake,
                        "markov_state": rec.markov_state,
                        "is_reset": rec.is_reset,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def read_trace_jsonl(path: str) -> list[dict]:
    """Parse a JSONL trace back into record dictionaries (observer side)."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                rec["seed_bits"] = int(rec["seed_bits"], 16)
                out.append(rec)
    return out


def write_observer_csv(trace: Trace, path: str) -> None:
    """The onlooker's view: just (round, winning_score)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("round,winning_score\n")
        for r, score in enumerate(trace.winning_score.tolist()):
            fh.write(f"{r},{score!r}\n")
