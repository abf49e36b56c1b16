"""Adversary strategies as pure decision functions.

A strategy sees one round's observation (the seed, its own score ladder, and
the well-connected fraction of the honest broadcast) and returns what to
broadcast. Commitment state is explicit in the view, never hidden inside the
strategy, so decisions replay exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .core import ScoreLadder

LadderOracle = Callable[[int], ScoreLadder]


@dataclass(frozen=True)
class ObservationView:
    """What the adversary knows when it must broadcast in round r.

    ``honest_b_score`` is the score of the honest stake the adversary hears
    before deciding; it is present exactly when ``beta > 0``. The rest of the
    honest broadcast stays hidden until after the decision.
    ``pending_commitment`` carries the credential identity promised for this
    round by the previous round's winning broadcast, if any.
    """

    seed_bits: int
    honest_b_score: Optional[float]
    alpha: float
    beta: float
    lambda_r: float
    pending_commitment: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.honest_b_score is None) != (self.beta == 0.0):
            raise ValueError("honest B score is visible exactly when beta > 0")


@dataclass(frozen=True)
class Broadcast:
    ladder_index: int
    score: float
    credential_bits: int


@dataclass(frozen=True)
class StrategyDecision:
    """One round's action: an optional broadcast, an optional commitment.

    ``commit_next`` names the credential to broadcast next round should this
    broadcast win. It is set only when the decision weighed two or more
    winning candidates -- a single-candidate or empty choice leaves the next
    seed unbiased, and the strategy then re-optimizes from scratch (this is
    what makes the induced seed chain the two-state one).
    """

    broadcast: Optional[Broadcast]
    commit_next: Optional[int] = None


class StrategyContractError(RuntimeError):
    """A decision referenced a credential that is not on the round's ladder."""


def honest_decide(view: ObservationView, ladder: ScoreLadder) -> StrategyDecision:
    """Broadcast the minimum-score credential, as the protocol intends."""
    if len(ladder) == 0:
        raise StrategyContractError("honest player needs a nonempty ladder")
    return StrategyDecision(
        broadcast=Broadcast(0, float(ladder.entries[0]), int(ladder.credential_bits[0]))
    )


def silent_decide(view: ObservationView) -> StrategyDecision:
    """Never broadcast; indistinguishable from being offline."""
    return StrategyDecision(broadcast=None)


def lookahead_objective(
    s_i: float, s_next: float, alpha: float, beta: float
) -> float:
    """Expected rounds won among {r, r+1} when broadcasting a score ``s_i``.

    First term: the chance ``s_i`` beats the unheard honest stake,
    Exp((1-beta)(1-alpha)). Second: that chance times the chance the
    pre-computed follow-up credential (score ``s_next``) beats a full honest
    draw Exp(1-alpha) next round. At beta = 1 the first term is 1 for any
    winning candidate and the choice reduces to minimizing ``s_next``.
    """
    if s_i < 0.0 or s_next < 0.0:
        raise ValueError("scores are nonnegative")
    p_now = math.exp(-(1.0 - beta) * (1.0 - alpha) * s_i)
    return p_now + p_now * math.exp(-(1.0 - alpha) * s_next)


def one_lookahead_decide(
    view: ObservationView, ladder: ScoreLadder, ladder_oracle: LadderOracle
) -> StrategyDecision:
    """The one-round-lookahead manipulation.

    A pending commitment is broadcast verbatim (the taken win is spent, the
    chain resets). Otherwise the candidate set W is every ladder entry that
    beats the heard honest score -- the whole (truncated) ladder when beta =
    0, since nothing is heard. Each candidate is scored by
    ``lookahead_objective`` using the first entry of the hypothetical ladder
    its credential would seed; the argmax is broadcast and, when the choice
    was between two or more candidates, its follow-up credential is committed
    for the next round.

    Ladder truncation is safe: a candidate with score s has objective at most
    2 e^{-(1-alpha)s}, so entries past the point where that bound drops under
    2^-40 can never alter the argmax; at alpha <= 0.5 the default 16-entry
    prefix is already orders of magnitude past it.
    """
    if view.pending_commitment is not None:
        bits = int(ladder.credential_bits[0])
        if bits != view.pending_commitment:
            raise StrategyContractError(
                "pending commitment is not the current ladder minimum"
            )
        return StrategyDecision(
            broadcast=Broadcast(0, float(ladder.entries[0]), bits)
        )

    if view.beta > 0.0:
        limit = view.honest_b_score
        w_size = 0
        while w_size < len(ladder) and ladder.entries[w_size] < limit:
            w_size += 1
    else:
        w_size = len(ladder)

    if w_size == 0:
        return StrategyDecision(broadcast=None)

    best_obj = -1.0
    best_i = -1
    best_next_bits = 0
    for i in range(w_size):
        hypothetical = ladder_oracle(int(ladder.credential_bits[i]))
        if hypothetical is None or len(hypothetical) == 0:
            raise StrategyContractError("ladder oracle returned no hypothetical ladder")
        obj = lookahead_objective(
            float(ladder.entries[i]),
            float(hypothetical.entries[0]),
            view.alpha,
            view.beta,
        )
        if obj > best_obj:
            best_obj = obj
            best_i = i
            best_next_bits = int(hypothetical.credential_bits[0])

    return StrategyDecision(
        broadcast=Broadcast(
            best_i, float(ladder.entries[best_i]), int(ladder.credential_bits[best_i])
        ),
        commit_next=best_next_bits if w_size >= 2 else None,
    )


STRATEGY_IDS = ("honest", "silent", "one-lookahead")


def decide(
    strategy: str,
    view: ObservationView,
    ladder: ScoreLadder,
    ladder_oracle: LadderOracle,
) -> StrategyDecision:
    """Dispatch on the strategy identifier used in simulation configs."""
    if strategy == "honest":
        return honest_decide(view, ladder)
    if strategy == "silent":
        return silent_decide(view)
    if strategy == "one-lookahead":
        return one_lookahead_decide(view, ladder, ladder_oracle)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGY_IDS}")
