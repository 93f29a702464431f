"""Endgame recommendation by solving every consistent world open-card.

Each playable card is scored by its win ratio across the enumerated
belief space; the best card is recommended only when the ratio clears the
confidence gate.  Point totals and provable higher contracts act as tie
breakers, never as a substitute for the gate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from .cards import GameKind, iter_cards, playable
from .knowledge import InconsistentObservation, KnowledgeView, enumerate_worlds
from .solver import OpenSolver, SearchPosition, SearchTimeout, apply_move


@dataclass
class VoteTally:
    wins: int = 0
    losses: int = 0
    point_sum: int = 0
    min_value: int = 121

    def add(self, won: bool, value: int) -> None:
        if won:
            self.wins += 1
        else:
            self.losses += 1
        self.point_sum += value
        self.min_value = min(self.min_value, value)


@dataclass
class VoteResult:
    card: int
    ratio: float
    tally: VoteTally
    worlds: int


def endgame_vote(
    view: KnowledgeView,
    pos: SearchPosition,
    limit: int = 60,
    world_cap: int = 2500,
    confidence: float = 0.90,
    deadline: Optional[float] = None,
    level_bonus: float = 0.01,
) -> Optional[VoteResult]:
    """Best card by open-solver voting, or None below the confidence gate.

    Worlds beyond `world_cap` are dropped in enumeration order, keeping the
    vote deterministic.  May raise SearchTimeout past the deadline.
    """
    worlds = enumerate_worlds(view, cap=world_cap)
    if not worlds:
        raise InconsistentObservation("no consistent world to vote over")
    legal = playable(view.own, pos.table, pos.game)
    cards = list(iter_cards(legal))
    tallies = {c: VoteTally() for c in cards}
    we_declare = view.seat == view.declarer
    is_null = pos.game.kind is GameKind.NULL

    def full_position(w) -> SearchPosition:
        return SearchPosition(hands=w.hands, table=pos.table, played=pos.played,
                              to_move=pos.to_move, game=pos.game,
                              declarer=pos.declarer, aspts=pos.aspts,
                              gspts=pos.gspts, skat=w.skat)

    # First pass: cheap win/loss decisions drive the ratio.
    for w in worlds:
        if deadline is not None and time.monotonic() > deadline:
            raise SearchTimeout
        full = full_position(w)
        solver = OpenSolver(pos.game, pos.declarer, deadline=deadline)
        for c in cards:
            child = apply_move(full, c)
            if is_null:
                won = solver.null_safe(child) == we_declare
            else:
                won = solver.decide(child, limit) == we_declare
            tallies[c].add(won, 0)

    n = len(worlds)
    leaders = sorted(cards, key=lambda c: (-tallies[c].wins, c))
    top_wins = tallies[leaders[0]].wins
    leaders = [c for c in leaders if tallies[c].wins == top_wins]

    if len(leaders) > 1 and not is_null:
        # Exact values break the tie among the leading cards only.
        for c in leaders:
            tallies[c].point_sum = 0
            tallies[c].min_value = 121
        for w in worlds:
            if deadline is not None and time.monotonic() > deadline:
                raise SearchTimeout
            full = full_position(w)
            solver = OpenSolver(pos.game, pos.declarer, deadline=deadline)
            for c in leaders:
                value = solver.value(apply_move(full, c))
                tallies[c].point_sum += value
                tallies[c].min_value = min(tallies[c].min_value, value)

    def provable_levels(t: VoteTally) -> int:
        if is_null or not we_declare:
            return 0
        lvl = 0
        for threshold in (89, 119):
            if threshold > limit and t.min_value > threshold:
                lvl += 1
        return lvl

    def score(c: int):
        t = tallies[c]
        points = t.point_sum if we_declare else 120 * n - t.point_sum
        return (points / (120 * n), level_bonus * provable_levels(t), -c)

    best = max(leaders, key=score)
    ratio = tallies[best].wins / n
    if ratio < confidence:
        return None
    return VoteResult(card=best, ratio=ratio, tally=tallies[best], worlds=n)
