"""Full-seat player: fuses killer, endgame, hope and expert recommendations
under a decision budget, plus heuristic bidding and skat putting.

Priority order: a completed paranoia proof beats everything; the endgame
vote and the hope card come next; a rule-based expert card is the total
fallback.  Searches that outrun their slice are discarded whole, never
turned into "probably winning" claims.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Optional

from .cards import (
    CARD_POINTS,
    Contract,
    GameKind,
    GameOutcome,
    GameType,
    Suit,
    TrickState,
    cardset,
    game_value,
    iter_cards,
    plain_suit_set,
    playable,
    set_points,
    trick_leader,
    trump_set,
)
from .knowledge import KnowledgeView, count_worlds
from .paranoia import (
    AssignmentConstraint,
    avoid_schneider,
    killer_card,
    proven_position,
)
from .solver import SearchTimeout, tables_for
from .voting import endgame_vote


@dataclass(frozen=True, slots=True)
class PolicyConfig:
    akbps_start_card: int = 6
    kbps_start_card: int = 9
    endgame_start_trick: int = 5
    world_cap: int = 2500
    confidence: float = 0.90
    decision_budget: float = 5.0  # seconds
    noskat_heuristic: bool = True
    conventions: bool = False
    kbps_enabled: bool = True
    suit_cap: Optional[int] = 5
    hope_world_cap: int = 400

    def __post_init__(self) -> None:
        if self.kbps_start_card < self.akbps_start_card:
            raise ValueError("exact search may not start before the approximate one")
        if self.decision_budget <= 0:
            raise ValueError("decision budget must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "PolicyConfig":
        if path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:  # Python 3.10
                import tomli as tomllib  # type: ignore[no-redef]
            with open(path, "rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class Source(Enum):
    KILLER = "killer"
    ENDGAME = "endgame"
    HOPE = "hope"
    EXPERT = "expert"


@dataclass(frozen=True, slots=True)
class Recommendation:
    card: int
    source: Source
    proof: Optional[int] = None   # proven contract level for killer cards
    ratio: Optional[float] = None
    time_pressure: bool = False

    def __post_init__(self) -> None:
        if self.source is Source.KILLER and self.proof is None:
            raise ValueError("killer recommendations carry their proven level")


def choose_card(view: KnowledgeView, table: TrickState, config: PolicyConfig,
                limit: int = 60,
                now: Optional[float] = None) -> Recommendation:
    """Pick a card for the view's seat; always returns a legal card."""
    start = time.monotonic() if now is None else now
    deadline = start + config.decision_budget - 0.08
    pos = proven_position(view, table)
    legal = playable(view.own, table, view.game)
    pressured = False

    if not legal & (legal - 1):
        return Recommendation(card=legal.bit_length() - 1, source=Source.EXPERT)

    declaring = view.role == "declarer"
    cards_played = view.played.bit_count()
    tricks_done = (view.played & ~table.cards).bit_count() // 3

    if view.game.kind is not GameKind.NULL and config.kbps_enabled:
        half = start + config.decision_budget / 2
        if cards_played >= config.akbps_start_card:
            constraint = AssignmentConstraint(suit_cap=config.suit_cap)
            try:
                found = killer_card(view, pos, limit, constraint=constraint,
                                    deadline=half)
                if found is not None:
                    return Recommendation(card=found[0], source=Source.KILLER,
                                          proof=found[1],
                                          time_pressure=pressured)
            except SearchTimeout:
                pressured = True
        if cards_played >= config.kbps_start_card and \
                deadline - time.monotonic() > config.decision_budget / 2:
            try:
                found = killer_card(view, pos, limit, deadline=deadline)
                if found is not None:
                    return Recommendation(card=found[0], source=Source.KILLER,
                                          proof=found[1],
                                          time_pressure=pressured)
            except SearchTimeout:
                pressured = True
        if not declaring and view.aspts > limit:
            # The contract is gone; fight for the schneider/schwarz bounds.
            try:
                guard = avoid_schneider(view, pos, deadline=deadline)
                if guard is not None:
                    return Recommendation(card=guard, source=Source.KILLER,
                                          proof=90, time_pressure=pressured)
            except SearchTimeout:
                pressured = True

    n_worlds = count_worlds(view)
    if n_worlds > 0 and (tricks_done >= config.endgame_start_trick
                         or n_worlds <= config.world_cap):
        try:
            vote = endgame_vote(view, pos, limit=limit,
                                world_cap=config.world_cap,
                                confidence=config.confidence,
                                deadline=deadline)
            if vote is not None:
                return Recommendation(card=vote.card, source=Source.ENDGAME,
                                      ratio=vote.ratio,
                                      time_pressure=pressured)
        except SearchTimeout:
            pressured = True

    if view.game.kind is not GameKind.NULL and n_worlds > 0:
        from .paranoia import hope_card
        try:
            hc = hope_card(view, pos, limit, world_cap=config.hope_world_cap,
                           deadline=deadline)
            if hc is not None:
                return Recommendation(card=hc, source=Source.HOPE,
                                      time_pressure=pressured)
        except SearchTimeout:
            pressured = True

    return Recommendation(card=expert_fallback(view, table), source=Source.EXPERT,
                          time_pressure=pressured)


# --- expert fallback --------------------------------------------------------


def expert_fallback(view: KnowledgeView, table: TrickState) -> int:
    """Deterministic rule-based card, always legal."""
    game = view.game
    legal = playable(view.own, table, game)
    if not legal & (legal - 1):
        return legal.bit_length() - 1
    if game.kind is GameKind.NULL:
        return _null_expert(view, table, legal)
    if view.role == "declarer":
        return _declarer_expert(view, table, legal)
    return _opponent_expert(view, table, legal)


def _power_of(game: GameType, c: int) -> int:
    t = tables_for(game)
    return t.power_trump[c] or t.power_plain[c]


def _is_master(view: KnowledgeView, c: int) -> bool:
    """No card still out against us beats c in its own class."""
    trump = trump_set(view.game)
    if (1 << c) & trump:
        klass = trump
    else:
        klass = plain_suit_set(view.game, Suit(c >> 3))
    out = klass & ~(view.own | view.played)
    mine = _power_of(view.game, c)
    return all(_power_of(view.game, x) < mine for x in iter_cards(out))


def _winning_cards(view: KnowledgeView, table: TrickState, legal: int) -> list[int]:
    out = []
    for c in iter_cards(legal):
        t = table.add(table.next_seat, c)
        if trick_leader(t, view.game) == table.next_seat:
            out.append(c)
    return out


def _lowest(cards: int) -> int:
    return (cards & -cards).bit_length() - 1


def _by_points_then_bit(cards, reverse=False):
    return sorted(cards, key=lambda c: (CARD_POINTS[c], c), reverse=reverse)


def _declarer_expert(view: KnowledgeView, table: TrickState, legal: int) -> int:
    game = view.game
    trump = trump_set(game)
    if table.is_empty:
        live_enemy_trump = trump & ~(view.own | view.played)
        masters = [c for c in iter_cards(legal) if _is_master(view, c)]
        trump_masters = [c for c in masters if (1 << c) & trump]
        if trump_masters and live_enemy_trump:
            return trump_masters[0]  # pull trump while holding the master
        plain_masters = [c for c in masters if not (1 << c) & trump]
        if plain_masters:
            return max(plain_masters, key=lambda c: (CARD_POINTS[c], -c))
        if masters:
            return masters[0]
        return _by_points_then_bit(iter_cards(legal))[0]
    winners = _winning_cards(view, table, legal)
    if winners:
        cheap = [c for c in winners if _is_master(view, c)] or winners
        return min(cheap, key=lambda c: (_power_of(game, c), c))
    return _by_points_then_bit(iter_cards(legal))[0]


def _opponent_expert(view: KnowledgeView, table: TrickState, legal: int) -> int:
    game = view.game
    seat = view.seat
    if table.is_empty:
        # Lead cheap and long: lowest card of the longest plain suit.
        best = None
        for s in range(4):
            suit = plain_suit_set(game, Suit(s))
            mine = legal & suit
            if mine:
                cand = (_lowest(mine), -mine.bit_count())
                if best is None or cand[1] < best[1]:
                    best = (cand[0], cand[1])
        if best is not None:
            return best[0]
        return _by_points_then_bit(iter_cards(legal))[0]
    declarer_has_it = trick_leader(table, game) == view.declarer
    winners = _winning_cards(view, table, legal)
    last_to_play = len(table.plays) == 2
    if last_to_play and not declarer_has_it:
        # Partner already holds the trick: smear the fattest card.
        return _by_points_then_bit(iter_cards(legal), reverse=True)[0]
    if winners and (table.points > 3 or last_to_play):
        return min(winners, key=lambda c: (_power_of(game, c), c))
    if declarer_has_it:
        return _by_points_then_bit(iter_cards(legal))[0]  # duck low
    return _by_points_then_bit(iter_cards(legal), reverse=True)[0]  # smear high


def _null_expert(view: KnowledgeView, table: TrickState, legal: int) -> int:
    game = view.game
    if view.role == "declarer":
        if table.is_empty:
            return min(iter_cards(legal), key=lambda c: (_power_of(game, c), c))
        under = [c for c in iter_cards(legal)
                 if trick_leader(table.add(table.next_seat, c), game)
                 != table.next_seat]
        if under:
            return max(under, key=lambda c: (_power_of(game, c), -c))
        return min(iter_cards(legal), key=lambda c: (_power_of(game, c), c))
    if table.is_empty:
        return min(iter_cards(legal), key=lambda c: (_power_of(game, c), c))
    return max(iter_cards(legal), key=lambda c: (_power_of(game, c), -c))


# --- bidding and skat putting ----------------------------------------------


def _hand_strength(hand: int, game: GameType) -> float:
    """Crude winning-chance score for a 10-card hand playing `game`."""
    trump = trump_set(game)
    trumps = (hand & trump).bit_count()
    jacks = (hand & cardset([7, 15, 23, 31])).bit_count()
    aces = sum(1 for s in range(4) if hand & (1 << (8 * s + 6)) & ~trump)
    tens_guarded = 0
    voids = 0
    for s in range(4):
        suit = plain_suit_set(game, Suit(s))
        mine = hand & suit
        if not mine and not (trump & (0xFF << (8 * s))):
            voids += 1
        if mine & (1 << (8 * s + 5)) and mine.bit_count() >= 2:
            tens_guarded += 1
    if game.kind is GameKind.GRAND:
        return 2.2 * jacks + 1.6 * aces + tens_guarded + 0.3 * voids
    return 1.2 * trumps + jacks + 1.2 * aces + 0.8 * tens_guarded + 0.6 * voids


def _null_strength(hand: int) -> float:
    score = 0.0
    for s in range(4):
        suit = 0xFF << (8 * s)
        mine = hand & suit
        if not mine:
            score += 2.0
            continue
        ranks = sorted(_null_rank(c) for c in iter_cards(mine))
        holes = sum(1 for i, r in enumerate(ranks) if r > i)
        score += 2.0 - holes
    return score


def _null_rank(c: int) -> int:
    order = {0: 0, 1: 1, 2: 2, 5: 3, 7: 4, 3: 5, 4: 6, 6: 7}
    return order[c & 7]


_GRAND_THRESHOLD = 11.0
_SUIT_THRESHOLD = 11.5
_NULL_THRESHOLD = 7.2


def viable_games(hand: int) -> list[tuple[GameType, float]]:
    """Game candidates whose heuristic score clears the play threshold."""
    out = []
    for s in range(4):
        g = GameType.of_suit(Suit(s))
        score = _hand_strength(hand, g) - _SUIT_THRESHOLD
        if score >= 0:
            out.append((g, score))
    grand = _hand_strength(hand, GameType.grand()) - _GRAND_THRESHOLD
    if grand >= 0:
        out.append((GameType.grand(), grand))
    null = _null_strength(hand) - _NULL_THRESHOLD
    if null >= 0:
        out.append((GameType.null(), null))
    return out


def estimate_game(hand: int) -> Optional[tuple[GameType, float]]:
    """Best heuristic game for a 10-card hand, or None to pass."""
    games = viable_games(hand)
    return max(games, key=lambda gs: gs[1]) if games else None


def simple_bid(hand: int) -> int:
    """Maximum bid this hand supports: the highest value among all games the
    hand is willing to play, or 0 to pass."""
    if hand.bit_count() != 10:
        raise ValueError("bid on a 10-card hand")
    best = 0
    for game, _ in viable_games(hand):
        if game.kind is GameKind.NULL:
            best = max(best, 23)
        else:
            best = max(best, game_value(Contract(game), hand,
                                        GameOutcome(won=True)))
    return best


def pick_game(hand12: int) -> tuple[GameType, int]:
    """Evaluate all 66 discards of a 12-card holding; return (game, discard)."""
    if hand12.bit_count() != 12:
        raise ValueError("skat putting needs 12 cards")
    cards = list(iter_cards(hand12))
    best: Optional[tuple[float, GameType, int]] = None
    for pair in combinations(cards, 2):
        discard = (1 << pair[0]) | (1 << pair[1])
        rest = hand12 & ~discard
        est = estimate_game(rest)
        if est is None:
            score, game = -100.0, GameType.of_suit(Suit.DIAMONDS)
        else:
            game, score = est
        if game.kind is not GameKind.NULL:
            score += set_points(discard) / 15.0
            score -= (discard & trump_set(game)).bit_count()
        key = (score, base_game_key(game), -discard)
        if best is None or key > (best[0], base_game_key(best[1]), -best[2]):
            best = (score, game, discard)
    assert best is not None
    return best[1], best[2]


def base_game_key(game: GameType) -> int:
    if game.kind is GameKind.NULL:
        return 23
    if game.kind is GameKind.GRAND:
        return 24
    from .cards import SUIT_BASE
    assert game.suit is not None
    return SUIT_BASE[game.suit]


BID_LADDER = sorted({b * m for b in (9, 10, 11, 12, 24) for m in range(2, 12)}
                    | {23, 35, 46, 59})
