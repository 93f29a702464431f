"""Full-deal self-play: bid, put the skat, play out, emit a game record."""

from __future__ import annotations

from typing import Optional

from .cards import (
    Contract,
    GameKind,
    TrickState,
    playable,
    set_points,
    trick_winner,
)
from .knowledge import ViewTracker
from .policy import PolicyConfig, choose_card, pick_game, simple_bid
from .replay import GameRecord, _trump_won


def play_deal(hands: tuple[int, int, int], skat: int, policy: PolicyConfig,
              declarer: Optional[int] = None) -> Optional[GameRecord]:
    """Play one deal with every seat driven by the policy.

    Returns None when all hands pass.  With `declarer` given the bidding is
    skipped and that seat plays whatever the skat putting picks.
    """
    bids = [simple_bid(h) for h in hands]
    if declarer is None:
        if max(bids) == 0:
            return None
        declarer = max(range(3), key=lambda s: (bids[s], -s))
    game, discard = pick_game(hands[declarer] | skat)
    contract = Contract(game)
    live = list(hands)
    live[declarer] = (hands[declarer] | skat) & ~discard

    trackers = [ViewTracker(s, live[s], game, declarer,
                            skat_if_known=discard if s == declarer else None,
                            noskat_heuristic=policy.noskat_heuristic,
                            conventions=policy.conventions)
                for s in range(3)]
    moves: list[int] = []
    trick = TrickState(0)
    aspts = set_points(discard)
    declarer_tricks = opp_tricks = 0
    for _ in range(30):
        seat = trick.next_seat
        rec = choose_card(trackers[seat].view, trick, policy,
                          limit=contract.limit)
        card = rec.card
        assert playable(live[seat], trick, game) & (1 << card)
        moves.append(card)
        for s in range(3):
            trackers[s].observe(seat, card, trick)
        live[seat] &= ~(1 << card)
        trick = trick.add(seat, card)
        if trick.is_full:
            winner = trick_winner(trick, game)
            if winner == declarer:
                declarer_tricks += 1
                aspts += trick.points
            else:
                opp_tricks += 1
            trick = TrickState(winner)
        if game.kind is GameKind.NULL and declarer_tricks:
            break

    if game.kind is GameKind.NULL:
        won = declarer_tricks == 0
        points = 0 if won else aspts
    else:
        points = aspts
        won = _trump_won(contract, aspts, opp_tricks)
    return GameRecord(hands=hands, skat=skat, bid=max(bids[declarer], 18),
                      declarer=declarer, game=game, hand_flag=False,
                      ouvert_flag=False, announced=contract.announced,
                      pickup=True, discards=discard, moves=tuple(moves),
                      declarer_points=points, won=won)
