import random

import pytest

from skatengine.cards import (
    DECK,
    GameKind,
    GameType,
    Suit,
    TrickState,
    cardset_of,
    iter_cards,
    set_points,
)
from skatengine.knowledge import InconsistentObservation, KnowledgeView, enumerate_worlds
from skatengine.paranoia import ParanoiaQuery, killer_card, kbps_declarer
from skatengine.solver import SearchPosition, apply_move, dd_best_card, dd_decide, dd_value
from skatengine.voting import endgame_vote

from positions import random_position
from views import declarer_view_of, opponent_view_of, query_position, world_position

HEARTS = GameType.of_suit(Suit.HEARTS)


def _not_null(rng, tricks, **kw):
    pos = random_position(rng, tricks=tricks, **kw)
    while pos.game.kind is GameKind.NULL:
        pos = random_position(rng, tricks=tricks, **kw)
    return pos


class TestSingleWorld:
    def test_matches_open_solver_best_card(self):
        rng = random.Random(3)
        hits = 0
        for _ in range(60):
            pos = _not_null(rng, rng.randint(2, 4), with_table=True)
            view = (declarer_view_of(pos, rng, forget=0)
                    if pos.to_move == pos.declarer else
                    opponent_view_of(pos, pos.to_move, rng, forget=0))
            qpos = query_position(view, pos)
            we_declare = pos.to_move == pos.declarer
            vote = endgame_vote(view, qpos, limit=60, confidence=0.90)
            winnable = dd_decide(pos, 60) == we_declare
            if not winnable:
                assert vote is None or vote.ratio < 1.0
                continue
            assert vote is not None and vote.ratio == 1.0
            card, value = dd_best_card(pos)
            if we_declare:
                assert dd_value(apply_move(pos, vote.card)) == value
            hits += 1
        assert hits > 10


class TestSmallBeliefSpaces:
    def test_unanimous_card_beats_split_card(self):
        # Scan small belief spaces for an instance where one card wins every
        # world and another does not; the vote must pick the unanimous one.
        from skatengine.cards import playable

        rng = random.Random(29)
        found = False
        while not found:
            pos = _not_null(rng, 2, with_table=False)
            if pos.to_move != pos.declarer:
                continue
            view = declarer_view_of(pos, rng, forget=4)
            qpos = query_position(view, pos)
            worlds = enumerate_worlds(view)
            legal = list(iter_cards(playable(view.own, qpos.table, pos.game)))
            if len(worlds) < 2 or len(legal) < 2:
                continue
            wins = {c: sum(1 for w in worlds
                           if dd_decide(apply_move(world_position(view, qpos, w), c), 60))
                    for c in legal}
            unanimous = [c for c, k in wins.items() if k == len(worlds)]
            partial = [c for c, k in wins.items() if 0 < k < len(worlds)]
            if not unanimous or not partial:
                continue
            found = True
            vote = endgame_vote(view, qpos, limit=60, confidence=0.90)
            assert vote is not None
            assert vote.card in unanimous
            assert vote.ratio == 1.0

    def test_all_cards_below_gate(self):
        # Whatever the declarer leads loses against the wrong placement:
        # nothing reaches the 90% gate.
        own = cardset_of("DT", "ST")
        pool = cardset_of("DA", "SA", "D7", "S7")
        skat = cardset_of("H7", "H8")
        view = KnowledgeView(
            seat=0, declarer=0, game=HEARTS, own=own,
            played=DECK & ~(own | pool | skat), pool=pool,
            h=(0, 0, 0), or_skat=(0, 0, 0), skat_known=skat, skat_forced=0,
            noskat=0, remaining=(2, 2, 2), aspts=40, gspts=38)
        qpos = SearchPosition(
            hands=(own, 0, 0), table=TrickState(0), played=view.played,
            to_move=0, game=HEARTS, declarer=0, aspts=40, gspts=38, skat=skat)
        vote = endgame_vote(view, qpos, limit=60, confidence=0.90)
        assert vote is None

    def test_zero_worlds_is_an_error(self):
        own = cardset_of("DT", "ST")
        skat = cardset_of("H7", "H8")
        view = KnowledgeView(
            seat=0, declarer=0, game=HEARTS, own=own,
            played=DECK & ~(own | skat | cardset_of("DA")),
            pool=cardset_of("DA"), h=(0, 0, 0), or_skat=(0, 0, 0),
            skat_known=skat, skat_forced=0, noskat=0,
            remaining=(2, 2, 2), aspts=55, gspts=45)
        qpos = SearchPosition(
            hands=(own, 0, 0), table=TrickState(0), played=view.played,
            to_move=0, game=HEARTS, declarer=0, aspts=55, gspts=45, skat=skat)
        with pytest.raises(InconsistentObservation):
            endgame_vote(view, qpos, limit=60)


class TestAgreementWithProofs:
    def test_killer_card_votes_unanimously(self):
        rng = random.Random(13)
        both = 0
        for _ in range(300):
            pos = _not_null(rng, rng.randint(2, 3), with_table=False)
            if pos.to_move != pos.declarer:
                continue
            view = declarer_view_of(pos, rng, forget=rng.randint(0, 4))
            qpos = query_position(view, pos)
            found = killer_card(view, qpos, 60)
            if found is None:
                continue
            card, _ = found
            vote = endgame_vote(view, qpos, limit=60, confidence=0.90)
            assert vote is not None
            # The killer card wins every world, so the vote's choice must too.
            worlds = enumerate_worlds(view)
            killer_wins = sum(
                1 for w in worlds
                if dd_decide(apply_move(world_position(view, qpos, w), card), 60))
            assert killer_wins == len(worlds)
            assert vote.ratio == 1.0
            both += 1
            if both >= 12:
                break
        assert both >= 12

    def test_deterministic_under_fixed_order(self):
        rng = random.Random(17)
        for _ in range(10):
            pos = _not_null(rng, 3, with_table=True)
            view = (declarer_view_of(pos, rng, forget=4)
                    if pos.to_move == pos.declarer else
                    opponent_view_of(pos, pos.to_move, rng, forget=4))
            qpos = query_position(view, pos)
            first = endgame_vote(view, qpos, limit=60, confidence=0.0)
            second = endgame_vote(view, qpos, limit=60, confidence=0.0)
            assert (first is None) == (second is None)
            if first is not None:
                assert (first.card, first.ratio) == (second.card, second.ratio)
