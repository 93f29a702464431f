import random

import pytest

from skatengine.cards import (
    GameType,
    Suit,
    TrickState,
    cardset_of,
    iter_cards,
    parse_card,
    playable,
    set_points,
)
from skatengine.solver import (
    OpenSolver,
    SearchPosition,
    apply_move,
    dd_best_card,
    dd_decide,
    dd_null,
    dd_null_best,
    dd_value,
)

import oracles
from positions import oracle_args, random_position


def _pos(hands, skat, game, declarer, leader=0, aspts=0, gspts=0):
    """Build a small test position; unused cards count as played."""
    from skatengine.cards import DECK, cardset
    hand_sets = tuple(cardset_of(*h) for h in hands)
    skat_set = cardset_of(*skat)
    played = DECK & ~(hand_sets[0] | hand_sets[1] | hand_sets[2] | skat_set)
    gone = set_points(played)
    return SearchPosition(hands=hand_sets, table=TrickState(leader), played=played,
                          to_move=leader, game=game, declarer=declarer,
                          aspts=aspts, gspts=gone - aspts, skat=skat_set)


HEARTS = GameType.of_suit(Suit.HEARTS)


class TestDecide:
    def test_single_trick_master_wins(self):
        # Declarer leads the diamond ace against two small diamonds.
        pos = _pos([("DA",), ("D7",), ("D8",)], ("H7", "H8"), HEARTS,
                   declarer=0, leader=0, aspts=55)
        assert dd_decide(pos, 60)  # 55 + 11 > 60
        assert dd_value(pos) == 66

    def test_boundary_is_strict(self):
        pos = _pos([("DA",), ("D7",), ("D8",)], ("H7", "H8"), HEARTS,
                   declarer=0, leader=0, aspts=49)
        assert not dd_decide(pos, 60)  # 49 + 11 = 60 is not > 60
        assert dd_decide(pos, 59)

    def test_limit_120_never_reachable(self):
        rng = random.Random(1)
        for _ in range(20):
            pos = random_position(rng, tricks=3)
            assert not dd_decide(pos, 120)

    def test_skat_points_credit_declarer(self):
        pos = _pos([("DA",), ("D7",), ("D8",)], ("HA", "HT"), HEARTS,
                   declarer=1, leader=0, aspts=0)
        # Declarer (seat 1) discards on the trick; skat alone is 21 points.
        assert dd_value(pos) >= 21

    def test_matches_bruteforce_on_random_positions(self):
        rng = random.Random(42)
        for _ in range(60):
            pos = random_position(rng, tricks=rng.randint(1, 4), with_table=True)
            hands, leader, game, declarer, table = oracle_args(pos)
            want = (pos.aspts + set_points(pos.skat)
                    + oracles.minimax_declarer_points(hands, leader, game, declarer, table))
            got = dd_value(pos)
            assert got == want, (pos, got, want)


class TestValue:
    def test_terminal_position(self):
        pos = _pos([(), (), ()], ("DA", "DT"), HEARTS, declarer=2)
        assert dd_value(pos) == pos.aspts + 21

    def test_defining_property_of_value(self):
        rng = random.Random(7)
        for _ in range(25):
            pos = random_position(rng, tricks=rng.randint(1, 3))
            v = dd_value(pos)
            if v > 0:
                assert dd_decide(pos, v - 1)
            if v < 120:
                assert not dd_decide(pos, v)

    def test_monotone_in_limit(self):
        rng = random.Random(11)
        for _ in range(10):
            pos = random_position(rng, tricks=3)
            results = [dd_decide(pos, lim) for lim in range(0, 121, 10)]
            assert results == sorted(results, reverse=True)

    def test_zero_sum_accounting(self):
        rng = random.Random(13)
        for _ in range(20):
            pos = random_position(rng, tricks=3)
            total = (pos.aspts + pos.gspts + set_points(pos.remaining)
                     + set_points(pos.skat))
            assert total == 120
            v = dd_value(pos)
            opp_best = 120 - v
            assert 0 <= opp_best <= 120


class TestBestCard:
    def test_forced_move(self):
        pos = _pos([("DA",), ("D7",), ("D8",)], ("H7", "H8"), HEARTS,
                   declarer=0, leader=0)
        card, value = dd_best_card(pos)
        assert card == parse_card("DA")
        assert value == dd_value(pos)

    def test_lead_master_collects(self):
        pos = _pos([("DA", "D7"), ("D8", "C7"), ("D9", "C8")], ("H7", "H8"),
                   HEARTS, declarer=0, leader=0)
        card, value = dd_best_card(pos)
        assert card == parse_card("DA")
        assert value == dd_value(pos)

    def test_value_consistent_after_moving(self):
        rng = random.Random(19)
        for _ in range(15):
            pos = random_position(rng, tricks=2)
            card, value = dd_best_card(pos)
            assert value == dd_value(pos)
            assert dd_value(apply_move(pos, card)) == value

    def test_opponent_minimizes(self):
        rng = random.Random(23)
        seen_opponent = 0
        for _ in range(20):
            pos = random_position(rng, tricks=2)
            if pos.to_move == pos.declarer:
                continue
            seen_opponent += 1
            card, value = dd_best_card(pos)
            legal = playable(pos.hands[pos.to_move], pos.table, pos.game)
            values = [dd_value(apply_move(pos, c)) for c in iter_cards(legal)]
            assert value == min(values)
        assert seen_opponent > 0


class TestNull:
    NULL = GameType.null()

    def test_lowest_cards_are_safe(self):
        pos = _pos([("D7", "S7"), ("D8", "S8"), ("D9", "S9")], ("H7", "H8"),
                   GameType.null(), declarer=0, leader=1)
        assert dd_null(pos)

    def test_master_card_eventually_takes(self):
        pos = _pos([("SA", "S7"), ("S8", "S9"), ("SK", "SQ")], ("H7", "H8"),
                   GameType.null(), declarer=0, leader=1)
        assert not dd_null(pos)

    def test_matches_bruteforce(self):
        rng = random.Random(31)
        for _ in range(40):
            pos = random_position(rng, tricks=rng.randint(1, 3),
                                  game=GameType.null())
            hands, leader, game, declarer, table = oracle_args(pos)
            want = oracles.minimax_null_declarer_safe(hands, leader, game,
                                                      declarer, table)
            assert dd_null(pos) == want

    def test_null_best_card(self):
        pos = _pos([("D7", "DT"), ("D8", "H7"), ("D9", "H8")], ("S7", "S8"),
                   GameType.null(), declarer=0, leader=0)
        card, safe = dd_null_best(pos)
        # Leading the ten forces a later diamond loss; the seven is safe.
        assert card == parse_card("D7")
        assert safe


class TestPruningSafety:
    def test_pruned_equals_unpruned(self):
        rng = random.Random(101)
        for _ in range(40):
            pos = random_position(rng, tricks=rng.randint(1, 4), with_table=True)
            fast = OpenSolver(pos.game, pos.declarer)
            slow = OpenSolver(pos.game, pos.declarer, pruning=False, use_tt=False)
            assert fast.value(pos) == slow.value(pos)

    def test_null_pruned_equals_unpruned(self):
        rng = random.Random(103)
        for _ in range(25):
            pos = random_position(rng, tricks=rng.randint(1, 3), game=GameType.null())
            fast = OpenSolver(pos.game, pos.declarer)
            slow = OpenSolver(pos.game, pos.declarer, pruning=False, use_tt=False)
            assert fast.null_safe(pos) == slow.null_safe(pos)


class TestValidation:
    def test_overlapping_hands_rejected(self):
        pos = _pos([("DA",), ("DA",), ("D8",)], ("H7", "H8"), HEARTS, 0)
        with pytest.raises(ValueError):
            pos.validate()

    def test_good_position_validates(self):
        rng = random.Random(5)
        for _ in range(20):
            random_position(rng, tricks=rng.randint(1, 5), with_table=True).validate()
