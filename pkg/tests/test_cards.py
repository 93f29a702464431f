import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skatengine.cards import (
    AnnouncedLevel,
    Card,
    Contract,
    DECK,
    GameKind,
    GameOutcome,
    GameType,
    JACKS,
    Rank,
    Suit,
    TrickState,
    card_points,
    card_str,
    cardset,
    cardset_of,
    game_value,
    iter_cards,
    matadors,
    parse_card,
    playable,
    set_from_json,
    set_points,
    set_to_json,
    trick_winner,
    trump_set,
)

import oracles

GAMES = [GameType.grand(), GameType.null()] + [GameType.of_suit(s) for s in Suit]


class TestEncoding:
    def test_bit_layout(self):
        assert parse_card("D7") == 0
        assert parse_card("DJ") == 7
        assert parse_card("HA") == 8 + 6
        assert parse_card("CJ") == 31
        for i in range(32):
            assert parse_card(card_str(i)) == i
            assert Card.of(i).index == i

    def test_deck_has_32_cards(self):
        assert DECK.bit_count() == 32
        assert len(list(iter_cards(DECK))) == 32

    def test_json_roundtrip_ascending(self):
        s = cardset_of("CJ", "D7", "HA")
        names = set_to_json(s)
        assert names == ["D7", "HA", "CJ"]  # ascending bit index
        assert set_from_json(names) == s

    def test_bad_card_rejected(self):
        with pytest.raises(ValueError):
            parse_card("XA")
        with pytest.raises(ValueError):
            parse_card("H1")


class TestPoints:
    def test_seven_is_zero(self):
        assert card_points(parse_card("H7")) == 0

    def test_ace_is_eleven(self):
        assert card_points(parse_card("DA")) == 11

    def test_deck_totals_120(self):
        assert set_points(DECK) == 120

    def test_rank_values(self):
        assert card_points(parse_card("SJ")) == 2
        assert card_points(parse_card("SQ")) == 3
        assert card_points(parse_card("SK")) == 4
        assert card_points(parse_card("ST")) == 10


class TestTrumpSet:
    def test_grand_is_four_jacks(self):
        assert trump_set(GameType.grand()) == JACKS
        assert JACKS.bit_count() == 4

    def test_suit_is_eleven_cards(self):
        t = trump_set(GameType.of_suit(Suit.HEARTS))
        assert t.bit_count() == 11
        assert t == cardset_of("CJ", "SJ", "HJ", "DJ", "HA", "HT", "HK", "HQ", "H9", "H8", "H7")

    def test_null_is_empty(self):
        assert trump_set(GameType.null()) == 0

    @pytest.mark.parametrize("game", GAMES)
    def test_matches_oracle(self, game):
        assert trump_set(game) == cardset(oracles.card_index(c) for c in oracles.trumps_of(game))


class TestPlayable:
    def test_leader_unconstrained(self):
        hand = cardset_of("HA", "C7", "D9")
        assert playable(hand, TrickState(0), GameType.grand()) == hand

    def test_no_lead_suit_may_discard_or_trump(self):
        hand = cardset_of("HJ", "CA")
        trick = TrickState(1, ((1, parse_card("DA")),))
        assert playable(hand, trick, GameType.of_suit(Suit.HEARTS)) == hand

    def test_must_follow_plain_suit(self):
        hand = cardset_of("DT", "CA")
        trick = TrickState(1, ((1, parse_card("DA")),))
        assert playable(hand, trick, GameType.of_suit(Suit.HEARTS)) == cardset_of("DT")

    def test_jack_belongs_to_trump_not_suit(self):
        # Holding only the heart jack, a heart lead in a grand does not bind it.
        hand = cardset_of("HJ", "C8")
        trick = TrickState(0, ((0, parse_card("HA")),))
        assert playable(hand, trick, GameType.grand()) == hand
        # In a null game the jack is an ordinary heart.
        assert playable(hand, trick, GameType.null()) == cardset_of("HJ")

    def test_trump_lead_binds_jacks(self):
        hand = cardset_of("DJ", "S8")
        trick = TrickState(0, ((0, parse_card("HA")),))
        assert playable(hand, trick, GameType.of_suit(Suit.HEARTS)) == cardset_of("DJ")

    @pytest.mark.parametrize("game", GAMES)
    def test_matches_oracle_on_random_cases(self, game):
        rng = random.Random(17)
        deck = list(range(32))
        for _ in range(300):
            rng.shuffle(deck)
            hand_n = rng.randint(1, 10)
            hand = deck[:hand_n]
            n_table = rng.randint(0, 2)
            table = deck[hand_n:hand_n + n_table]
            leader = rng.randrange(3)
            trick = TrickState(leader)
            for c in table:
                trick = trick.add(trick.next_seat, c)
            got = playable(cardset(hand), trick, game)
            want = oracles.legal_moves([oracles.card_name(c) for c in hand],
                                       [oracles.card_name(c) for c in table], game)
            assert got == cardset(oracles.card_index(c) for c in want)

    @given(st.sets(st.integers(0, 31), min_size=1, max_size=10),
           st.integers(0, 31), st.sampled_from(GAMES))
    def test_playable_is_nonempty_subset(self, hand_cards, lead, game):
        hand = cardset(hand_cards)
        trick = TrickState(0, ((0, lead),)) if lead not in hand_cards else TrickState(0)
        got = playable(hand, trick, game)
        assert got != 0
        assert got & ~hand == 0


class TestTrickWinner:
    def test_trump_beats_lead_ace(self):
        trick = TrickState(2, ((2, parse_card("DA")), (0, parse_card("HA")), (1, parse_card("D7"))))
        assert trick_winner(trick, GameType.of_suit(Suit.HEARTS)) == 0

    def test_null_queen_beats_jack(self):
        trick = TrickState(0, ((0, parse_card("SJ")), (1, parse_card("SQ")), (2, parse_card("S7"))))
        assert trick_winner(trick, GameType.null()) == 1

    def test_plain_rank_order(self):
        trick = TrickState(1, ((1, parse_card("S7")), (2, parse_card("S8")), (0, parse_card("S9"))))
        assert trick_winner(trick, GameType.of_suit(Suit.DIAMONDS)) == 0

    def test_offsuit_never_wins(self):
        trick = TrickState(0, ((0, parse_card("D8")), (1, parse_card("CA")), (2, parse_card("ST"))))
        assert trick_winner(trick, GameType.grand()) == 0

    @pytest.mark.parametrize("game", GAMES)
    def test_matches_oracle_on_random_tricks(self, game):
        rng = random.Random(23)
        deck = list(range(32))
        for _ in range(500):
            rng.shuffle(deck)
            leader = rng.randrange(3)
            plays = deck[:3]
            trick = TrickState(leader)
            for c in plays:
                trick = trick.add(trick.next_seat, c)
            want_pos = oracles.trick_taker([oracles.card_name(c) for c in plays], game)
            assert trick_winner(trick, game) == (leader + want_pos) % 3

    def test_rotation_invariance(self):
        # Same three cards, same leader: winner does not depend on calling order.
        rng = random.Random(5)
        for game in GAMES:
            for _ in range(100):
                cards = rng.sample(range(32), 3)
                t = TrickState(1)
                for c in cards:
                    t = t.add(t.next_seat, c)
                w1 = trick_winner(t, game)
                w2 = trick_winner(TrickState(1, t.plays), game)
                assert w1 == w2


class TestGameValue:
    def test_suit_with_two_normal(self):
        # Hearts, holding CJ and SJ but not HJ: "with 2", value 10 * 3.
        hand = cardset_of("CJ", "SJ", "HA", "HT", "HK", "HQ", "H9", "H8", "H7", "SA", "D7", "D8")
        contract = Contract(GameType.of_suit(Suit.HEARTS))
        assert game_value(contract, hand, GameOutcome(won=True)) == 30

    def test_null_win_and_loss(self):
        contract = Contract(GameType.null())
        assert game_value(contract, 0, GameOutcome(won=True)) == 23
        assert game_value(contract, 0, GameOutcome(won=False)) == -46

    def test_grand_with_four_schneider(self):
        hand = cardset_of("CJ", "SJ", "HJ", "DJ", "CA", "CT", "SA", "ST", "HA", "HT", "DA", "DT")
        contract = Contract(GameType.grand())
        assert game_value(contract, hand, GameOutcome(won=True, schneider=True)) == 144

    def test_without_matadors(self):
        # No jacks at all in a diamond game: "without 4" at least.
        hand = cardset_of("DA", "DT", "DK", "DQ", "D9", "D8", "D7", "CA", "SA", "HA", "C7", "S7")
        contract = Contract(GameType.of_suit(Suit.DIAMONDS))
        assert game_value(contract, hand, GameOutcome(won=True)) == 9 * 5

    def test_schwarz_without_schneider_rejected(self):
        with pytest.raises(ValueError):
            GameOutcome(won=True, schneider=False, schwarz=True)

    def test_loss_doubles(self):
        hand = cardset_of("CJ", "C7", "C8", "C9", "CQ", "CK", "CT", "CA", "D7", "D8", "D9", "DQ")
        contract = Contract(GameType.of_suit(Suit.CLUBS))
        assert game_value(contract, hand, GameOutcome(won=False)) == -2 * 12 * 2

    def test_hand_and_announcements_add_levels(self):
        hand = cardset_of("CJ", "SJ", "HJ", "DJ", "CA", "CT", "CK", "CQ", "C9", "C8", "C7", "D7")
        base = Contract(GameType.of_suit(Suit.CLUBS))
        hand_game = Contract(GameType.of_suit(Suit.CLUBS), hand_flag=True)
        schn = Contract(GameType.of_suit(Suit.CLUBS), hand_flag=True,
                        announced=AnnouncedLevel.SCHNEIDER)
        win = GameOutcome(won=True)
        schn_win = GameOutcome(won=True, schneider=True)
        assert game_value(base, hand, win) == 12 * 12  # with 11 + 1
        assert game_value(hand_game, hand, win) == 12 * 13
        assert game_value(schn, hand, schn_win) == 12 * 15

    def test_matador_counting(self):
        g = GameType.of_suit(Suit.SPADES)
        assert matadors(g, cardset_of("CJ")) == 1
        assert matadors(g, cardset_of("CJ", "SJ", "HJ", "DJ", "SA")) == 5
        assert matadors(g, cardset_of("SJ", "HJ")) == 1  # without 1 (CJ missing)
        assert matadors(g, cardset_of("D7", "D8")) == 11  # without everything


class TestPartitions:
    @given(st.randoms(use_true_random=False))
    @settings(max_examples=30, deadline=None)
    def test_deal_partitions_deck(self, rng):
        deck = list(range(32))
        rng.shuffle(deck)
        hands = [cardset(deck[i * 10:(i + 1) * 10]) for i in range(3)]
        skat = cardset(deck[30:])
        assert hands[0] | hands[1] | hands[2] | skat == DECK
        assert sum(h.bit_count() for h in hands) + skat.bit_count() == 32

    def test_trick_points_sum_to_120_over_a_full_game(self):
        rng = random.Random(99)
        game = GameType.of_suit(Suit.CLUBS)
        deck = list(range(32))
        rng.shuffle(deck)
        hands = [set(deck[i * 10:(i + 1) * 10]) for i in range(3)]
        skat = deck[30:]
        total = sum(card_points(c) for c in skat)
        leader = 0
        for _ in range(10):
            trick = TrickState(leader)
            for _ in range(3):
                seat = trick.next_seat
                legal = playable(cardset(hands[seat]), trick, game)
                card = next(iter_cards(legal))
                hands[seat].discard(card)
                trick = trick.add(seat, card)
            total += trick.points
            leader = trick_winner(trick, game)
        assert total == 120
