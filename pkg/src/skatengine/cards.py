"""Core Skat rules: cards, bitset encoding, legality, tricks, and game valuation.

Card sets are plain ints used as 32-bit vectors.  The bit layout is
suit-major with the jack on top of each suit byte:

    bit = 8 * suit + rank
    suits: diamonds=0, hearts=1, spades=2, clubs=3
    ranks: 7=0, 8=1, 9=2, Q=3, K=4, T=5, A=6, J=7

Each suit occupies one contiguous byte, so the trump mask of a suit game
is that byte OR-ed with the four jack bits, and every follow-suit test is
a single AND.  The rank order below the jack already matches the trick
order of a trump game (7 < 8 < 9 < Q < K < T < A).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterator, Optional


class Suit(IntEnum):
    DIAMONDS = 0
    HEARTS = 1
    SPADES = 2
    CLUBS = 3

    @property
    def letter(self) -> str:
        return "DHSC"[self.value]


class Rank(IntEnum):
    SEVEN = 0
    EIGHT = 1
    NINE = 2
    QUEEN = 3
    KING = 4
    TEN = 5
    ACE = 6
    JACK = 7

    @property
    def letter(self) -> str:
        return "789QKTAJ"[self.value]


_RANK_BY_LETTER = {r.letter: r for r in Rank}
_SUIT_BY_LETTER = {s.letter: s for s in Suit}

# Point value per rank ordinal (7,8,9,Q,K,T,A,J).
_RANK_POINTS = (0, 0, 0, 3, 4, 10, 11, 2)

DECK: int = 0xFFFFFFFF
JACKS: int = sum(1 << (8 * s + Rank.JACK) for s in range(4))

CARD_POINTS: tuple[int, ...] = tuple(_RANK_POINTS[i % 8] for i in range(32))
TOTAL_POINTS: int = sum(CARD_POINTS)  # 120


@dataclass(frozen=True, slots=True)
class Card:
    suit: Suit
    rank: Rank

    @property
    def index(self) -> int:
        return 8 * self.suit + self.rank

    @property
    def bit(self) -> int:
        return 1 << self.index

    @property
    def points(self) -> int:
        return _RANK_POINTS[self.rank]

    @classmethod
    def of(cls, index: int) -> "Card":
        if not 0 <= index < 32:
            raise ValueError(f"card index out of range: {index}")
        return cls(Suit(index >> 3), Rank(index & 7))

    def __str__(self) -> str:
        return self.suit.letter + self.rank.letter


def parse_card(text: str) -> int:
    """Parse the two-character form (suit then rank, e.g. "HA") to a bit index."""
    if len(text) != 2 or text[0] not in _SUIT_BY_LETTER or text[1] not in _RANK_BY_LETTER:
        raise ValueError(f"bad card {text!r}")
    return 8 * _SUIT_BY_LETTER[text[0]] + _RANK_BY_LETTER[text[1]]


def card_str(index: int) -> str:
    return "DHSC"[index >> 3] + "789QKTAJ"[index & 7]


def card_points(index: int) -> int:
    return CARD_POINTS[index]


def cardset(cards: "Iterator[int] | list[int] | tuple[int, ...]") -> int:
    s = 0
    for c in cards:
        s |= 1 << c
    return s


def cardset_of(*texts: str) -> int:
    return cardset(parse_card(t) for t in texts)


def iter_cards(cardset_: int) -> Iterator[int]:
    """Yield card indices in ascending bit order."""
    s = cardset_
    while s:
        low = s & -s
        yield low.bit_length() - 1
        s ^= low


def set_points(cardset_: int) -> int:
    return sum(CARD_POINTS[c] for c in iter_cards(cardset_))


def set_str(cardset_: int) -> str:
    return "{" + ",".join(card_str(c) for c in iter_cards(cardset_)) + "}"


def set_to_json(cardset_: int) -> list[str]:
    return [card_str(c) for c in iter_cards(cardset_)]


def set_from_json(items: list[str]) -> int:
    return cardset(parse_card(t) for t in items)


class GameKind(Enum):
    GRAND = "grand"
    SUIT = "suit"
    NULL = "null"


@dataclass(frozen=True, slots=True)
class GameType:
    kind: GameKind
    suit: Optional[Suit] = None

    def __post_init__(self) -> None:
        if self.kind is GameKind.SUIT and self.suit is None:
            raise ValueError("suit game needs a trump suit")
        if self.kind is not GameKind.SUIT and self.suit is not None:
            raise ValueError(f"{self.kind.value} game carries no trump suit")

    @classmethod
    def grand(cls) -> "GameType":
        return cls(GameKind.GRAND)

    @classmethod
    def of_suit(cls, suit: Suit) -> "GameType":
        return cls(GameKind.SUIT, suit)

    @classmethod
    def null(cls) -> "GameType":
        return cls(GameKind.NULL)

    @classmethod
    def parse(cls, text: str) -> "GameType":
        if text == "G":
            return cls.grand()
        if text == "N":
            return cls.null()
        if text in _SUIT_BY_LETTER:
            return cls.of_suit(_SUIT_BY_LETTER[text])
        raise ValueError(f"bad game type {text!r}")

    @property
    def letter(self) -> str:
        if self.kind is GameKind.GRAND:
            return "G"
        if self.kind is GameKind.NULL:
            return "N"
        assert self.suit is not None
        return self.suit.letter

    def __str__(self) -> str:
        return self.letter


def trump_set(game: GameType) -> int:
    if game.kind is GameKind.GRAND:
        return JACKS
    if game.kind is GameKind.NULL:
        return 0
    assert game.suit is not None
    return JACKS | (0xFF << (8 * game.suit))


def plain_suit_set(game: GameType, suit: Suit) -> int:
    """Cards that count as `suit` for following purposes (no jacks in trump games)."""
    if game.kind is GameKind.NULL:
        return 0xFF << (8 * suit)
    return 0x7F << (8 * suit)


def follow_set(game: GameType, lead_card: int) -> int:
    """The class of cards that must be served on the given lead."""
    trump = trump_set(game)
    if trump & (1 << lead_card):
        return trump
    return plain_suit_set(game, Suit(lead_card >> 3))


@dataclass(frozen=True, slots=True)
class TrickState:
    leader: int
    plays: tuple[tuple[int, int], ...] = ()  # (seat, card index) in play order

    def __post_init__(self) -> None:
        if not 0 <= self.leader <= 2:
            raise ValueError("leader must be a seat 0..2")
        if len(self.plays) > 3:
            raise ValueError("at most 3 cards per trick")
        for pos, (seat, _) in enumerate(self.plays):
            if seat != (self.leader + pos) % 3:
                raise ValueError("plays must rotate from the leader")

    @property
    def is_empty(self) -> bool:
        return not self.plays

    @property
    def is_full(self) -> bool:
        return len(self.plays) == 3

    @property
    def lead_card(self) -> Optional[int]:
        return self.plays[0][1] if self.plays else None

    @property
    def next_seat(self) -> int:
        return (self.leader + len(self.plays)) % 3

    @property
    def cards(self) -> int:
        return cardset(card for _, card in self.plays)

    @property
    def points(self) -> int:
        return sum(CARD_POINTS[card] for _, card in self.plays)

    def add(self, seat: int, card: int) -> "TrickState":
        return TrickState(self.leader, self.plays + ((seat, card),))


def playable(hand: int, trick: TrickState, game: GameType) -> int:
    """Subset of `hand` that may legally be played into `trick`."""
    if trick.is_empty:
        return hand
    lead = trick.lead_card
    assert lead is not None
    holding = hand & follow_set(game, lead)
    return holding if holding else hand


# Power tables, one per game class.  Larger beats smaller; 0 means the card
# cannot win the trick unless it is of the led class.
_TRUMP_RANK = {Rank.SEVEN: 1, Rank.EIGHT: 2, Rank.NINE: 3, Rank.QUEEN: 4,
               Rank.KING: 5, Rank.TEN: 6, Rank.ACE: 7}
_NULL_RANK = {Rank.SEVEN: 1, Rank.EIGHT: 2, Rank.NINE: 3, Rank.TEN: 4,
              Rank.JACK: 5, Rank.QUEEN: 6, Rank.KING: 7, Rank.ACE: 8}


def _power(card: int, game: GameType, lead: int) -> int:
    trump = trump_set(game)
    bit = 1 << card
    suit, rank = Suit(card >> 3), Rank(card & 7)
    if bit & trump:
        if rank is Rank.JACK:
            return 100 + 8 + suit  # CJ > SJ > HJ > DJ above all plain trumps
        return 100 + _TRUMP_RANK[rank]
    klass = follow_set(game, lead)
    if bit & klass:
        return _NULL_RANK[rank] if game.kind is GameKind.NULL else _TRUMP_RANK[rank]
    return 0


def trick_leader(trick: TrickState, game: GameType) -> int:
    """Seat currently winning a (possibly partial) trick."""
    if trick.is_empty:
        raise ValueError("no cards on the table")
    lead = trick.plays[0][1]
    best_seat, best_power = trick.plays[0][0], _power(lead, game, lead)
    for seat, card in trick.plays[1:]:
        p = _power(card, game, lead)
        if p > best_power:
            best_seat, best_power = seat, p
    return best_seat


def trick_winner(trick: TrickState, game: GameType) -> int:
    """Seat that takes a completed trick."""
    if not trick.is_full:
        raise ValueError("trick is not complete")
    return trick_leader(trick, game)


# --- game valuation -------------------------------------------------------

SUIT_BASE = {Suit.DIAMONDS: 9, Suit.HEARTS: 10, Suit.SPADES: 11, Suit.CLUBS: 12}
GRAND_BASE = 24
NULL_VALUES = {(False, False): 23, (True, False): 35, (False, True): 46, (True, True): 59}


class AnnouncedLevel(Enum):
    NORMAL = 60
    SCHNEIDER = 89
    SCHWARZ = 119


@dataclass(frozen=True, slots=True)
class Contract:
    game: GameType
    hand_flag: bool = False
    ouvert_flag: bool = False
    announced: AnnouncedLevel = AnnouncedLevel.NORMAL

    @property
    def limit(self) -> int:
        """Declarer point threshold; the declarer wins iff points > limit."""
        return self.announced.value


@dataclass(frozen=True, slots=True)
class GameOutcome:
    won: bool
    schneider: bool = False  # losing side held to <= 30 points
    schwarz: bool = False    # losing side took no trick

    def __post_init__(self) -> None:
        if self.schwarz and not self.schneider:
            raise ValueError("schwarz implies schneider")


def matadors(game: GameType, declarer_cards: int) -> int:
    """Length of the unbroken top-trump run held ("with") or missing ("without")."""
    if game.kind is GameKind.NULL:
        return 0
    tops = [8 * s + Rank.JACK for s in (Suit.CLUBS, Suit.SPADES, Suit.HEARTS, Suit.DIAMONDS)]
    if game.kind is GameKind.SUIT:
        assert game.suit is not None
        for rank in (Rank.ACE, Rank.TEN, Rank.KING, Rank.QUEEN, Rank.NINE, Rank.EIGHT, Rank.SEVEN):
            tops.append(8 * game.suit + rank)
    has_top = bool(declarer_cards & (1 << tops[0]))
    n = 0
    for c in tops:
        if bool(declarer_cards & (1 << c)) == has_top:
            n += 1
        else:
            break
    return n


def base_value(game: GameType) -> int:
    if game.kind is GameKind.GRAND:
        return GRAND_BASE
    assert game.suit is not None
    return SUIT_BASE[game.suit]


def game_value(contract: Contract, declarer_hand_plus_skat: int, outcome: GameOutcome) -> int:
    """Signed tournament value: +V on a win, -2V on a loss."""
    game = contract.game
    if game.kind is GameKind.NULL:
        value = NULL_VALUES[(contract.hand_flag, contract.ouvert_flag)]
    else:
        levels = matadors(game, declarer_hand_plus_skat) + 1
        if contract.hand_flag:
            levels += 1
        if outcome.schneider:
            levels += 1
        if outcome.schwarz:
            levels += 1
        if contract.announced in (AnnouncedLevel.SCHNEIDER, AnnouncedLevel.SCHWARZ):
            levels += 1
        if contract.announced is AnnouncedLevel.SCHWARZ:
            levels += 1
        if contract.ouvert_flag:
            levels += 1
        value = base_value(game) * levels
    return value if outcome.won else -2 * value
