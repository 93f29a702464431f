"""Per-seat belief state over card locations, kept as bitvector sets.

A view tracks, for every card, where it may still be: the owner's hand,
another player's hand (proven), the undifferentiated pool, one of the
"hand-or-skat" caches, or the skat itself.  Observing a play refines the
sets; a player failing to serve the led class relocates every candidate
card of that class away from their hand.  Views are immutable; every
update returns a new view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from fractions import Fraction
from typing import Iterator, Optional

from .cards import (
    CARD_POINTS,
    DECK,
    GameKind,
    GameType,
    Suit,
    TrickState,
    card_str,
    follow_set,
    iter_cards,
    plain_suit_set,
    set_points,
    set_str,
    trick_leader,
    trick_winner,
    trump_set,
)

ACES = sum(1 << (8 * s + 6) for s in range(4))


class InconsistentObservation(ValueError):
    """An observed move contradicts the tracked knowledge."""


@dataclass(frozen=True, slots=True)
class KnowledgeView:
    seat: int
    declarer: int
    game: GameType
    own: int
    played: int
    pool: int
    h: tuple[int, int, int]          # proven unplayed cards per seat
    or_skat: tuple[int, int, int]    # "on that hand or in the skat" caches
    skat_known: Optional[int]        # exact skat, when this seat may know it
    skat_forced: int                 # cards proven to lie in the (unknown) skat
    noskat: int                      # cards assumed not to be in the skat
    remaining: tuple[int, int, int]  # unplayed hand sizes
    aspts: int
    gspts: int
    conventions: bool = False

    @property
    def role(self) -> str:
        return "declarer" if self.seat == self.declarer else "opponent"

    @property
    def partner(self) -> int:
        """The other opponent (meaningful for opponent views)."""
        return next(i for i in range(3) if i != self.seat and i != self.declarer)

    @property
    def declarerorskat(self) -> int:
        return self.or_skat[self.declarer]

    @property
    def partnerorskat(self) -> int:
        return self.or_skat[self.partner]

    @property
    def skat_size_unknown(self) -> int:
        """How many skat slots are still unaccounted for in this view."""
        if self.skat_known is not None:
            return 0
        return 2 - self.skat_forced.bit_count()

    def candidates(self, other: int) -> int:
        """Every card that may still sit on `other`'s hand."""
        if other == self.seat:
            return self.own
        return self.h[other] | self.pool | self.or_skat[other]

    def capacity(self, other: int) -> int:
        """Unproven hand slots of `other`: cards they hold beyond h[other]."""
        return self.remaining[other] - self.h[other].bit_count()

    def located(self) -> int:
        return self.own | self.played | self.h[0] | self.h[1] | self.h[2] | (
            self.skat_known if self.skat_known is not None else self.skat_forced)


@dataclass(frozen=True, slots=True)
class World:
    """One complete placement of the unlocated cards."""

    hands: tuple[int, int, int]  # unplayed cards per seat
    skat: int


def init_view(
    seat: int,
    hand: int,
    game: GameType,
    declarer: int,
    skat_if_known: Optional[int] = None,
    noskat_heuristic: bool = True,
    conventions: bool = False,
) -> KnowledgeView:
    """Belief state right after game declaration, before the first card."""
    if hand.bit_count() != 10:
        raise ValueError(f"hand must hold 10 cards, got {hand.bit_count()}")
    if skat_if_known is not None:
        if seat != declarer:
            raise ValueError("only the declarer may know the skat")
        if skat_if_known.bit_count() != 2 or skat_if_known & hand:
            raise ValueError("skat must be 2 cards outside the hand")
    pool = DECK & ~hand
    if skat_if_known is not None:
        pool &= ~skat_if_known
    noskat = (trump_set(game) | ACES) if noskat_heuristic else 0
    return KnowledgeView(
        seat=seat,
        declarer=declarer,
        game=game,
        own=hand,
        played=0,
        pool=pool,
        h=(0, 0, 0),
        or_skat=(0, 0, 0),
        skat_known=skat_if_known,
        skat_forced=0,
        noskat=noskat,
        remaining=(10, 10, 10),
        aspts=set_points(skat_if_known) if skat_if_known is not None else 0,
        gspts=0,
        conventions=conventions,
    )


def _with_tuple(t: tuple[int, int, int], i: int, value: int) -> tuple[int, int, int]:
    out = list(t)
    out[i] = value
    return tuple(out)  # type: ignore[return-value]


def observe_play(view: KnowledgeView, actor: int, card: int, trick: TrickState,
                 game: Optional[GameType] = None) -> KnowledgeView:
    """Fold one observed play (trick state is *before* the card) into the view."""
    game = game or view.game
    if trick.next_seat != actor:
        raise ValueError(f"seat {actor} is not to move")
    bit = 1 << card

    if actor == view.seat:
        if not view.own & bit:
            raise InconsistentObservation(f"{card_str(card)} is not in our hand")
    elif not (view.candidates(actor) & bit):
        raise InconsistentObservation(
            f"{card_str(card)} cannot be on seat {actor}'s hand")

    h = view.h
    or_skat = view.or_skat
    pool = view.pool
    skat_forced = view.skat_forced

    if not trick.is_empty and actor != view.seat:
        lead = trick.lead_card
        assert lead is not None
        klass = follow_set(game, lead)
        if not bit & klass:
            if view.h[actor] & klass:
                raise InconsistentObservation(
                    f"seat {actor} renounced while proven to hold the led class")
            h, or_skat, pool, skat_forced = _renounce(
                view, actor, klass, h, or_skat, pool, skat_forced)
            if view.conventions and actor != view.declarer:
                h, or_skat, pool = _convention_refine(view, actor, card, trick,
                                                      h, or_skat, pool)

    # Move the card out of whatever set held it.
    own = view.own & ~bit
    pool &= ~bit
    h = tuple(x & ~bit for x in h)  # type: ignore[assignment]
    or_skat = tuple(x & ~bit for x in or_skat)  # type: ignore[assignment]
    played = view.played | bit
    noskat = view.noskat & ~bit
    remaining = _with_tuple(view.remaining, actor, view.remaining[actor] - 1)

    aspts, gspts = view.aspts, view.gspts
    done = trick.add(actor, card)
    if done.is_full:
        winner = trick_winner(done, game)
        if winner == view.declarer:
            aspts += done.points
        else:
            gspts += done.points
    if played.bit_count() == 30 and view.skat_known is None:
        # Game over: the two unplayed cards are the skat and score for the declarer.
        aspts += set_points(DECK & ~played)

    return replace(view, own=own, played=played, pool=pool, h=h, or_skat=or_skat,
                   skat_forced=skat_forced, noskat=noskat, remaining=remaining,
                   aspts=aspts, gspts=gspts)


def _renounce(view: KnowledgeView, actor: int, klass: int,
              h: tuple[int, int, int], or_skat: tuple[int, int, int],
              pool: int, skat_forced: int):
    """Actor holds nothing of `klass`: relocate all their candidate class cards."""
    other = next(i for i in range(3) if i != view.seat and i != actor)

    if view.skat_known is not None:
        # No skat uncertainty: pool cards of the class are on the other hand.
        moved = pool & klass
        new_h = h[other] | moved
        if new_h.bit_count() > view.remaining[other]:
            raise InconsistentObservation("renounce overfills the third hand")
        return _with_tuple(h, other, new_h), or_skat, pool & ~moved, skat_forced

    # Unknown skat: pool class cards are "other hand or skat"; cached class
    # cards of the actor must be in the skat.
    to_skat = or_skat[actor] & klass
    if to_skat & view.noskat:
        raise InconsistentObservation("skat-bound card was assumed outside the skat")
    skat_forced |= to_skat
    if skat_forced.bit_count() > 2:
        raise InconsistentObservation("more than two cards forced into the skat")
    or_skat = _with_tuple(or_skat, actor, or_skat[actor] & ~to_skat)

    cache = or_skat[other] | (pool & klass)
    pool &= ~klass
    # Cards assumed absent from the skat must then be on the other hand.
    promote = cache & view.noskat
    cache &= ~promote
    new_h = h[other] | promote
    if new_h.bit_count() > view.remaining[other]:
        raise InconsistentObservation("renounce overfills the third hand")
    if cache.bit_count() > (view.remaining[other] - new_h.bit_count()) + (
            2 - skat_forced.bit_count()):
        raise InconsistentObservation("hand-or-skat cache exceeds its capacity")
    return _with_tuple(h, other, new_h), _with_tuple(or_skat, other, cache), pool, skat_forced


def _convention_refine(view: KnowledgeView, actor: int, card: int, trick: TrickState,
                       h: tuple[int, int, int], or_skat: tuple[int, int, int], pool: int):
    """Optional inference from opponent discarding conventions.

    An opponent discarding into the partner's trick smears the highest
    spare card of the thrown suit; into the declarer's trick they duck the
    lowest.  Pool cards of that suit which contradict the convention are
    assumed off the actor's hand.  Being a heuristic, any capacity overflow
    silently cancels the inference instead of failing the observation.
    """
    if view.game.kind is GameKind.NULL or (1 << card) & trump_set(view.game):
        return h, or_skat, pool
    winning = trick_leader(trick.add(actor, card), view.game)
    if winning == actor:
        return h, or_skat, pool
    suit = plain_suit_set(view.game, Suit(card >> 3))
    value = CARD_POINTS[card]
    if winning == view.declarer:
        doubted = sum(1 << c for c in iter_cards(suit & pool) if CARD_POINTS[c] < value)
    else:
        doubted = sum(1 << c for c in iter_cards(suit & pool) if CARD_POINTS[c] > value)
    if not doubted:
        return h, or_skat, pool
    other = next(i for i in range(3) if i != view.seat and i != actor)
    if view.skat_known is not None:
        new_h = h[other] | doubted
        if new_h.bit_count() > view.remaining[other]:
            return h, or_skat, pool
        return _with_tuple(h, other, new_h), or_skat, pool & ~doubted
    cache = or_skat[other] | doubted
    cap = (view.remaining[other] - h[other].bit_count()) + view.skat_size_unknown
    if cache.bit_count() > cap:
        return h, or_skat, pool
    return h, _with_tuple(or_skat, other, cache), pool & ~doubted


def rebuild_view(
    seat: int,
    hand: int,
    game: GameType,
    declarer: int,
    skat_if_known: Optional[int],
    history: list[tuple[int, int]],
    first_leader: int = 0,
    noskat_heuristic: bool = False,
    conventions: bool = False,
) -> KnowledgeView:
    """Replay a move history into a fresh view (used to drop heuristics)."""
    view = init_view(seat, hand, game, declarer, skat_if_known,
                     noskat_heuristic=noskat_heuristic, conventions=conventions)
    trick = TrickState(first_leader)
    for actor, card in history:
        view = observe_play(view, actor, card, trick, game)
        trick = trick.add(actor, card)
        if trick.is_full:
            trick = TrickState(trick_winner(trick, game))
    return view


class ViewTracker:
    """Stateful wrapper: keeps one seat's view in sync with the move stream.

    Heuristic assumptions (noskat, conventions) can be contradicted by real
    play; when an observation turns inconsistent, the tracker rebuilds the
    view from its history with the heuristics dropped and retries, so rule
    knowledge survives while guesses are discarded.
    """

    def __init__(self, seat: int, hand: int, game: GameType, declarer: int,
                 skat_if_known: Optional[int] = None, first_leader: int = 0,
                 noskat_heuristic: bool = True, conventions: bool = False) -> None:
        self._init = (seat, hand, game, declarer, skat_if_known, first_leader)
        self.heuristics = (noskat_heuristic, conventions)
        self.view = init_view(seat, hand, game, declarer, skat_if_known,
                              noskat_heuristic=noskat_heuristic,
                              conventions=conventions)
        self.history: list[tuple[int, int]] = []

    def observe(self, actor: int, card: int, trick: TrickState) -> KnowledgeView:
        try:
            view = observe_play(self.view, actor, card, trick)
            if self.heuristics != (False, False) and count_worlds(view) == 0:
                raise InconsistentObservation("heuristics emptied the world set")
        except InconsistentObservation:
            if self.heuristics == (False, False):
                raise
            seat, hand, game, declarer, skat, leader = self._init
            self.heuristics = (False, False)
            rebuilt = rebuild_view(seat, hand, game, declarer, skat,
                                   self.history, first_leader=leader)
            view = observe_play(rebuilt, actor, card, trick)
        self.view = view
        self.history.append((actor, card))
        return self.view


# --- world enumeration ------------------------------------------------------


def _unknowns(view: KnowledgeView) -> tuple[list[int], dict[int, tuple[int, ...]], dict[int, int]]:
    """Unlocated cards, allowed locations per card, and open capacities.

    Locations are seats 0..2 plus 3 for the skat.
    """
    others = [i for i in range(3) if i != view.seat]
    need = {i: view.capacity(i) for i in others}
    need[3] = view.skat_size_unknown
    allowed: dict[int, tuple[int, ...]] = {}
    for c in iter_cards(view.pool):
        locs = list(others)
        if view.skat_known is None and not (view.noskat >> c) & 1:
            locs.append(3)
        allowed[c] = tuple(locs)
    for i in others:
        for c in iter_cards(view.or_skat[i]):
            if (view.noskat >> c) & 1:
                allowed[c] = (i,)
            else:
                allowed[c] = (i, 3)
    cards = sorted(allowed)
    return cards, allowed, need


def enumerate_worlds(view: KnowledgeView, cap: int = 1 << 30) -> list[World]:
    """All consistent completions, in deterministic lexicographic order."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    cards, allowed, need = _unknowns(view)
    if sum(need.values()) != len(cards):
        return []  # capacity deficit: inconsistent view

    worlds: list[World] = []
    assign: dict[int, list[int]] = {0: [], 1: [], 2: [], 3: []}

    def rec(i: int) -> bool:
        if len(worlds) >= cap:
            return False
        if i == len(cards):
            hands = [0, 0, 0]
            for s in range(3):
                hands[s] = view.h[s] | sum(1 << c for c in assign[s])
            hands[view.seat] = view.own
            skat = view.skat_known if view.skat_known is not None else (
                view.skat_forced | sum(1 << c for c in assign[3]))
            worlds.append(World(hands=tuple(hands), skat=skat))
            return len(worlds) < cap
        card = cards[i]
        for loc in allowed[card]:
            if need[loc] > 0:
                need[loc] -= 1
                assign[loc].append(card)
                more = rec(i + 1)
                assign[loc].pop()
                need[loc] += 1
                if not more:
                    return False
        return True

    rec(0)
    return worlds


def count_worlds(view: KnowledgeView) -> int:
    """Closed-form world count (no per-world materialization)."""
    weights = _placement_weights(view)
    return int(sum(w for w, *_ in weights))


def skat_candidates(view: KnowledgeView) -> list[int]:
    """Every 2-card set that may constitute the skat in some consistent world."""
    if view.skat_known is not None:
        return [view.skat_known]
    base = view.skat_forced
    need = 2 - base.bit_count()
    others = [i for i in range(3) if i != view.seat]
    eligible = view.pool
    for i in others:
        eligible |= view.or_skat[i]
    eligible &= ~view.noskat
    out = []
    for combo in combinations(iter_cards(eligible), need):
        skat = base | sum(1 << c for c in combo)
        needs = []
        for i in others:
            n = view.capacity(i) - (view.or_skat[i] & ~skat).bit_count()
            needs.append(n)
        if all(n >= 0 for n in needs) and sum(needs) == (view.pool & ~skat).bit_count():
            out.append(skat)
    return out


# --- probability conversion -------------------------------------------------


def _placement_weights(view: KnowledgeView):
    """Weight of every (skat draw from caches/pool) configuration.

    Yields tuples (count, i, j, k, rem, need_a_rem) where i/j are the cards
    the two or-skat caches contribute to the skat, k the skat cards taken
    from the unrestricted pool, rem the pool cards left for the hands and
    need_a_rem how many of those the lower-numbered hand takes.
    """
    others = sorted(i for i in range(3) if i != view.seat)
    a, b = others
    # Cache cards the skat cannot hold are effectively proven on the hand.
    na = view.capacity(a) - (view.or_skat[a] & view.noskat).bit_count()
    nb = view.capacity(b) - (view.or_skat[b] & view.noskat).bit_count()
    ns = view.skat_size_unknown
    x = (view.or_skat[a] & ~view.noskat).bit_count()
    y = (view.or_skat[b] & ~view.noskat).bit_count()
    pool_free = (view.pool & ~view.noskat).bit_count() if view.skat_known is None \
        else 0
    pool_bound = view.pool.bit_count() - pool_free
    out = []
    for i in range(0, min(x, ns) + 1):
        for j in range(0, min(y, ns - i) + 1):
            k = ns - i - j
            if k > pool_free:
                continue
            rem = pool_free - k + pool_bound
            need_a_rem = na - (x - i)
            need_b_rem = nb - (y - j)
            if need_a_rem < 0 or need_b_rem < 0 or need_a_rem + need_b_rem != rem:
                continue
            w = (math.comb(x, i) * math.comb(y, j) * math.comb(pool_free, k)
                 * math.comb(rem, need_a_rem))
            if w:
                out.append((w, i, j, k, rem, need_a_rem))
    return out


def to_probability_matrix(view: KnowledgeView) -> list[list[Fraction]]:
    """4x32 matrix of location probabilities: rows are seats 0..2 plus skat."""
    weights = _placement_weights(view)
    total = sum(w for w, *_ in weights)
    if total == 0:
        raise InconsistentObservation("no consistent world exists")

    others = sorted(i for i in range(3) if i != view.seat)
    a, b = others
    x = (view.or_skat[a] & ~view.noskat).bit_count()
    y = (view.or_skat[b] & ~view.noskat).bit_count()

    p = [[Fraction(0) for _ in range(32)] for _ in range(4)]
    for c in iter_cards(view.own):
        p[view.seat][c] = Fraction(1)
    for s in range(3):
        for c in iter_cards(view.h[s]):
            p[s][c] = Fraction(1)
    for s in (a, b):
        for c in iter_cards(view.or_skat[s] & view.noskat):
            p[s][c] = Fraction(1)
    skat_set = view.skat_known if view.skat_known is not None else view.skat_forced
    for c in iter_cards(skat_set):
        p[3][c] = Fraction(1)

    pa = pb = ps = Fraction(0)          # pool card that may sit in the skat
    pa_b = pb_b = Fraction(0)           # noskat-bound pool card
    xa = xs = Fraction(0)               # or_skat[a] card
    ya = ys = Fraction(0)               # or_skat[b] card
    pool_free_n = (view.pool & ~view.noskat).bit_count() if view.skat_known is None \
        else view.pool.bit_count()
    for w, i, j, k, rem, need_a_rem in weights:
        f = Fraction(w, total)
        if pool_free_n:
            in_skat = Fraction(k, pool_free_n)
            to_a = (1 - in_skat) * Fraction(need_a_rem, rem) if rem else Fraction(0)
            pa += f * to_a
            ps += f * in_skat
            pb += f * (1 - in_skat - to_a)
        if rem:
            pa_b += f * Fraction(need_a_rem, rem)
            pb_b += f * Fraction(rem - need_a_rem, rem)
        if x:
            xs += f * Fraction(i, x)
            xa += f * Fraction(x - i, x)
        if y:
            ys += f * Fraction(j, y)
            ya += f * Fraction(y - j, y)

    free = view.pool & ~view.noskat if view.skat_known is None else view.pool
    for c in iter_cards(free):
        p[a][c], p[b][c], p[3][c] = pa, pb, ps
    for c in iter_cards(view.pool & ~free):
        p[a][c], p[b][c] = pa_b, pb_b
    for c in iter_cards(view.or_skat[a] & ~view.noskat):
        p[a][c], p[3][c] = xa, xs
    for c in iter_cards(view.or_skat[b] & ~view.noskat):
        p[b][c], p[3][c] = ya, ys
    return p


def view_to_json(view: KnowledgeView) -> dict:
    from .cards import set_to_json

    return {
        "seat": view.seat,
        "declarer": view.declarer,
        "game": view.game.letter,
        "own": set_to_json(view.own),
        "played": set_to_json(view.played),
        "pool": set_to_json(view.pool),
        "h": [set_to_json(x) for x in view.h],
        "or_skat": [set_to_json(x) for x in view.or_skat],
        "skat_known": None if view.skat_known is None else set_to_json(view.skat_known),
        "skat_forced": set_to_json(view.skat_forced),
        "noskat": set_to_json(view.noskat),
        "remaining": list(view.remaining),
        "aspts": view.aspts,
        "gspts": view.gspts,
    }


def view_from_json(data: dict) -> KnowledgeView:
    from .cards import set_from_json

    return KnowledgeView(
        seat=data["seat"],
        declarer=data["declarer"],
        game=GameType.parse(data["game"]),
        own=set_from_json(data["own"]),
        played=set_from_json(data.get("played", [])),
        pool=set_from_json(data["pool"]),
        h=tuple(set_from_json(x) for x in data.get("h", [[], [], []])),
        or_skat=tuple(set_from_json(x) for x in data.get("or_skat", [[], [], []])),
        skat_known=None if data.get("skat_known") is None
        else set_from_json(data["skat_known"]),
        skat_forced=set_from_json(data.get("skat_forced", [])),
        noskat=set_from_json(data.get("noskat", [])),
        remaining=tuple(data["remaining"]),
        aspts=data.get("aspts", 0),
        gspts=data.get("gspts", 0),
    )


def dump(view: KnowledgeView) -> str:
    """Listing-style debug dump: one named set per line, ascending bit order."""
    hands = [view.own if s == view.seat else view.h[s] for s in range(3)]
    skat = view.skat_known if view.skat_known is not None else view.skat_forced
    lines = [f"P{s} = {set_str(hands[s])}" for s in range(3)]
    lines.append(f"skat = {set_str(skat)}")
    lines.append(f"pool = {set_str(view.pool)}")
    if view.seat != view.declarer:
        lines.append(f"declarerorskat = {set_str(view.declarerorskat)}")
        lines.append(f"partnerorskat = {set_str(view.partnerorskat)}")
    lines.append(f"noskat = {set_str(view.noskat)}")
    return "\n".join(lines) + "\n"


def check_invariants(view: KnowledgeView) -> None:
    """Raise if the disjointness or capacity invariants are broken."""
    sets = [view.own, view.played, view.pool, *view.h, *view.or_skat]
    if view.skat_known is not None:
        sets.append(view.skat_known)
    else:
        sets.append(view.skat_forced)
    union = 0
    count = 0
    for s in sets:
        union |= s
        count += s.bit_count()
    if union != DECK or count != 32:
        raise AssertionError("sets do not partition the deck")
    for i in range(3):
        if i == view.seat:
            continue
        if view.h[i].bit_count() > view.remaining[i]:
            raise AssertionError(f"h[{i}] exceeds remaining[{i}]")
        cap = view.capacity(i) + view.skat_size_unknown
        if view.or_skat[i].bit_count() > cap:
            raise AssertionError(f"or_skat[{i}] exceeds capacity")
    if view.skat_known is not None and view.noskat & view.skat_known:
        raise AssertionError("noskat intersects the known skat")
