"""Exact open-card solver for trump and null games.

The core is a boolean decision procedure: can the declarer still reach a
given point threshold with every hand visible.  An outer binary search
turns it into the exact game value.  Transposition entries store proven
bounds on the declarer's future points so all threshold probes of one
position share work.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from .cards import (
    CARD_POINTS,
    DECK,
    GameKind,
    GameType,
    Rank,
    TrickState,
    follow_set,
    iter_cards,
    playable,
    set_points,
    trick_winner,
    trump_set,
)


class SearchTimeout(Exception):
    """Raised when a solve runs past its deadline."""


@dataclass(frozen=True, slots=True)
class SearchPosition:
    hands: tuple[int, int, int]
    table: TrickState
    played: int
    to_move: int
    game: GameType
    declarer: int
    aspts: int = 0          # declarer trick points so far, excluding the skat
    gspts: int = 0
    skat: int = 0           # skat cards, credited to the declarer

    @classmethod
    def initial(cls, hands: tuple[int, int, int], skat: int, game: GameType,
                declarer: int, leader: int = 0) -> "SearchPosition":
        return cls(hands=hands, table=TrickState(leader), played=0,
                   to_move=leader, game=game, declarer=declarer, skat=skat)

    @property
    def remaining(self) -> int:
        return self.hands[0] | self.hands[1] | self.hands[2] | self.table.cards

    def validate(self) -> None:
        sets = [*self.hands, self.table.cards, self.played, self.skat]
        union = 0
        total = 0
        for s in sets:
            union |= s
            total += s.bit_count()
        if total != union.bit_count():
            raise ValueError("hands, table, played and skat overlap")
        if union != DECK:
            raise ValueError("position does not cover the deck")
        if self.to_move != self.table.next_seat:
            raise ValueError("to_move does not match the trick state")
        if self.aspts + self.gspts + set_points(self.remaining) + set_points(self.skat) != 120:
            raise ValueError("point accounting does not sum to 120")
        counts = sorted(self.hands[s].bit_count() + sum(
            1 for seat, _ in self.table.plays if seat == s) for s in range(3))
        if counts[-1] - counts[0] > 1 or (self.table.is_empty and counts[0] != counts[-1]):
            raise ValueError("hand sizes out of balance")


class _Tables:
    """Per-game move tables: follow masks, trick powers, class orders."""

    __slots__ = ("game", "trump", "follow", "power_trump", "power_plain", "class_orders")

    def __init__(self, game: GameType) -> None:
        self.game = game
        self.trump = trump_set(game)
        self.follow = [follow_set(game, c) for c in range(32)]
        self.power_trump = [0] * 32
        self.power_plain = [0] * 32
        null_rank = {Rank.SEVEN: 1, Rank.EIGHT: 2, Rank.NINE: 3, Rank.TEN: 4,
                     Rank.JACK: 5, Rank.QUEEN: 6, Rank.KING: 7, Rank.ACE: 8}
        trump_rank = {Rank.SEVEN: 1, Rank.EIGHT: 2, Rank.NINE: 3, Rank.QUEEN: 4,
                      Rank.KING: 5, Rank.TEN: 6, Rank.ACE: 7}
        for c in range(32):
            bit = 1 << c
            rank = Rank(c & 7)
            if bit & self.trump:
                self.power_trump[c] = 100 + (8 + (c >> 3) if rank is Rank.JACK
                                             else trump_rank[rank])
            elif game.kind is GameKind.NULL:
                self.power_plain[c] = null_rank[rank]
            elif rank is not Rank.JACK:
                self.power_plain[c] = trump_rank[rank]
        # Card classes in descending trick power, used for equivalence runs.
        self.class_orders: list[list[int]] = []
        if self.trump:
            self.class_orders.append(sorted(iter_cards(self.trump),
                                            key=lambda c: -self.power_trump[c]))
        for s in range(4):
            mask = (0xFF << (8 * s)) & ~self.trump
            if mask:
                self.class_orders.append(sorted(iter_cards(mask),
                                                key=lambda c: -self.power_plain[c]))


_TABLES: dict[tuple, _Tables] = {}


def tables_for(game: GameType) -> _Tables:
    key = (game.kind, game.suit)
    if key not in _TABLES:
        _TABLES[key] = _Tables(game)
    return _TABLES[key]


class OpenSolver:
    """One solver instance per position stream; holds a private table.

    `pruning`/`use_tt` exist so the unpruned solver can serve as its own
    reference in equivalence tests.
    """

    def __init__(self, game: GameType, declarer: int, *, pruning: bool = True,
                 use_tt: bool = True, deadline: Optional[float] = None) -> None:
        self.tables = tables_for(game)
        self.game = game
        self.declarer = declarer
        self.pruning = pruning
        self.use_tt = use_tt
        self.deadline = deadline
        self.tt: dict[int, tuple[int, int]] = {}
        self.null_tt: dict[int, bool] = {}
        self.nodes = 0

    # -- trump-game decision procedure ------------------------------------

    def decide(self, pos: SearchPosition, limit: int) -> bool:
        """True iff the declarer can force final points > limit."""
        if self.game.kind is GameKind.NULL:
            raise ValueError("point search does not apply to null games")
        h = pos.hands
        tcards = [c for _, c in pos.table.plays]
        needed = limit + 1 - pos.aspts - set_points(pos.skat)
        rem = set_points(h[0] | h[1] | h[2] | pos.table.cards)
        return self._search(h[0], h[1], h[2], pos.table.leader,
                            tcards[0] if len(tcards) > 0 else -1,
                            tcards[1] if len(tcards) > 1 else -1,
                            len(tcards), pos.to_move, needed, rem)

    def value(self, pos: SearchPosition) -> int:
        """Exact declarer point total under optimal play, in [0, 120]."""
        base = pos.aspts + set_points(pos.skat)
        rem = set_points(pos.remaining)
        lo, hi = 0, rem
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.decide_future(pos, mid):
                lo = mid
            else:
                hi = mid - 1
        return base + lo

    def decide_future(self, pos: SearchPosition, future: int) -> bool:
        """True iff the declarer can still collect >= future trick points."""
        h = pos.hands
        tcards = [c for _, c in pos.table.plays]
        rem = set_points(h[0] | h[1] | h[2] | pos.table.cards)
        return self._search(h[0], h[1], h[2], pos.table.leader,
                            tcards[0] if len(tcards) > 0 else -1,
                            tcards[1] if len(tcards) > 1 else -1,
                            len(tcards), pos.to_move, future, rem)

    def best_card(self, pos: SearchPosition) -> tuple[int, int]:
        """(card, value): the optimal move for the side to move.

        Ties break toward the lowest bit index.  The declarer maximizes the
        value, the opponents minimize it.
        """
        hand = pos.hands[pos.to_move]
        legal = playable(hand, pos.table, pos.game)
        if self.game.kind is GameKind.NULL:
            raise ValueError("use null_best_card for null games")
        best_card, best_value = -1, None
        maximize = pos.to_move == self.declarer
        for c in iter_cards(legal):
            child = apply_move(pos, c)
            v = self.value(child)
            if best_value is None or (v > best_value if maximize else v < best_value):
                best_card, best_value = c, v
        assert best_value is not None, "no playable card"
        return best_card, best_value

    def _search(self, h0: int, h1: int, h2: int, leader: int, tc0: int, tc1: int,
                n: int, to_move: int, needed: int, rem: int) -> bool:
        if needed <= 0:
            return True
        if needed > rem:
            return False
        self.nodes += 1
        if self.deadline is not None and not self.nodes % 1024 and \
                time.monotonic() > self.deadline:
            raise SearchTimeout
        key = ((((h0 << 32 | h1) << 32 | h2) << 20)
               | (leader << 18) | (n << 16) | ((tc0 + 1) << 10) | ((tc1 + 1) << 4)
               | to_move)
        if self.use_tt:
            entry = self.tt.get(key)
            if entry is not None:
                lo, hi = entry
                if needed <= lo:
                    return True
                if needed > hi:
                    return False
        hand = h0 if to_move == 0 else h1 if to_move == 1 else h2
        if n == 0:
            legal = hand
        else:
            serving = self.tables.follow[tc0] & hand
            legal = serving if serving else hand
        alive = h0 | h1 | h2
        if n > 0:
            alive |= 1 << tc0
        if n > 1:
            alive |= 1 << tc1
        cand = self._reduce(legal, alive) if self.pruning else legal

        declarer_node = to_move == self.declarer
        result = not declarer_node
        if cand & (cand - 1):
            moves = self._ordered(cand, alive & ~hand, n, tc0, tc1,
                                  declarer_node, leader)
        else:
            moves = (cand.bit_length() - 1,)
        for c in moves:
            bit = 1 << c
            g0, g1, g2 = h0, h1, h2
            if to_move == 0:
                g0 = hand & ~bit
            elif to_move == 1:
                g1 = hand & ~bit
            else:
                g2 = hand & ~bit
            if n == 2:
                winner, pts = self._resolve(leader, tc0, tc1, c)
                child_needed = needed - pts if winner == self.declarer else needed
                r = self._search(g0, g1, g2, winner, -1, -1, 0,
                                 winner, child_needed, rem - pts)
            elif n == 1:
                r = self._search(g0, g1, g2, leader, tc0, c, 2,
                                 (to_move + 1) % 3, needed, rem)
            else:
                r = self._search(g0, g1, g2, leader, c, -1, 1,
                                 (to_move + 1) % 3, needed, rem)
            if declarer_node and r:
                result = True
                break
            if not declarer_node and not r:
                result = False
                break
        if self.use_tt:
            entry = self.tt.get(key)
            lo, hi = entry if entry is not None else (-1, 121)
            if result:
                lo = max(lo, needed)
            else:
                hi = min(hi, needed - 1)
            self.tt[key] = (lo, hi)
        return result

    def _reduce(self, legal: int, alive: int) -> int:
        """Drop equivalent cards: within a run of own cards separated only by
        dead cards, equal-point neighbours are interchangeable; keep the
        weakest of each such group."""
        out = 0
        for order in self.tables.class_orders:
            prev_bit = 0
            prev_pts = -1
            for c in order:
                bit = 1 << c
                if bit & legal:
                    pts = CARD_POINTS[c]
                    if prev_bit and prev_pts == pts:
                        out &= ~prev_bit
                    out |= bit
                    prev_bit, prev_pts = bit, pts
                elif bit & alive:
                    prev_bit, prev_pts = 0, -1
        return out

    def _resolve(self, leader: int, tc0: int, tc1: int, tc2: int) -> tuple[int, int]:
        """Winner seat and point total of a completed trick."""
        pt = self.tables.power_trump
        pp = self.tables.power_plain
        fmask = self.tables.follow[tc0]
        best_pos, best_pow = 0, (pt[tc0] or pp[tc0])
        for i, cc in enumerate((tc1, tc2), start=1):
            p = pt[cc] or (pp[cc] if (1 << cc) & fmask else 0)
            if p > best_pow:
                best_pos, best_pow = i, p
        return (leader + best_pos) % 3, (CARD_POINTS[tc0] + CARD_POINTS[tc1]
                                         + CARD_POINTS[tc2])

    def _ordered(self, cand: int, others: int, n: int, tc0: int, tc1: int,
                 declarer_node: bool, leader: int) -> list[int]:
        """Cutoff-friendly move order for the side to move."""
        pt = self.tables.power_trump
        pp = self.tables.power_plain
        if n == 2:
            # Outcome is decided per move: winning cheaply-fat tricks first.
            def key(c: int) -> tuple:
                winner, pts = self._resolve(leader, tc0, tc1, c)
                wins = (winner == self.declarer) == declarer_node
                return (not wins, -pts if wins else CARD_POINTS[c], c)
            return sorted(iter_cards(cand), key=key)
        # Earlier in the trick: masters first, then strength.
        maxpow = {}
        for order in self.tables.class_orders:
            mp = 0
            for c in order:
                if (1 << c) & others:
                    mp = pt[c] or pp[c]
                    break
            for c in order:
                maxpow[c] = mp

        def lead_key(c: int) -> tuple:
            p = pt[c] or pp[c]
            return (p <= maxpow.get(c, 0), -p, c)
        return sorted(iter_cards(cand), key=lead_key)

    # -- null games --------------------------------------------------------

    def null_safe(self, pos: SearchPosition) -> bool:
        """True iff the declarer avoids every remaining trick."""
        if self.game.kind is not GameKind.NULL:
            raise ValueError("null search needs a null game")
        tcards = [c for _, c in pos.table.plays]
        return self._null(pos.hands[0], pos.hands[1], pos.hands[2],
                          pos.table.leader,
                          tcards[0] if len(tcards) > 0 else -1,
                          tcards[1] if len(tcards) > 1 else -1,
                          len(tcards), pos.to_move)

    def null_best_card(self, pos: SearchPosition) -> tuple[int, bool]:
        """(card, outcome) for the side to move in a null game.

        Outcome is whether the declarer still makes the null after the card.
        The declarer prefers safe cards, opponents unsafe ones; ties break toward
        the lowest bit index.
        """
        legal = playable(pos.hands[pos.to_move], pos.table, pos.game)
        want = pos.to_move == pos.declarer
        fallback = -1
        for c in iter_cards(legal):
            outcome = self.null_safe(apply_move(pos, c))
            if outcome == want:
                return c, outcome
            if fallback < 0:
                fallback = c
        return fallback, not want

    def _null(self, h0: int, h1: int, h2: int, leader: int, tc0: int, tc1: int,
              n: int, to_move: int) -> bool:
        if not h0 and not h1 and not h2 and n == 0:
            return True
        self.nodes += 1
        if self.deadline is not None and not self.nodes % 1024 and \
                time.monotonic() > self.deadline:
            raise SearchTimeout
        key = ((((h0 << 32 | h1) << 32 | h2) << 20)
               | (leader << 18) | (n << 16) | ((tc0 + 1) << 10) | ((tc1 + 1) << 4)
               | to_move)
        if self.use_tt:
            cached = self.null_tt.get(key)
            if cached is not None:
                return cached
        hand = h0 if to_move == 0 else h1 if to_move == 1 else h2
        if n == 0:
            legal = hand
        else:
            serving = self.tables.follow[tc0] & hand
            legal = serving if serving else hand
        alive = h0 | h1 | h2
        if n > 0:
            alive |= 1 << tc0
        if n > 1:
            alive |= 1 << tc1
        cand = self._reduce(legal, alive) if self.pruning else legal

        declarer_node = to_move == self.declarer
        result = not declarer_node
        pp = self.tables.power_plain
        for c in self._null_ordered(cand, n, tc0, tc1, declarer_node, leader):
            bit = 1 << c
            g0, g1, g2 = h0, h1, h2
            if to_move == 0:
                g0 = hand & ~bit
            elif to_move == 1:
                g1 = hand & ~bit
            else:
                g2 = hand & ~bit
            if n == 2:
                fmask = self.tables.follow[tc0]
                best_pos, best_pow = 0, pp[tc0]
                for i, cc in enumerate((tc1, c), start=1):
                    p = pp[cc] if (1 << cc) & fmask else 0
                    if p > best_pow:
                        best_pos, best_pow = i, p
                winner = (leader + best_pos) % 3
                if winner == self.declarer:
                    r = False
                else:
                    r = self._null(g0, g1, g2, winner, -1, -1, 0, winner)
            elif n == 1:
                r = self._null(g0, g1, g2, leader, tc0, c, 2, (to_move + 1) % 3)
            else:
                r = self._null(g0, g1, g2, leader, c, -1, 1, (to_move + 1) % 3)
            if declarer_node and r:
                result = True
                break
            if not declarer_node and not r:
                result = False
                break
        if self.use_tt:
            self.null_tt[key] = result
        return result

    def _null_ordered(self, cand: int, n: int, tc0: int, tc1: int,
                      declarer_node: bool, leader: int) -> list[int]:
        pp = self.tables.power_plain
        if n == 2:
            fmask = self.tables.follow[tc0]

            def key(c: int) -> tuple:
                best_pos, best_pow = 0, pp[tc0]
                for i, cc in enumerate((tc1, c), start=1):
                    p = pp[cc] if (1 << cc) & fmask else 0
                    if p > best_pow:
                        best_pos, best_pow = i, p
                ducked = (leader + best_pos) % 3 != self.declarer
                return (ducked != declarer_node, c)
            return sorted(iter_cards(cand), key=key)
        # Declarer leads low, opponents lead high.
        return sorted(iter_cards(cand), key=lambda c: pp[c] if declarer_node else -pp[c])


def position_from_json(data: dict) -> SearchPosition:
    """Position described with card-name lists, as the CLI accepts it."""
    from .cards import set_from_json, parse_card

    game = GameType.parse(data["game"])
    hands = tuple(set_from_json(h) for h in data["hands"])
    skat = set_from_json(data.get("skat", []))
    leader = data.get("leader", 0)
    trick = TrickState(leader)
    for item in data.get("table", []):
        trick = trick.add(item["seat"], parse_card(item["card"]))
    played = data.get("played")
    if played is None:
        played_set = DECK & ~(hands[0] | hands[1] | hands[2] | skat | trick.cards)
    else:
        played_set = set_from_json(played)
    aspts = data.get("aspts")
    gspts = data.get("gspts")
    gone = set_points(played_set)
    if aspts is None and gspts is None:
        aspts, gspts = gone, 0
    elif aspts is None:
        aspts = gone - gspts
    elif gspts is None:
        gspts = gone - aspts
    pos = SearchPosition(hands=hands, table=trick, played=played_set,
                         to_move=trick.next_seat, game=game,
                         declarer=data["declarer"], aspts=aspts, gspts=gspts,
                         skat=skat)
    pos.validate()
    return pos


def apply_move(pos: SearchPosition, card: int) -> SearchPosition:
    """Play one card, resolving the trick when it completes."""
    bit = 1 << card
    if not pos.hands[pos.to_move] & bit:
        raise ValueError(f"card {card} not held by seat {pos.to_move}")
    hands = list(pos.hands)
    hands[pos.to_move] &= ~bit
    trick = pos.table.add(pos.to_move, card)
    if not trick.is_full:
        return SearchPosition(hands=tuple(hands), table=trick, played=pos.played,
                              to_move=trick.next_seat, game=pos.game,
                              declarer=pos.declarer, aspts=pos.aspts,
                              gspts=pos.gspts, skat=pos.skat)
    winner = trick_winner(trick, pos.game)
    pts = trick.points
    aspts = pos.aspts + (pts if winner == pos.declarer else 0)
    gspts = pos.gspts + (pts if winner != pos.declarer else 0)
    return SearchPosition(hands=tuple(hands), table=TrickState(winner),
                          played=pos.played | trick.cards, to_move=winner,
                          game=pos.game, declarer=pos.declarer, aspts=aspts,
                          gspts=gspts, skat=pos.skat)


# Convenience wrappers building a fresh solver (private transposition table).

def dd_decide(pos: SearchPosition, limit: int) -> bool:
    if not 0 <= limit <= 120:
        raise ValueError("limit must be within 0..120")
    return OpenSolver(pos.game, pos.declarer).decide(pos, limit)


def dd_value(pos: SearchPosition) -> int:
    return OpenSolver(pos.game, pos.declarer).value(pos)


def dd_null(pos: SearchPosition) -> bool:
    return OpenSolver(pos.game, pos.declarer).null_safe(pos)


def dd_best_card(pos: SearchPosition) -> tuple[int, int]:
    return OpenSolver(pos.game, pos.declarer).best_card(pos)


def dd_null_best(pos: SearchPosition) -> tuple[int, bool]:
    return OpenSolver(pos.game, pos.declarer).null_best_card(pos)
