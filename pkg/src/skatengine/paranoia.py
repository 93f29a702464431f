"""Forced-win search against every consistent card placement.

One backtracking decision procedure serves both roles.  The prover's own
moves are existential; adversary nodes quantify over every card the mover
could hold in any world, resolving placements lazily: playing a pool card
pins it to the mover's hand, renouncing a class relocates every candidate
card of that class away from the mover.  A branch whose implied placement
exceeds a hand's capacity is impossible and is skipped, not lost.

A True result is a proof that the goal is reached in every world the
knowledge sets allow; False carries no claim.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from .cards import (
    CARD_POINTS,
    GameKind,
    GameType,
    iter_cards,
    playable,
    set_points,
    trump_set,
)
from .knowledge import KnowledgeView
from .solver import SearchPosition, SearchTimeout, apply_move, tables_for


@dataclass(frozen=True, slots=True)
class AssignmentConstraint:
    """World restrictions for the approximate search.

    `forced` pre-assigns pool cards to hands; `suit_cap` bounds how many
    pool cards of one follow class may end up on a single hand.
    """

    forced: tuple[int, int, int] = (0, 0, 0)
    suit_cap: Optional[int] = None

    def __post_init__(self) -> None:
        f = self.forced
        if (f[0] & f[1]) | (f[0] & f[2]) | (f[1] & f[2]):
            raise ValueError("forced sets must be disjoint")
        if self.suit_cap is not None and self.suit_cap < 0:
            raise ValueError("suit_cap must be non-negative")


DEFAULT_CONSTRAINT = AssignmentConstraint(suit_cap=5)

_CAP_HIT = object()


@dataclass(frozen=True, slots=True)
class ParanoiaQuery:
    view: KnowledgeView
    pos: SearchPosition
    limit: int
    constraint: Optional[AssignmentConstraint] = None

    def __post_init__(self) -> None:
        if self.pos.game.kind is GameKind.NULL:
            raise ValueError("paranoia search covers trump games only")
        if not 0 <= self.limit <= 120:
            raise ValueError("limit must be within 0..120")
        for s in range(3):
            if s == self.view.seat:
                if self.pos.hands[s] != self.view.own:
                    raise ValueError("position hand differs from the view's own cards")
            elif self.pos.hands[s] != self.view.h[s]:
                raise ValueError(f"hand {s} must hold exactly the proven cards")


class VacuousConstraint(ValueError):
    """The assignment constraint excludes every consistent world."""


def proven_position(view: KnowledgeView, table) -> SearchPosition:
    """Project a view onto the query position it proves against.

    Adversary hands carry only the proven cards; everything else stays in
    the view's pools.  The view's running declarer points include a known
    skat, the position convention keeps them apart.
    """
    hands = tuple(view.own if s == view.seat else view.h[s] for s in range(3))
    skat = view.skat_known if view.skat_known is not None else 0
    aspts = view.aspts - set_points(skat)
    return SearchPosition(hands=hands, table=table,
                          played=view.played & ~table.cards,
                          to_move=table.next_seat, game=view.game,
                          declarer=view.declarer, aspts=aspts,
                          gspts=view.gspts, skat=skat)


class _Paranoia:
    """Search engine for one query; holds the private transposition table."""

    def __init__(self, query: ParanoiaQuery, prover: int,
                 deadline: Optional[float] = None) -> None:
        view, pos = query.view, query.pos
        self.tables = tables_for(pos.game)
        self.declarer = pos.declarer
        self.prover = prover
        self.deadline = deadline
        self.nodes = 0
        self.tt: dict = {}
        self.skat_is_known = view.skat_known is not None
        self.noskat = view.noskat
        pool = view.pool
        proven = list(view.h)
        proven[view.seat] = view.own
        caps = list(view.remaining)
        orsk = list(view.or_skat)
        skat_forced = view.skat_forced

        self.suit_cap = None
        self.class_of = [0] * 32
        if query.constraint is not None:
            forced = query.constraint.forced
            for s in range(3):
                if not forced[s]:
                    continue
                if s == view.seat or forced[s] & ~ (pool | view.h[s]):
                    raise VacuousConstraint("forced cards are not assignable")
                proven[s] |= forced[s]
                pool &= ~forced[s]
                if proven[s].bit_count() > caps[s]:
                    raise VacuousConstraint("forced cards exceed the hand capacity")
            self.suit_cap = query.constraint.suit_cap
            if self.suit_cap is not None:
                trump = trump_set(pos.game)
                for c in range(32):
                    bit = 1 << c
                    self.class_of[c] = 0 if bit & trump else 1 + (c >> 3)

        declarer_prover = prover == self.declarer
        self.declarer_prover = declarer_prover
        if declarer_prover:
            needed = query.limit + 1 - pos.aspts - set_points(pos.skat)
            avail = 120 - pos.aspts - pos.gspts - set_points(pos.skat)
        else:
            needed = (120 - query.limit) - pos.gspts
            avail = set_points(pool | orsk[0] | orsk[1] | orsk[2]
                               | proven[0] | proven[1] | proven[2]
                               | pos.table.cards)

        tcards = [c for _, c in pos.table.plays]
        self._root = (tuple(proven), pool, tuple(orsk), skat_forced,
                      tuple(caps), pos.table.leader,
                      tcards[0] if len(tcards) > 0 else -1,
                      tcards[1] if len(tcards) > 1 else -1,
                      len(tcards), pos.to_move, needed, avail,
                      (0,) * 15 if self.suit_cap is not None else None)

    def run(self) -> bool:
        (proven, pool, orsk, skat_forced, caps, leader, tc0, tc1, n,
         to_move, needed, avail, counts) = self._root
        return self._search(proven, pool, orsk, skat_forced, caps, leader,
                            tc0, tc1, n, to_move, needed, avail, counts)

    # -- helpers -----------------------------------------------------------

    def _count_ok(self, counts, seat, cards):
        """Bump per-class assignment counters; _CAP_HIT when the cap trips."""
        if counts is None:
            return None
        out = list(counts)
        for c in iter_cards(cards):
            idx = self.class_of[c] * 3 + seat
            out[idx] += 1
            if out[idx] > self.suit_cap:
                return _CAP_HIT
        return tuple(out)

    def _search(self, proven, pool, orsk, skat_forced, caps, leader, tc0, tc1,
                n, to_move, needed, avail, counts) -> bool:
        if needed <= 0:
            return True
        if needed > avail:
            return False
        self.nodes += 1
        if self.deadline is not None and not self.nodes % 1024 and \
                time.monotonic() > self.deadline:
            raise SearchTimeout
        if n == 0 and caps[0] == 0 and caps[1] == 0 and caps[2] == 0:
            # All hands played out; unassigned cards are the skat and score
            # for the declarer.
            if self.declarer_prover:
                leftover = pool | orsk[0] | orsk[1] | orsk[2] | skat_forced
                return needed - set_points(leftover) <= 0
            return False  # needed > 0 at this point

        key = (proven, pool, orsk, skat_forced, leader, tc0, tc1, n, to_move,
               counts)
        entry = self.tt.get(key)
        if entry is not None:
            lo, hi = entry
            if needed <= lo:
                return True
            if needed > hi:
                return False

        if to_move == self.prover:
            result = self._prover_node(proven, pool, orsk, skat_forced, caps,
                                       leader, tc0, tc1, n, to_move, needed,
                                       avail, counts)
        else:
            result = self._adversary_node(proven, pool, orsk, skat_forced,
                                          caps, leader, tc0, tc1, n, to_move,
                                          needed, avail, counts)

        entry = self.tt.get(key)
        lo, hi = entry if entry is not None else (-1, 1 << 10)
        if result:
            lo = max(lo, needed)
        else:
            hi = min(hi, needed - 1)
        self.tt[key] = (lo, hi)
        return result

    def _prover_node(self, proven, pool, orsk, skat_forced, caps, leader,
                     tc0, tc1, n, to_move, needed, avail, counts) -> bool:
        hand = proven[to_move]
        legal = self._legal(hand, n, tc0)
        cand = self._reduce_grouped(legal, (legal,), proven, pool, orsk,
                                    tc0, tc1, n)
        for c in self._order(cand, n, tc0, tc1, leader, True):
            bit = 1 << c
            np_ = list(proven)
            np_[to_move] = hand & ~bit
            nc = list(caps)
            nc[to_move] -= 1
            if self._child(tuple(np_), pool, orsk, skat_forced, tuple(nc),
                           leader, tc0, tc1, n, to_move, needed, avail,
                           counts, c):
                return True
        return False

    def _adversary_node(self, proven, pool, orsk, skat_forced, caps, leader,
                        tc0, tc1, n, to_move, needed, avail, counts) -> bool:
        a = to_move
        other = next(s for s in range(3) if s != self.prover and s != a)
        cands = proven[a] | pool | orsk[a]
        avail_set = self._legal_candidates(proven[a], cands, n, tc0)
        if not avail_set:
            return True  # impossible state: no world gives the mover a card
        reduced = self._reduce_grouped(
            avail_set, (avail_set & proven[a], avail_set & pool,
                        avail_set & orsk[a]), proven, pool, orsk, tc0, tc1, n)
        klass = self.tables.follow[tc0] if n else 0
        for c in self._order(reduced, n, tc0, tc1, leader, False):
            bit = 1 << c
            np_ = list(proven)
            no = list(orsk)
            npool = pool
            nskat = skat_forced
            navail = avail
            ncounts = counts

            if n and not bit & klass and cands & klass:
                # The mover renounces: their candidate class cards move away.
                moved = npool & klass
                to_skat = no[a] & klass
                if to_skat & self.noskat or (nskat | to_skat).bit_count() > 2:
                    continue
                nskat |= to_skat
                no[a] &= ~klass
                if not self.declarer_prover:
                    navail -= set_points(to_skat)
                if self._skat_known():
                    grown = np_[other] | moved
                    if grown.bit_count() > caps[other]:
                        continue
                    ncounts = self._count_ok(ncounts, other, moved)
                    if ncounts is _CAP_HIT:
                        continue
                    np_[other] = grown
                    npool &= ~moved
                else:
                    cache = no[other] | moved
                    npool &= ~moved
                    promote = cache & self.noskat
                    cache &= ~promote
                    grown = np_[other] | promote
                    if grown.bit_count() > caps[other]:
                        continue
                    if cache.bit_count() > (caps[other] - grown.bit_count()
                                            + 2 - nskat.bit_count()):
                        continue
                    ncounts = self._count_ok(ncounts, other, promote)
                    if ncounts is _CAP_HIT:
                        continue
                    np_[other] = grown
                    no[other] = cache

            # Pin the played card to the mover's hand.
            if bit & npool or bit & no[a]:
                if np_[a].bit_count() + 1 > caps[a]:
                    continue
                if bit & npool:
                    ncounts = self._count_ok(ncounts, a, bit)
                    if ncounts is _CAP_HIT:
                        continue
                npool &= ~bit
                no[a] &= ~bit
            else:
                np_[a] = np_[a] & ~bit
            # The mover still must be able to fill their hand.
            nc = list(caps)
            nc[a] -= 1
            if (np_[a] | npool | no[a]).bit_count() < nc[a]:
                continue
            if not self._child(tuple(np_), npool, tuple(no), nskat, tuple(nc),
                               leader, tc0, tc1, n, to_move, needed, navail,
                               ncounts, c):
                return False
        return True

    def _child(self, proven, pool, orsk, skat_forced, caps, leader, tc0, tc1,
               n, to_move, needed, avail, counts, card) -> bool:
        if n == 2:
            winner, pts = self._resolve(leader, tc0, tc1, card)
            prover_side = (winner == self.declarer) == self.declarer_prover
            child_needed = needed - pts if prover_side else needed
            return self._search(proven, pool, orsk, skat_forced, caps, winner,
                                -1, -1, 0, winner, child_needed, avail - pts,
                                counts)
        if n == 1:
            return self._search(proven, pool, orsk, skat_forced, caps, leader,
                                tc0, card, 2, (to_move + 1) % 3, needed, avail,
                                counts)
        return self._search(proven, pool, orsk, skat_forced, caps, leader,
                            card, -1, 1, (to_move + 1) % 3, needed, avail,
                            counts)

    def _skat_known(self) -> bool:
        return self.skat_is_known

    def _legal(self, hand: int, n: int, tc0: int) -> int:
        if n == 0:
            return hand
        serving = self.tables.follow[tc0] & hand
        return serving if serving else hand

    def _legal_candidates(self, proven_a: int, cands: int, n: int, tc0: int) -> int:
        if n == 0:
            return cands
        klass = self.tables.follow[tc0]
        if proven_a & klass:
            return cands & klass  # proven holder must serve in every world
        return cands

    def _resolve(self, leader: int, tc0: int, tc1: int, tc2: int):
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

    def _reduce_grouped(self, avail: int, groups, proven, pool, orsk,
                        tc0, tc1, n) -> int:
        """Equivalence reduction applied within each holding category only."""
        alive = pool
        for s in range(3):
            alive |= proven[s] | orsk[s]
        if n > 0:
            alive |= 1 << tc0
        if n > 1:
            alive |= 1 << tc1
        out = 0
        for group in groups:
            if group:
                out |= self._reduce(group, alive & ~group)
        return out

    def _reduce(self, legal: int, others: int) -> int:
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
                elif bit & others:
                    prev_bit, prev_pts = 0, -1
        return out

    def _order(self, cand: int, n: int, tc0: int, tc1: int, leader: int,
               prover_node: bool) -> list[int]:
        pt = self.tables.power_trump
        pp = self.tables.power_plain
        if n == 2:
            def key(c: int):
                winner, pts = self._resolve(leader, tc0, tc1, c)
                good = (winner == self.declarer) == self.declarer_prover
                wants = good == prover_node
                return (not wants, -pts if wants else CARD_POINTS[c], c)
            return sorted(iter_cards(cand), key=key)
        return sorted(iter_cards(cand), key=lambda c: (-(pt[c] or pp[c]), c))


def kbps_declarer(query: ParanoiaQuery, deadline: Optional[float] = None,
                  stats: Optional[dict] = None) -> bool:
    """True iff the declarer forces final points > limit in every world."""
    if query.view.role != "declarer":
        raise ValueError("query view must belong to the declarer")
    eng = _Paranoia(query, query.pos.declarer, deadline)
    result = eng.run()
    if stats is not None:
        stats["nodes"] = stats.get("nodes", 0) + eng.nodes
    return result


def kbps_opponent(query: ParanoiaQuery, deadline: Optional[float] = None,
                  stats: Optional[dict] = None) -> bool:
    """True iff the querying opponent forces the break in every world."""
    if query.view.role != "opponent":
        raise ValueError("query view must belong to an opponent")
    eng = _Paranoia(query, query.view.seat, deadline)
    result = eng.run()
    if stats is not None:
        stats["nodes"] = stats.get("nodes", 0) + eng.nodes
    return result


def prove(view: KnowledgeView, pos: SearchPosition, limit: int,
          constraint: Optional[AssignmentConstraint] = None,
          deadline: Optional[float] = None,
          stats: Optional[dict] = None) -> bool:
    """Dispatch to the right role for this view."""
    query = ParanoiaQuery(view, pos, limit, constraint)
    if view.role == "declarer":
        return kbps_declarer(query, deadline, stats)
    return kbps_opponent(query, deadline, stats)


def akbps(query: ParanoiaQuery, deadline: Optional[float] = None,
          stats: Optional[dict] = None) -> bool:
    """Approximate variant: forced win over the constrained world subset.

    With an empty constraint this is the exact search.  Raises
    VacuousConstraint when no consistent world satisfies the constraint.
    """
    constraint = query.constraint or AssignmentConstraint()
    q = ParanoiaQuery(query.view, query.pos, query.limit, constraint)
    _check_not_vacuous(q)
    if q.view.role == "declarer":
        return kbps_declarer(q, deadline, stats)
    return kbps_opponent(q, deadline, stats)


def _check_not_vacuous(query: ParanoiaQuery) -> None:
    """Find one consistent world satisfying the constraint, or raise."""
    from .knowledge import _unknowns

    constraint = query.constraint
    assert constraint is not None
    view = query.view
    cards, allowed, need = _unknowns(view)
    trump = trump_set(query.pos.game)

    def class_of(c: int) -> int:
        return 0 if (1 << c) & trump else 1 + (c >> 3)

    counts: dict[tuple[int, int], int] = {}
    for s in range(3):
        for c in iter_cards(constraint.forced[s]):
            if c in allowed:
                if s not in allowed[c]:
                    raise VacuousConstraint("forced card cannot sit on that hand")
                allowed[c] = (s,)

    cap = constraint.suit_cap

    def dfs(i: int) -> bool:
        if i == len(cards):
            return True
        c = cards[i]
        for loc in allowed[c]:
            if need[loc] <= 0:
                continue
            key = (class_of(c), loc)
            if cap is not None and loc != 3 and counts.get(key, 0) >= cap:
                continue
            need[loc] -= 1
            counts[key] = counts.get(key, 0) + 1
            if dfs(i + 1):
                return True
            counts[key] -= 1
            need[loc] += 1
        return False

    if sum(need.values()) != len(cards) or not dfs(0):
        raise VacuousConstraint("no consistent world satisfies the constraint")


def escalate(view: KnowledgeView, pos: SearchPosition,
             deadline: Optional[float] = None) -> int:
    """Highest proven contract level from here: 0 (none), 61, 90 or 120."""
    level = 0
    for limit, name in ((60, 61), (89, 90), (119, 120)):
        if prove(view, pos, limit, deadline=deadline):
            level = name
        else:
            break
    return level


_KILLER_LEVELS = ((60, 61), (89, 90), (119, 120))


def killer_scan_order(game: GameType, cards: int) -> list[int]:
    """Trump descending, then plain suits in declared order, rank descending."""
    tables = tables_for(game)
    trump = trump_set(game)
    out = sorted(iter_cards(cards & trump),
                 key=lambda c: -tables.power_trump[c])
    for s in range(4):
        mask = (0xFF << (8 * s)) & ~trump
        out.extend(sorted(iter_cards(cards & mask),
                          key=lambda c: -tables.power_plain[c]))
    return out


def killer_card(view: KnowledgeView, pos: SearchPosition, limit: int,
                constraint: Optional[AssignmentConstraint] = None,
                deadline: Optional[float] = None,
                stats: Optional[dict] = None) -> Optional[tuple[int, int]]:
    """First scanned card whose post-move paranoia query is a win.

    Returns (card, proven level); for opponents the level is the broken
    contract limit's level.  Absence means "no forced win found".
    """
    if pos.to_move != view.seat:
        raise ValueError("the view's seat is not to move")
    legal = playable(view.own, pos.table, pos.game)
    declarer_side = view.role == "declarer"
    total_nodes = 0
    for c in killer_scan_order(pos.game, legal):
        child = apply_move(pos, c)
        after = view_after_own_play(view, c, pos)
        s: dict = {}
        try:
            won = prove(after, child, limit, constraint=constraint,
                        deadline=deadline, stats=s)
        except VacuousConstraint:
            continue
        total_nodes += s.get("nodes", 0)
        if not won:
            continue
        level = 61 if limit <= 60 else (90 if limit <= 89 else 120)
        if declarer_side:
            for lim, name in _KILLER_LEVELS:
                if lim <= limit:
                    continue
                try:
                    if prove(after, child, lim, constraint=constraint,
                             deadline=deadline):
                        level = name
                    else:
                        break
                except SearchTimeout:
                    break
        if stats is not None:
            stats["nodes"] = total_nodes
        return c, level
    if stats is not None:
        stats["nodes"] = total_nodes
    return None


def view_after_own_play(view: KnowledgeView, card: int,
                        pos: SearchPosition) -> KnowledgeView:
    from .knowledge import observe_play

    return observe_play(view, view.seat, card, pos.table, pos.game)


def avoid_schneider(view: KnowledgeView, pos: SearchPosition,
                    deadline: Optional[float] = None) -> Optional[int]:
    """A card guaranteeing the opponents >= 31 points, else >= 1, else None."""
    if view.role != "opponent":
        raise ValueError("schneider defence is an opponent concern")
    for limit in (89, 119):
        found = killer_card(view, pos, limit, deadline=deadline)
        if found is not None:
            return found[0]
    return None


def hope_card(view: KnowledgeView, pos: SearchPosition, limit: int,
              world_cap: int = 400,
              deadline: Optional[float] = None) -> Optional[int]:
    """The single move not yet provably lost when all alternatives are.

    A move is provably lost when the open solver defeats us after it in
    every consistent world: the adversary wins even against full knowledge.
    """
    from .knowledge import enumerate_worlds
    from .solver import OpenSolver

    if pos.to_move != view.seat:
        raise ValueError("the view's seat is not to move")
    legal = playable(view.own, pos.table, pos.game)
    if not legal & (legal - 1):
        return None  # a forced card dominates nothing
    worlds = enumerate_worlds(view, cap=world_cap + 1)
    if len(worlds) > world_cap:
        return None  # belief space too large for a per-world proof
    we_declare = view.role == "declarer"
    candidates = set(iter_cards(legal))
    doomed = dict.fromkeys(candidates, True)
    for w in worlds:
        if deadline is not None and time.monotonic() > deadline:
            raise SearchTimeout
        full = SearchPosition(hands=w.hands, table=pos.table,
                              played=pos.played, to_move=pos.to_move,
                              game=pos.game, declarer=pos.declarer,
                              aspts=pos.aspts, gspts=pos.gspts, skat=w.skat)
        solver = OpenSolver(pos.game, pos.declarer, deadline=deadline)
        for c in candidates:
            if not doomed[c]:
                continue
            if solver.decide(apply_move(full, c), limit) == we_declare:
                doomed[c] = False
        survivors = [c for c in candidates if not doomed[c]]
        if len(survivors) > 1:
            return None
    survivors = sorted(c for c in candidates if not doomed[c])
    return survivors[0] if len(survivors) == 1 else None
