"""Game-log parsing, AI-seat substitution replay and tournament scoring.

Logs are JSON lines, one game per line, cards in the two-character text
form.  Replays cross-tabulate the recorded human outcome, the open-card
solve of the deal (the glassbox) and the replayed AI outcome, and report
the extended Seeger score normalized to 36-game series.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .cards import (
    AnnouncedLevel,
    Contract,
    DECK,
    GameKind,
    GameOutcome,
    GameType,
    TrickState,
    card_str,
    game_value,
    iter_cards,
    parse_card,
    playable,
    set_from_json,
    set_points,
    set_to_json,
    trick_winner,
)
from .knowledge import ViewTracker
from .policy import PolicyConfig, choose_card, pick_game, simple_bid
from .solver import OpenSolver, SearchPosition


class LogError(ValueError):
    """A record violates the schema or the rules; carries a line number."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class GameRecord:
    hands: tuple[int, int, int]   # dealt 10-card hands, before skat exchange
    skat: int                     # dealt skat
    bid: int
    declarer: int
    game: GameType
    hand_flag: bool
    ouvert_flag: bool
    announced: AnnouncedLevel
    pickup: bool
    discards: int                 # the two cards put back (== skat if untouched)
    moves: tuple[int, ...]
    declarer_points: int
    won: bool

    @property
    def contract(self) -> Contract:
        return Contract(self.game, hand_flag=self.hand_flag,
                        ouvert_flag=self.ouvert_flag, announced=self.announced)

    def declarer_hand(self) -> int:
        if self.pickup:
            return (self.hands[self.declarer] | self.skat) & ~self.discards
        return self.hands[self.declarer]

    def final_skat(self) -> int:
        return self.discards if self.pickup else self.skat


_ANNOUNCED = {"normal": AnnouncedLevel.NORMAL,
              "schneider": AnnouncedLevel.SCHNEIDER,
              "schwarz": AnnouncedLevel.SCHWARZ}


def emit(record: GameRecord) -> str:
    """Canonical one-line JSON form; parse(emit(r)) == r byte-for-byte."""
    payload = {
        "hands": [set_to_json(h) for h in record.hands],
        "skat": set_to_json(record.skat),
        "bid": record.bid,
        "declarer": record.declarer,
        "game": record.game.letter,
        "hand": record.hand_flag,
        "ouvert": record.ouvert_flag,
        "announced": record.announced.name.lower(),
        "pickup": record.pickup,
        "discards": set_to_json(record.discards),
        "moves": [card_str(c) for c in record.moves],
        "declarer_points": record.declarer_points,
        "won": record.won,
    }
    return json.dumps(payload, separators=(",", ":"))


def _parse_record(line_no: int, data: dict) -> GameRecord:
    try:
        hands = tuple(set_from_json(h) for h in data["hands"])
        skat = set_from_json(data["skat"])
        game = GameType.parse(data["game"])
        record = GameRecord(
            hands=hands, skat=skat, bid=int(data["bid"]),
            declarer=int(data["declarer"]), game=game,
            hand_flag=bool(data["hand"]), ouvert_flag=bool(data["ouvert"]),
            announced=_ANNOUNCED[data["announced"]],
            pickup=bool(data["pickup"]),
            discards=set_from_json(data["discards"]),
            moves=tuple(parse_card(c) for c in data["moves"]),
            declarer_points=int(data["declarer_points"]), won=bool(data["won"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise LogError(line_no, f"bad record: {exc}") from exc
    _validate_record(line_no, record)
    return record


def _validate_record(line_no: int, r: GameRecord) -> None:
    union = r.hands[0] | r.hands[1] | r.hands[2] | r.skat
    total = sum(h.bit_count() for h in r.hands) + r.skat.bit_count()
    if union != DECK or total != 32:
        dup = [card_str(c) for c in iter_cards(DECK & ~union)]
        raise LogError(line_no, f"deal does not partition the deck "
                                f"(missing or duplicated: {dup})")
    if any(h.bit_count() != 10 for h in r.hands) or r.skat.bit_count() != 2:
        raise LogError(line_no, "hand or skat sizes are wrong")
    if not 0 <= r.declarer <= 2:
        raise LogError(line_no, "declarer seat out of range")
    if r.pickup:
        if r.discards.bit_count() != 2 or \
                r.discards & ~(r.hands[r.declarer] | r.skat):
            raise LogError(line_no, "discards not taken from hand plus skat")
        if r.hand_flag:
            raise LogError(line_no, "hand games do not pick up the skat")
    elif r.discards and r.discards != r.skat:
        raise LogError(line_no, "without pickup the skat stays untouched")
    points, won, took_all_tricks, _ = _score_moves(line_no, r)
    if points != r.declarer_points:
        raise LogError(line_no, f"recomputed declarer points {points} differ "
                                f"from recorded {r.declarer_points}")
    if won != r.won:
        raise LogError(line_no, f"recomputed outcome {won} differs from "
                                f"recorded {r.won}")


def _score_moves(line_no: int, r: GameRecord):
    """Replay the recorded moves; returns (points, won, schwarz, opp_tricks)."""
    live = list(r.hands)
    live[r.declarer] = r.declarer_hand()
    if r.game.kind is not GameKind.NULL and len(r.moves) != 30:
        raise LogError(line_no, f"expected 30 moves, got {len(r.moves)}")
    trick = TrickState(0)
    aspts = set_points(r.final_skat())
    declarer_tricks = 0
    opp_tricks = 0
    for ply, card in enumerate(r.moves):
        seat = trick.next_seat
        legal = playable(live[seat], trick, r.game)
        if not legal & (1 << card):
            raise LogError(line_no, f"illegal move {card_str(card)} at ply {ply}")
        live[seat] &= ~(1 << card)
        trick = trick.add(seat, card)
        if trick.is_full:
            winner = trick_winner(trick, r.game)
            if winner == r.declarer:
                declarer_tricks += 1
                aspts += trick.points
            else:
                opp_tricks += 1
            trick = TrickState(winner)
    if r.game.kind is GameKind.NULL:
        won = declarer_tricks == 0 and all(h == 0 for h in live)
        return 0 if won else aspts, won, False, opp_tricks
    won = _trump_won(r.contract, aspts, opp_tricks)
    return aspts, won, opp_tricks == 0, opp_tricks


def _trump_won(contract: Contract, points: int, opp_tricks: int) -> bool:
    if contract.announced is AnnouncedLevel.SCHWARZ:
        return opp_tricks == 0
    return points > contract.limit


def parse_log(lines: Iterable[str]) -> list[GameRecord]:
    records = []
    for i, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogError(i, f"not valid JSON: {exc}") from exc
        records.append(_parse_record(i, data))
    return records


def load_log(path: str) -> list[GameRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_log(fh)


def save_log(path: str, records: Iterable[GameRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(emit(r) + "\n")


# --- glassbox ---------------------------------------------------------------


def glassbox(record: GameRecord) -> bool:
    """Open-card verdict for the declarer from the post-discard deal."""
    hands = list(record.hands)
    hands[record.declarer] = record.declarer_hand()
    pos = SearchPosition.initial(tuple(hands), record.final_skat(),
                                 record.game, record.declarer)
    solver = OpenSolver(record.game, record.declarer)
    if record.game.kind is GameKind.NULL:
        return solver.null_safe(pos)
    return solver.decide(pos, record.contract.limit)


# --- replay -----------------------------------------------------------------

MODES = ("ai-all-seats", "ai-declarer-only", "ai-opponents-only")


@dataclass
class ReplayConfig:
    mode: str = "ai-all-seats"
    kbps_declarer: bool = True
    kbps_opponents: bool = True
    ai_bidding: bool = False
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    with_glassbox: bool = True

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class GameScore:
    declarer: int
    value: int       # signed tournament value
    won: bool


@dataclass
class SeriesReport:
    mode: str
    cells: dict           # (human, glassbox, ai) -> count
    replayed: int
    folded: int
    human_wins: int
    glassbox_wins: int
    ai_wins: int
    seeger: tuple[Fraction, Fraction, Fraction]
    seeger_mean: Fraction
    wall_time: float


def _ai_seats(mode: str, declarer: int) -> set[int]:
    if mode == "ai-all-seats":
        return {0, 1, 2}
    if mode == "ai-declarer-only":
        return {declarer}
    return {s for s in range(3) if s != declarer}


def replay(records: list[GameRecord], config: ReplayConfig) -> SeriesReport:
    start = time.monotonic()
    cells: dict = {}
    folded = 0
    scores: list[GameScore] = []
    human = glass = ai = 0
    for record in records:
        played = _replay_one(record, config)
        if played is None:
            folded += 1
            continue
        ai_won, declarer, contract, declarer_cards, outcome = played
        gb = glassbox(record) if config.with_glassbox else False
        key = (record.won, gb, ai_won)
        cells[key] = cells.get(key, 0) + 1
        human += record.won
        glass += gb
        ai += ai_won
        value = game_value(contract, declarer_cards, outcome)
        scores.append(GameScore(declarer=declarer, value=value, won=ai_won))
    seeger = tuple(seeger_score(p, scores) for p in range(3))
    report = SeriesReport(
        mode=config.mode, cells=cells, replayed=len(scores), folded=folded,
        human_wins=human, glassbox_wins=glass, ai_wins=ai,
        seeger=seeger, seeger_mean=sum(seeger, Fraction(0)) / 3,
        wall_time=time.monotonic() - start)
    return report


def _replay_one(record: GameRecord, config: ReplayConfig):
    """One game; None when AI bidding folds the deal."""
    declarer = record.declarer
    contract = record.contract
    discards = record.discards if record.pickup else 0
    if config.ai_bidding:
        bids = [simple_bid(h) for h in record.hands]
        if max(bids) == 0:
            return None
        declarer = max(range(3), key=lambda s: (bids[s], -s))
        game, discard = pick_game(record.hands[declarer] | record.skat)
        contract = Contract(game)
        discards = discard
        declarer_cards10 = (record.hands[declarer] | record.skat) & ~discard
        skat_after = discard
        pickup = True
    else:
        declarer_cards10 = record.declarer_hand()
        skat_after = record.final_skat()
        pickup = record.pickup

    ai_seats = _ai_seats(config.mode, declarer)
    hands = list(record.hands)
    hands[declarer] = declarer_cards10

    trackers = []
    for s in range(3):
        skat_known = skat_after if s == declarer and pickup else None
        trackers.append(ViewTracker(
            s, hands[s], contract.game, declarer, skat_if_known=skat_known,
            noskat_heuristic=config.policy.noskat_heuristic,
            conventions=config.policy.conventions))

    per_side_cfg = {
        True: _with_kbps(config.policy, config.kbps_declarer),
        False: _with_kbps(config.policy, config.kbps_opponents),
    }

    live = list(hands)
    trick = TrickState(0)
    log_moves = list(record.moves)
    log_index = 0
    aspts = set_points(skat_after)
    declarer_tricks = 0
    opp_tricks = 0
    for _ply in range(30):
        seat = trick.next_seat
        legal = playable(live[seat], trick, contract.game)
        if seat in ai_seats:
            rec = choose_card(trackers[seat].view, trick,
                              per_side_cfg[seat == declarer],
                              limit=contract.limit)
            card = rec.card
        else:
            card = _log_move(log_moves, log_index, legal, trackers[seat].view,
                             trick)
        log_index += 1
        for s in range(3):
            trackers[s].observe(seat, card, trick)
        live[seat] &= ~(1 << card)
        trick = trick.add(seat, card)
        if trick.is_full:
            winner = trick_winner(trick, contract.game)
            if winner == declarer:
                declarer_tricks += 1
                aspts += trick.points
            else:
                opp_tricks += 1
            trick = TrickState(winner)
        if contract.game.kind is GameKind.NULL and declarer_tricks:
            break

    if contract.game.kind is GameKind.NULL:
        won = declarer_tricks == 0
        outcome = GameOutcome(won=won)
        return won, declarer, contract, declarer_cards10 | skat_after, outcome
    won = _trump_won(contract, aspts, opp_tricks)
    outcome = GameOutcome(
        won=won,
        schneider=aspts >= 90 if won else aspts <= 30,
        schwarz=(opp_tricks == 0) if won else (declarer_tricks == 0))
    return won, declarer, contract, declarer_cards10 | skat_after, outcome


def _with_kbps(policy: PolicyConfig, enabled: bool) -> PolicyConfig:
    if policy.kbps_enabled == enabled:
        return policy
    from dataclasses import replace as dc_replace
    return dc_replace(policy, kbps_enabled=enabled)


def _log_move(log_moves, index, legal, view, trick):
    """Non-AI seats follow the log while it stays legal, else a stand-in."""
    from .policy import expert_fallback

    if index < len(log_moves):
        card = log_moves[index]
        if legal & (1 << card):
            return card
    return expert_fallback(view, trick)


# --- extended Seeger scoring -------------------------------------------------


def seeger_score(player: int, games: list[GameScore],
                 series_length: int = 36) -> Fraction:
    """Tournament score for one player, normalized to a 36-game series.

    Declared games add the signed value plus/minus 50; every lost game of
    another declarer credits 40 to each defender.
    """
    if not games:
        return Fraction(0)
    total = 0
    for g in games:
        if g.declarer == player:
            total += g.value + (50 if g.won else -50)
        elif not g.won:
            total += 40
    return Fraction(total) * Fraction(series_length, len(games))


def report_csv(report: SeriesReport) -> str:
    """Cross-tab rows in a stable order; excludes wall time so identical
    inputs yield identical bytes."""
    lines = ["human_won,glassbox_won,ai_won,games"]
    for h in (False, True):
        for g in (False, True):
            for a in (False, True):
                lines.append(f"{h},{g},{a},{report.cells.get((h, g, a), 0)}")
    lines.append(f"total_replayed,,,{report.replayed}")
    lines.append(f"folded,,,{report.folded}")
    lines.append(f"human_wins,,,{report.human_wins}")
    lines.append(f"glassbox_wins,,,{report.glassbox_wins}")
    lines.append(f"ai_wins,,,{report.ai_wins}")
    for s in range(3):
        lines.append(f"seeger_seat{s},,,{float(report.seeger[s]):.2f}")
    lines.append(f"seeger_mean,,,{float(report.seeger_mean):.2f}")
    return "\n".join(lines) + "\n"
