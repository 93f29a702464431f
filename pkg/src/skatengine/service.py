"""Live-play session service.

Sessions hold the authoritative game state; clients see only seat-scoped
snapshots.  The protocol is message-oriented: JSON envelopes
{type, session, seq, payload} in both directions, transport-agnostic so a
websocket, a stdio pipe and the test suite share one handler.  The server
echoes the request's seq, making exchanges replayable.
"""

from __future__ import annotations

import json
import secrets
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .cards import (
    AnnouncedLevel,
    Contract,
    GameKind,
    GameType,
    TrickState,
    card_str,
    cardset,
    iter_cards,
    parse_card,
    playable,
    set_points,
    set_to_json,
    trick_winner,
)
from .knowledge import ViewTracker
from .policy import (
    BID_LADDER,
    PolicyConfig,
    Recommendation,
    choose_card,
    pick_game,
    simple_bid,
)
from .replay import GameRecord, emit, _trump_won

PHASES = ("bidding", "skat", "declaring", "trick", "finished")

ERR_UNKNOWN_SESSION = "unknown_session"
ERR_OUT_OF_TURN = "out_of_turn"
ERR_ILLEGAL = "illegal_action"
ERR_BAD_REQUEST = "bad_request"


class ProtocolError(Exception):
    def __init__(self, code: str, reason: str, extra: Optional[dict] = None):
        super().__init__(reason)
        self.code = code
        self.reason = reason
        self.extra = extra or {}


@dataclass
class Auction:
    """Two pairings: middlehand speaks to forehand, then rearhand speaks to
    the survivor.  A speaker raises or passes; a raised listener accepts
    (holds at the value) or passes.  All passing folds the deal."""

    value: int = 0
    holder: Optional[int] = None
    speaker: int = 1
    listener: int = 0
    stage: int = 1
    pending: bool = False  # a raise awaits the listener's reply
    done: bool = False

    def next_value(self) -> Optional[int]:
        for v in BID_LADDER:
            if v > self.value:
                return v
        return None

    @property
    def turn(self) -> int:
        return self.listener if self.pending else self.speaker

    def act(self, seat: int, action: str, value: Optional[int]) -> None:
        if self.done:
            raise ProtocolError(ERR_ILLEGAL, "the auction is over")
        if seat != self.turn:
            raise ProtocolError(ERR_OUT_OF_TURN,
                                f"seat {self.turn} speaks next in the auction")
        if action == "bid":
            if self.pending:
                raise ProtocolError(ERR_ILLEGAL, "answer the standing bid first")
            if value is None or value <= self.value or value not in BID_LADDER:
                raise ProtocolError(
                    ERR_ILLEGAL, f"bid must be a ladder value above {self.value}")
            self.value = value
            self.pending = True
        elif action == "accept":
            if not self.pending:
                raise ProtocolError(ERR_ILLEGAL, "nothing to accept")
            self.holder = self.listener
            self.pending = False
        elif action == "pass":
            if self.pending:
                # The listener declines: the speaker holds at the named value.
                self.holder = self.speaker
                self.pending = False
                self._advance(survivor=self.speaker)
            else:
                self._advance(survivor=self.listener)
        else:
            raise ProtocolError(ERR_ILLEGAL, f"unknown auction action {action!r}")

    def _advance(self, survivor: int) -> None:
        if self.stage == 1:
            self.stage = 2
            self.speaker = 2
            self.listener = survivor
        else:
            self.done = True
            self.holder = survivor if self.value else None


@dataclass
class Session:
    sid: str
    hands: tuple[int, int, int]
    skat: int
    human_seats: set
    config: PolicyConfig
    analysis: bool = False
    phase: str = "bidding"
    auction: Auction = field(default_factory=Auction)
    declarer: Optional[int] = None
    contract: Optional[Contract] = None
    pickup: bool = False
    skat_seen: bool = False
    discards: int = 0
    live: list = field(default_factory=list)
    trick: TrickState = field(default_factory=lambda: TrickState(0))
    moves: list = field(default_factory=list)
    trackers: list = field(default_factory=list)
    aspts: int = 0
    gspts: int = 0
    declarer_tricks: int = 0
    opp_tricks: int = 0
    last_ai: Optional[dict] = None

    @property
    def to_act(self) -> Optional[int]:
        if self.phase == "bidding":
            return self.auction.turn
        if self.phase in ("skat", "declaring"):
            return self.declarer
        if self.phase == "trick":
            return self.trick.next_seat
        return None


class SessionManager:
    """All protocol logic; transports only shuttle envelopes."""

    def __init__(self, config: Optional[PolicyConfig] = None,
                 rng_seed: Optional[int] = None) -> None:
        self.config = config or PolicyConfig()
        self.sessions: dict[str, Session] = {}
        self._seed = rng_seed
        self._created = 0

    # -- envelope plumbing --------------------------------------------------

    KNOWN_TYPES = ("create_session", "state_snapshot", "legal_actions",
                   "submit_action", "ai_step", "analysis_toggle", "export_game")

    def handle(self, message: dict) -> dict:
        seq = message.get("seq", 0)
        sid = message.get("session")
        try:
            mtype = message.get("type")
            payload = message.get("payload") or {}
            if mtype not in self.KNOWN_TYPES:
                raise ProtocolError(ERR_BAD_REQUEST,
                                    f"unknown message type {mtype!r}")
            if mtype == "create_session":
                return self._reply(seq, *self._create(payload))
            session = self.sessions.get(sid or "")
            if session is None:
                raise ProtocolError(ERR_UNKNOWN_SESSION, f"no session {sid!r}")
            if mtype == "state_snapshot":
                return self._reply(seq, "snapshot",
                                   self._snapshot(session, payload), sid)
            if mtype == "legal_actions":
                return self._reply(seq, "legal_actions",
                                   self._legal(session, payload), sid)
            if mtype == "submit_action":
                return self._reply(seq, "action_applied",
                                   self._submit(session, payload), sid)
            if mtype == "ai_step":
                return self._reply(seq, "ai_action",
                                   self._ai_step(session), sid)
            if mtype == "analysis_toggle":
                session.analysis = bool(payload.get("enabled", True))
                return self._reply(seq, "analysis",
                                   {"enabled": session.analysis}, sid)
            if mtype == "export_game":
                return self._reply(seq, "game_log",
                                   self._export(session), sid)
            raise ProtocolError(ERR_BAD_REQUEST, f"unknown message type {mtype!r}")
        except ProtocolError as err:
            return {"type": "error", "session": sid, "seq": seq,
                    "payload": {"code": err.code, "reason": err.reason,
                                **err.extra}}

    def handle_json(self, line: str) -> str:
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            return json.dumps({"type": "error", "session": None, "seq": 0,
                               "payload": {"code": ERR_BAD_REQUEST,
                                           "reason": f"bad JSON: {exc}"}})
        return json.dumps(self.handle(message), separators=(",", ":"))

    def _reply(self, seq: int, mtype: str, payload: dict,
               sid: Optional[str] = None) -> dict:
        return {"type": mtype, "session": sid or payload.get("session"),
                "seq": seq, "payload": payload}

    # -- session lifecycle ----------------------------------------------------

    def _create(self, payload: dict):
        import random

        human = set(payload.get("human_seats", [0]))
        if not human <= {0, 1, 2}:
            raise ProtocolError(ERR_BAD_REQUEST, "human_seats must be within 0..2")
        seed = payload.get("seed")
        if seed is None:
            seed = self._seed if self._seed is not None else secrets.randbits(32)
        rng = random.Random(seed + self._created)
        self._created += 1
        deck = list(range(32))
        rng.shuffle(deck)
        hands = tuple(cardset(deck[i * 10:(i + 1) * 10]) for i in range(3))
        skat = cardset(deck[30:])
        config = self.config
        if payload.get("config"):
            config = PolicyConfig.from_dict(payload["config"])
        sid = secrets.token_hex(8)
        session = Session(sid=sid, hands=hands, skat=skat, human_seats=human,
                          config=config, analysis=bool(payload.get("analysis")),
                          live=list(hands))
        self.sessions[sid] = session
        return "session_created", {
            "session": sid,
            "human_seats": sorted(human),
            "phase": session.phase,
            "to_act": session.to_act,
        }

    # -- seat-scoped views ----------------------------------------------------

    def _snapshot(self, s: Session, payload: dict) -> dict:
        seat = self._seat_of(s, payload)
        hand = s.live[seat] if s.phase != "bidding" else s.hands[seat]
        snap = {
            "seat": seat,
            "phase": s.phase,
            "to_act": s.to_act,
            "hand": set_to_json(hand),
            "table": [{"seat": ps, "card": card_str(c)}
                      for ps, c in s.trick.plays],
            "moves": [card_str(c) for c in s.moves],
            "bidding": {
                "value": s.auction.value,
                "holder": s.auction.holder,
                "pending": s.auction.pending,
                "done": s.auction.done,
            },
            "declarer": s.declarer,
            "contract": self._contract_view(s),
            "scores": {"declarer_points": s.aspts, "opponent_points": s.gspts},
        }
        if seat == s.declarer and s.skat_seen:
            snap["skat"] = set_to_json(s.skat)
        if s.phase == "finished":
            snap["result"] = self._result(s)
        return snap

    def _contract_view(self, s: Session) -> Optional[dict]:
        if s.contract is None:
            return None
        return {"game": s.contract.game.letter,
                "hand": s.contract.hand_flag,
                "ouvert": s.contract.ouvert_flag,
                "announced": s.contract.announced.name.lower()}

    def _legal(self, s: Session, payload: dict) -> dict:
        seat = self._seat_of(s, payload)
        actions: list[dict] = []
        if s.phase == "bidding" and s.auction.turn == seat:
            nxt = s.auction.next_value()
            if not s.auction.pending and nxt is not None:
                actions.append({"action": "bid", "value": nxt})
            if s.auction.pending and seat == s.auction.listener:
                actions.append({"action": "accept"})
            actions.append({"action": "pass"})
        elif s.phase == "skat" and seat == s.declarer:
            actions.append({"action": "pickup"})
            actions.append({"action": "hand"})
        elif s.phase == "declaring" and seat == s.declarer:
            actions.append({"action": "declare",
                            "needs_discards": s.pickup})
        elif s.phase == "trick" and s.trick.next_seat == seat:
            legal = playable(s.live[seat], s.trick, s.contract.game)
            actions.extend({"action": "play", "card": card_str(c)}
                           for c in iter_cards(legal))
        return {"seat": seat, "phase": s.phase, "actions": actions}

    def _seat_of(self, s: Session, payload: dict) -> int:
        seat = payload.get("seat")
        if seat not in (0, 1, 2):
            raise ProtocolError(ERR_BAD_REQUEST, "payload needs a seat 0..2")
        return seat

    # -- actions ----------------------------------------------------------------

    def _submit(self, s: Session, payload: dict) -> dict:
        seat = self._seat_of(s, payload)
        action = payload.get("action")
        if s.phase == "finished":
            raise ProtocolError(ERR_ILLEGAL, "the game is over")
        if s.to_act != seat:
            raise ProtocolError(ERR_OUT_OF_TURN,
                                f"seat {s.to_act} is to act, not {seat}")
        if s.phase == "bidding":
            s.auction.act(seat, action, payload.get("value"))
            self._after_auction(s)
        elif s.phase == "skat":
            if action == "pickup":
                s.pickup = True
                s.skat_seen = True
                s.live[seat] = s.hands[seat] | s.skat
                s.phase = "declaring"
            elif action == "hand":
                s.pickup = False
                s.phase = "declaring"
            else:
                raise ProtocolError(ERR_ILLEGAL, "pick up the skat or play hand")
        elif s.phase == "declaring":
            self._declare(s, seat, payload)
        elif s.phase == "trick":
            self._play(s, seat, payload)
        else:
            raise ProtocolError(ERR_ILLEGAL, f"no actions in phase {s.phase}")
        return {"phase": s.phase, "to_act": s.to_act,
                "applied": {k: v for k, v in payload.items() if k != "seat"}}

    def _after_auction(self, s: Session) -> None:
        if not s.auction.done:
            return
        if s.auction.holder is None:
            s.phase = "finished"
            return
        s.declarer = s.auction.holder
        s.phase = "skat"

    def _declare(self, s: Session, seat: int, payload: dict) -> None:
        if payload.get("action") != "declare":
            raise ProtocolError(ERR_ILLEGAL, "declare the game now")
        try:
            game = GameType.parse(payload["game"])
        except (KeyError, ValueError) as exc:
            raise ProtocolError(ERR_ILLEGAL, f"bad game type: {exc}")
        announced = payload.get("announced", "normal")
        if announced not in ("normal", "schneider", "schwarz"):
            raise ProtocolError(ERR_ILLEGAL, "bad announcement")
        if s.pickup and announced != "normal":
            raise ProtocolError(ERR_ILLEGAL,
                                "announcements require a hand game")
        if s.pickup:
            try:
                discards = cardset(parse_card(c) for c in payload["discards"])
            except (KeyError, ValueError) as exc:
                raise ProtocolError(ERR_ILLEGAL, f"bad discards: {exc}")
            if discards.bit_count() != 2 or discards & ~s.live[seat]:
                raise ProtocolError(ERR_ILLEGAL,
                                    "discard exactly two held cards")
            s.discards = discards
            s.live[seat] &= ~discards
        else:
            s.discards = s.skat
        s.contract = Contract(game, hand_flag=not s.pickup,
                              announced=AnnouncedLevel[announced.upper()])
        s.aspts = set_points(s.discards)
        s.phase = "trick"
        s.trick = TrickState(0)
        s.trackers = [
            ViewTracker(i, s.live[i], game, s.declarer,
                        skat_if_known=s.discards if i == s.declarer and s.pickup
                        else None,
                        noskat_heuristic=s.config.noskat_heuristic,
                        conventions=s.config.conventions)
            for i in range(3)
        ]

    def _play(self, s: Session, seat: int, payload: dict) -> None:
        if payload.get("action") != "play":
            raise ProtocolError(ERR_ILLEGAL, "play a card")
        try:
            card = parse_card(payload["card"])
        except (KeyError, ValueError) as exc:
            raise ProtocolError(ERR_ILLEGAL, f"bad card: {exc}")
        legal = playable(s.live[seat], s.trick, s.contract.game)
        if not legal & (1 << card):
            raise ProtocolError(
                ERR_ILLEGAL, "must follow the led class",
                {"legal": [card_str(c) for c in iter_cards(legal)]})
        for tracker in s.trackers:
            tracker.observe(seat, card, s.trick)
        s.live[seat] &= ~(1 << card)
        s.moves.append(card)
        s.trick = s.trick.add(seat, card)
        if s.trick.is_full:
            winner = trick_winner(s.trick, s.contract.game)
            pts = s.trick.points
            if winner == s.declarer:
                s.declarer_tricks += 1
                s.aspts += pts
            else:
                s.opp_tricks += 1
                s.gspts += pts
            s.trick = TrickState(winner)
        if all(h == 0 for h in s.live) or (
                s.contract.game.kind is GameKind.NULL and s.declarer_tricks):
            s.phase = "finished"

    def _ai_step(self, s: Session) -> dict:
        seat = s.to_act
        if seat is None:
            raise ProtocolError(ERR_ILLEGAL, "nothing to do: game finished")
        if seat in s.human_seats:
            raise ProtocolError(ERR_OUT_OF_TURN, f"seat {seat} is human")
        started = time.monotonic()
        if s.phase == "bidding":
            payload = self._ai_bid(s, seat)
        elif s.phase == "skat":
            payload = {"action": "pickup"}
        elif s.phase == "declaring":
            game, discard = pick_game(s.live[seat])
            payload = {"action": "declare", "game": game.letter,
                       "discards": set_to_json(discard)}
        elif s.phase == "trick":
            rec = choose_card(s.trackers[seat].view, s.trick, s.config,
                              limit=s.contract.limit)
            payload = {"action": "play", "card": card_str(rec.card)}
            result = {"seat": seat, **payload, "elapsed": None}
            if s.analysis:
                result["source"] = rec.source.value
                result["proof"] = rec.proof
                result["ratio"] = rec.ratio
                result["time_pressure"] = rec.time_pressure
            self._play(s, seat, payload)
            result["elapsed"] = round(time.monotonic() - started, 3)
            result["phase"] = s.phase
            result["to_act"] = s.to_act
            return result
        else:
            raise ProtocolError(ERR_ILLEGAL, f"no AI action in phase {s.phase}")
        self._submit_ai(s, seat, payload)
        return {"seat": seat, **payload, "phase": s.phase, "to_act": s.to_act,
                "elapsed": round(time.monotonic() - started, 3)}

    def _submit_ai(self, s: Session, seat: int, payload: dict) -> None:
        if s.phase == "bidding":
            s.auction.act(seat, payload["action"], payload.get("value"))
            self._after_auction(s)
        elif s.phase == "skat":
            s.pickup = True
            s.skat_seen = True
            s.live[seat] = s.hands[seat] | s.skat
            s.phase = "declaring"
        elif s.phase == "declaring":
            self._declare(s, seat, payload)

    def _ai_bid(self, s: Session, seat: int) -> dict:
        limit = simple_bid(s.hands[seat])
        if s.auction.pending:
            if s.auction.value <= limit:
                return {"action": "accept"}
            return {"action": "pass"}
        nxt = s.auction.next_value()
        if nxt is not None and nxt <= limit:
            return {"action": "bid", "value": nxt}
        return {"action": "pass"}

    # -- results ---------------------------------------------------------------

    def _result(self, s: Session) -> dict:
        if s.declarer is None or s.contract is None:
            return {"folded": True}
        game = s.contract.game
        if game.kind is GameKind.NULL:
            won = s.declarer_tricks == 0
            points = 0
        else:
            points = s.aspts
            won = _trump_won(s.contract, points, s.opp_tricks)
        from .cards import GameOutcome, game_value
        if game.kind is GameKind.NULL:
            outcome = GameOutcome(won=won)
        else:
            outcome = GameOutcome(
                won=won,
                schneider=points >= 90 if won else points <= 30,
                schwarz=(s.opp_tricks == 0) if won else (s.declarer_tricks == 0))
        value = game_value(s.contract, s.hands[s.declarer] | s.skat, outcome)
        return {"folded": False, "declarer": s.declarer,
                "declarer_points": points, "won": won, "value": value}

    def _export(self, s: Session) -> dict:
        if s.phase != "finished" or s.declarer is None or s.contract is None:
            raise ProtocolError(ERR_ILLEGAL, "only finished games export")
        result = self._result(s)
        record = GameRecord(
            hands=s.hands, skat=s.skat, bid=s.auction.value,
            declarer=s.declarer, game=s.contract.game,
            hand_flag=s.contract.hand_flag, ouvert_flag=s.contract.ouvert_flag,
            announced=s.contract.announced, pickup=s.pickup,
            discards=s.discards if s.pickup else s.skat,
            moves=tuple(s.moves),
            declarer_points=result["declarer_points"], won=result["won"])
        return {"line": emit(record)}
