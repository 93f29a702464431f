"""Command-line entry points: analyze, prove, selfplay, replay, serve."""

from __future__ import annotations

import json
import sys
import time
from typing import Optional

import click

from .cards import card_str, set_to_json
from .policy import PolicyConfig
from .solver import OpenSolver, position_from_json
from .knowledge import view_from_json


def _load_json(path: str) -> dict:
    if path == "-":
        return json.load(sys.stdin)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _policy_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="policy config file (JSON or TOML)"),
        click.option("--akbps-start", type=int, default=None,
                     help="cards played before the approximate search engages"),
        click.option("--kbps-start", type=int, default=None,
                     help="cards played before the exact search engages"),
        click.option("--budget-ms", type=int, default=None,
                     help="decision budget in milliseconds"),
        click.option("--worlds", type=int, default=None,
                     help="world cap for the endgame vote"),
        click.option("--confidence", type=float, default=None,
                     help="win-ratio gate for the endgame vote"),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _build_policy(config_path, akbps_start, kbps_start, budget_ms, worlds,
                  confidence) -> PolicyConfig:
    from dataclasses import replace

    cfg = PolicyConfig.from_file(config_path) if config_path else PolicyConfig()
    if akbps_start is not None:
        cfg = replace(cfg, akbps_start_card=akbps_start)
    if kbps_start is not None:
        cfg = replace(cfg, kbps_start_card=kbps_start)
    if budget_ms is not None:
        cfg = replace(cfg, decision_budget=budget_ms / 1000.0)
    if worlds is not None:
        cfg = replace(cfg, world_cap=worlds)
    if confidence is not None:
        cfg = replace(cfg, confidence=confidence)
    return cfg


@click.group()
def main() -> None:
    """Skat engine: open-card analysis, forced-win proofs, replay, live play."""


@main.command()
@click.option("--position", "position_path", required=True,
              help="position JSON file, or - for stdin")
def analyze(position_path: str) -> None:
    """Solve an open-card position: exact value and a best card."""
    from .cards import GameKind

    pos = position_from_json(_load_json(position_path))
    solver = OpenSolver(pos.game, pos.declarer)
    started = time.perf_counter()
    if pos.game.kind is GameKind.NULL:
        safe = solver.null_safe(pos)
        card, outcome = solver.null_best_card(pos)
        click.echo(json.dumps({
            "game": pos.game.letter,
            "declarer_makes_null": safe,
            "best_card": card_str(card),
            "outcome_after": outcome,
            "nodes": solver.nodes,
            "elapsed_s": round(time.perf_counter() - started, 3)}))
        return
    value = solver.value(pos)
    card, best = solver.best_card(pos)
    click.echo(json.dumps({
        "game": pos.game.letter,
        "value": value,
        "best_card": card_str(card),
        "best_value": best,
        "nodes": solver.nodes,
        "elapsed_s": round(time.perf_counter() - started, 3)}))


@main.command()
@click.option("--query", "query_path", required=True,
              help="JSON file with view, table and limit, or - for stdin")
@click.option("--limit", type=int, default=None,
              help="contract limit override (60, 89 or 119)")
@click.option("--approx/--exact", default=False,
              help="use the approximate search with its default constraint")
@click.option("--suit-cap", type=int, default=None,
              help="per-class imbalance cap for the approximate search")
@click.option("--vote/--no-vote", default=False,
              help="also run the endgame vote over the belief space")
@click.option("--budget-ms", type=int, default=None)
def prove(query_path: str, limit: Optional[int], approx: bool,
          suit_cap: Optional[int], vote: bool, budget_ms: Optional[int]) -> None:
    """Run the paranoia search on a knowledge state: verdict and killer card."""
    from .paranoia import (AssignmentConstraint, killer_card, proven_position,
                           prove as prove_fn)
    from .cards import TrickState, parse_card
    from .voting import endgame_vote

    data = _load_json(query_path)
    view = view_from_json(data["view"])
    trick = TrickState(data.get("table", {}).get("leader", view.seat))
    for item in data.get("table", {}).get("plays", []):
        trick = trick.add(item["seat"], parse_card(item["card"]))
    the_limit = limit if limit is not None else data.get("limit", 60)
    pos = proven_position(view, trick)
    constraint = None
    if approx or suit_cap is not None:
        constraint = AssignmentConstraint(
            suit_cap=suit_cap if suit_cap is not None else 5)
    deadline = None
    if budget_ms is not None:
        deadline = time.monotonic() + budget_ms / 1000.0

    out: dict = {"limit": the_limit, "mode": "approximate" if constraint else "exact"}
    started = time.perf_counter()
    stats: dict = {}
    if pos.to_move == view.seat:
        found = killer_card(view, pos, the_limit, constraint=constraint,
                            deadline=deadline, stats=stats)
        if found is not None:
            out["verdict"] = True
            out["killer_card"] = card_str(found[0])
            out["proven_level"] = found[1]
        else:
            out["verdict"] = False
            out["killer_card"] = None
    else:
        out["verdict"] = prove_fn(view, pos, the_limit, constraint=constraint,
                                  deadline=deadline, stats=stats)
    out["nodes"] = stats.get("nodes", 0)
    out["elapsed_s"] = round(time.perf_counter() - started, 3)
    if vote:
        result = endgame_vote(view, pos, limit=the_limit, deadline=deadline)
        out["vote"] = None if result is None else {
            "card": card_str(result.card), "ratio": result.ratio,
            "worlds": result.worlds}
    click.echo(json.dumps(out))


@main.command()
@click.option("--games", "games_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["ai-all-seats", "ai-declarer-only",
                                           "ai-opponents-only"]),
              default="ai-all-seats", show_default=True)
@click.option("--kbps-declarer", type=click.Choice(["on", "off"]), default="on",
              show_default=True)
@click.option("--kbps-opponents", type=click.Choice(["on", "off"]), default="on",
              show_default=True)
@click.option("--ai-bidding/--human-bidding", default=False)
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="write the cross-tab CSV here")
@_policy_options
def replay(games_path, mode, kbps_declarer, kbps_opponents, ai_bidding,
           report_path, **policy_kwargs) -> None:
    """Replay a game log with AI seats and report the outcome cross-tab."""
    from .replay import ReplayConfig, load_log, replay as run_replay, report_csv

    policy = _build_policy(**policy_kwargs)
    records = load_log(games_path)
    config = ReplayConfig(mode=mode,
                          kbps_declarer=kbps_declarer == "on",
                          kbps_opponents=kbps_opponents == "on",
                          ai_bidding=ai_bidding, policy=policy)
    report = run_replay(records, config)
    csv_text = report_csv(report)
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    click.echo(csv_text, nl=False)
    click.echo(f"# wall_time_s={report.wall_time:.1f}", err=True)


@main.command()
@click.option("--games", "n_games", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_policy_options
def selfplay(n_games, seed, out_path, **policy_kwargs) -> None:
    """Generate a game log by AI self-play (bidding, putting and play)."""
    import random

    from .cards import cardset
    from .replay import save_log
    from .selfplay import play_deal

    policy = _build_policy(**policy_kwargs)
    rng = random.Random(seed)
    records = []
    while len(records) < n_games:
        deck = list(range(32))
        rng.shuffle(deck)
        hands = tuple(cardset(deck[i * 10:(i + 1) * 10]) for i in range(3))
        skat = cardset(deck[30:])
        record = play_deal(hands, skat, policy)
        if record is not None:
            records.append(record)
    save_log(out_path, records)
    click.echo(f"wrote {len(records)} games to {out_path}")


@main.command()
@click.option("--port", type=int, default=8330, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", type=click.Path(exists=True),
              default=None, help="frontend bundle directory")
@_policy_options
def serve(port, host, static_dir, **policy_kwargs) -> None:
    """Run the live-play websocket service (and the browser client)."""
    from .server import serve as run_server

    run_server(host, port, config=_build_policy(**policy_kwargs),
               static_dir=static_dir)


@main.command("session-stdio")
@_policy_options
def session_stdio(**policy_kwargs) -> None:
    """Session protocol over stdin/stdout (one JSON envelope per line)."""
    from .server import stdio_loop
    from .service import SessionManager

    stdio_loop(SessionManager(config=_build_policy(**policy_kwargs)))


if __name__ == "__main__":
    main()
