"""Transports for the session protocol: websocket app and stdio loop."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional, TextIO

from .policy import PolicyConfig
from .service import SessionManager

FRONTEND_DIST = Path(__file__).resolve().parents[2] / "frontend" / "dist"


def create_app(manager: Optional[SessionManager] = None,
               static_dir: Optional[str] = None):
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    from fastapi.staticfiles import StaticFiles

    mgr = manager or SessionManager()
    app = FastAPI(title="skat engine")
    app.state.manager = mgr

    @app.websocket("/ws")
    async def websocket_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        try:
            while True:
                line = await websocket.receive_text()
                await websocket.send_text(mgr.handle_json(line))
        except WebSocketDisconnect:
            return

    static = static_dir or (str(FRONTEND_DIST) if FRONTEND_DIST.is_dir() else None)
    if static:
        app.mount("/", StaticFiles(directory=static, html=True), name="static")
    return app


def serve(host: str, port: int, config: Optional[PolicyConfig] = None,
          static_dir: Optional[str] = None) -> None:
    import uvicorn

    app = create_app(SessionManager(config=config), static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


def stdio_loop(manager: Optional[SessionManager] = None,
               stdin: Optional[TextIO] = None,
               stdout: Optional[TextIO] = None) -> None:
    """Line-delimited JSON envelopes over stdin/stdout; EOF ends the session."""
    mgr = manager or SessionManager()
    inp = stdin or sys.stdin
    out = stdout or sys.stdout
    for line in inp:
        line = line.strip()
        if not line:
            continue
        out.write(mgr.handle_json(line) + "\n")
        out.flush()
