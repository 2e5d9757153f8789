"""HTTP front end for the Fitness Game engine.

A thin FastAPI layer over :mod:`softcrowd.game`: sessions live in process
memory, every mutation of a session is serialized through a per-session
lock, and the wall clock is injected so tests can drive time explicitly.
The hidden optimum never leaves the server before a session has finished.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .game import GameConfig, GameSession


class SessionRequest(BaseModel):
    seed: int | None = None
    n_bots: int | None = None
    bot_gain: float | None = None
    bot_sigma: float | None = None
    bot_beta: float | None = None


class JoinRequest(BaseModel):
    player_id: str | None = None


class GuessRequest(BaseModel):
    player_id: str
    value: float


class _SessionBox:
    def __init__(self, session: GameSession):
        self.session = session
        self.lock = threading.Lock()


def create_app(config: GameConfig | None = None,
               clock: Callable[[], float] | None = None,
               seed_source: Callable[[], int] | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    """Build the game API; ``clock`` and ``seed_source`` are injectable.

    ``ui_dir`` may point at the built browser client (a directory holding
    index.html and dist/); it is then served from the root path so the
    game runs same-origin.
    """
    base_config = config or GameConfig()
    now = clock or time.monotonic
    new_seed = seed_source or (lambda: secrets.randbits(32))
    app = FastAPI(title="softcrowd fitness game")
    sessions: dict[str, _SessionBox] = {}
    registry_lock = threading.Lock()
    app.state.sessions = sessions

    def get_box(session_id: str) -> _SessionBox:
        box = sessions.get(session_id)
        if box is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return box

    @app.post("/sessions")
    def create_session(req: SessionRequest | None = None):
        req = req or SessionRequest()
        cfg = base_config
        if req.n_bots is not None:
            cfg = replace(cfg, n_bots=req.n_bots)
        bot_overrides = {k: v for k, v in
                         {"gain": req.bot_gain, "sigma": req.bot_sigma,
                          "beta": req.bot_beta}.items() if v is not None}
        if bot_overrides:
            cfg = replace(cfg, bot_params=replace(cfg.bot_params, **bot_overrides))
        seed = req.seed if req.seed is not None else new_seed()
        session_id = secrets.token_hex(8)
        with registry_lock:
            sessions[session_id] = _SessionBox(
                GameSession(session_id, cfg, seed=seed, created_at=now()))
        return {"id": session_id}

    @app.post("/sessions/{session_id}/players")
    def join(session_id: str, req: JoinRequest | None = None):
        box = get_box(session_id)
        req = req or JoinRequest()
        with box.lock:
            try:
                player_id = box.session.add_player(req.player_id)
            except ValueError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"player_id": player_id}

    @app.post("/sessions/{session_id}/start")
    def start(session_id: str):
        box = get_box(session_id)
        with box.lock:
            try:
                box.session.start(now())
            except ValueError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            return {"phase": box.session.phase,
                    "clock": box.session.clock(now())}

    @app.post("/sessions/{session_id}/guess")
    def guess(session_id: str, req: GuessRequest):
        box = get_box(session_id)
        with box.lock:
            try:
                return box.session.submit_guess(req.player_id, req.value, now())
            except KeyError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except ValueError as exc:
                status = 409 if "session over" in str(exc) else 400
                raise HTTPException(status_code=status, detail=str(exc)) from exc

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str, player: str | None = None):
        box = get_box(session_id)
        with box.lock:
            try:
                return box.session.state_view(now(), player)
            except KeyError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/sessions/{session_id}/export.csv",
             response_class=PlainTextResponse)
    def export_csv(session_id: str):
        box = get_box(session_id)
        with box.lock:
            box.session.advance(now())
            try:
                return PlainTextResponse(box.session.export_csv(),
                                         media_type="text/csv")
            except ValueError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.get("/sessions/{session_id}/export.meta.json")
    def export_meta(session_id: str):
        box = get_box(session_id)
        with box.lock:
            box.session.advance(now())
            try:
                return box.session.export_metadata()
            except ValueError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
