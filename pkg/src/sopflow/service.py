"""HTTP front end: session lifecycle plus a server-sent-events feed.

Each session runs its engine loop on a worker thread and talks to the user
through a queue-backed channel. The event feed replays the session's buffered
events and then follows live ones; reconnecting clients resume from the last
event id they saw, so no frame is delivered twice.
"""

from __future__ import annotations

import json
import threading
import time

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from . import assets, retrieval
from .backends import make_backend
from .engine import RUNNING, Session, start_session
from .environments import QueueUserChannel, StubKnowledge, load_registry
from .errors import LintFailure, ProviderUnavailable, SchemaError, SessionClosed, SopError
from .parser import render_sop

_POLL_INTERVAL = 0.05


class ManagedSession:
    """One live session plus the thread and channel that drive it."""

    def __init__(self, session: Session, channel: QueueUserChannel):
        self.session = session
        self.channel = channel
        self.thread = threading.Thread(
            target=session.run_to_completion, name=f"session-{session.id}", daemon=True
        )

    def start(self) -> None:
        self.thread.start()


class SessionManager:
    def __init__(self, config: dict):
        self.config = config
        self.repo = assets.load_repository()
        self.index = retrieval.build_index(
            self.repo,
            retrieval.HashingEmbeddingProvider(),
            threshold=config["retrieval"]["threshold"],
        )
        self.knowledge = StubKnowledge(assets.load_knowledge())
        self.turn_timeout = float(config.get("engine", {}).get("turn_timeout", 600.0))
        self.sessions: dict[str, ManagedSession] = {}
        self._lock = threading.Lock()

    def create(self, sop_name: str, api_blueprint: dict | None = None) -> ManagedSession:
        if sop_name not in assets.workflow_names():
            raise HTTPException(404, f"unknown workflow {sop_name!r}")
        try:
            backend = make_backend(self.config)
        except (ProviderUnavailable, ValueError) as exc:
            raise HTTPException(503, str(exc)) from None
        try:
            registry = load_registry(api_blueprint or assets.load_registry_blueprint())
        except (SchemaError, SopError) as exc:
            raise HTTPException(422, f"bad api blueprint: {exc}") from None
        workflow = assets.load_workflow(sop_name)
        channel = QueueUserChannel(timeout=self.turn_timeout)
        try:
            session = start_session(
                workflow,
                self.repo,
                backend,
                self.index,
                registry.session(),
                self.knowledge,
                channel,
                self.config,
                first_turn=False,  # the worker thread runs every turn
            )
        except LintFailure as exc:
            raise HTTPException(503, f"workflow failed lint: {exc}") from None
        managed = ManagedSession(session, channel)
        with self._lock:
            self.sessions[session.id] = managed
        managed.start()
        return managed

    def get(self, session_id: str) -> ManagedSession:
        managed = self.sessions.get(session_id)
        if managed is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return managed


def _sse_frame(event) -> str:
    return f"id: {event.seq}\nevent: {event.kind}\ndata: {event.to_json()}\n\n"


def create_app(config: dict | None = None) -> FastAPI:
    config = config or assets.load_default_config()
    app = FastAPI(title="sopflow", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    manager = SessionManager(config)
    app.state.manager = manager

    @app.get("/sops")
    def list_sops():
        out = []
        for name in assets.workflow_names():
            workflow = assets.load_workflow(name)
            out.append(
                {
                    "name": name,
                    "actions": len(workflow.action_labels()),
                    "text": render_sop(workflow),
                }
            )
        return out

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        sop_name = body.get("sop")
        if not isinstance(sop_name, str) or not sop_name:
            raise HTTPException(422, "body must carry a workflow name under 'sop'")
        managed = manager.create(sop_name, body.get("api"))
        return {"session_id": managed.session.id, "sop": sop_name}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str, debug: int = 0):
        managed = manager.get(session_id)
        session = managed.session
        payload = {
            "session_id": session.id,
            "sop": session.workflow.name,
            "status": session.status,
            "reason": session.reason,
            "awaiting_input": session.awaiting_input,
            "event_count": len(session.events),
        }
        if debug:
            payload["state_trace"] = session.state_trace
        return payload

    @app.post("/sessions/{session_id}/reply", status_code=202)
    def post_reply(session_id: str, body: dict):
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            raise HTTPException(422, "body must carry non-empty 'text'")
        managed = manager.get(session_id)
        if managed.session.done or not managed.session.awaiting_input:
            raise HTTPException(409, "session is not awaiting input")
        try:
            managed.channel.push_reply(text)
        except SessionClosed:
            raise HTTPException(409, "session is closed") from None
        return {"accepted": True}

    @app.get("/sessions/{session_id}/events")
    def event_stream(session_id: str, request: Request, last_event_id: int | None = None):
        managed = manager.get(session_id)
        session = managed.session
        header_value = request.headers.get("last-event-id")
        cursor = last_event_id if last_event_id is not None else 0
        if header_value is not None:
            try:
                cursor = int(header_value)
            except ValueError:
                pass

        def frames(cursor: int):
            # seq numbers are gapless from 1, so a cursor holding the last
            # seen seq doubles as the list index of the next unseen event
            while True:
                events = session.events  # engine only ever appends
                while cursor < len(events):
                    event = events[cursor]
                    cursor += 1
                    yield _sse_frame(event)
                    if event.kind == "session_terminated":
                        return
                if session.status != RUNNING and cursor >= len(session.events):
                    return
                time.sleep(_POLL_INTERVAL)

        return StreamingResponse(
            frames(cursor),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    return app


def serve(config: dict | None = None, host: str | None = None, port: int | None = None):
    """Blocking entry point used by the command line."""
    import uvicorn

    config = config or assets.load_default_config()
    service_cfg = config.get("service", {})
    uvicorn.run(
        create_app(config),
        host=host or service_cfg.get("host", "127.0.0.1"),
        port=int(port or service_cfg.get("port", 8731)),
        log_level="warning",
    )


def parse_sse_stream(lines):
    """(id, event, data) tuples from an iterable of SSE text lines.

    Shared by the tests and any Python client; tolerates keep-alive comments.
    """
    current: dict[str, str] = {}
    for line in lines:
        line = line.rstrip("\n")
        if not line:
            if "data" in current:
                yield (
                    int(current.get("id", 0)),
                    current.get("event", "message"),
                    json.loads(current["data"]),
                )
            current = {}
            continue
        if line.startswith(":"):
            continue
        key, _, value = line.partition(":")
        current[key.strip()] = value.lstrip()
