"""Local HTTP service for steering live runs.

Exposes the event stream (server-sent events with replay + live tail),
approval resolution, message injection, agent switching, and interrupt.
Every mutation here has an identical-effect REPL counterpart. Binds
loopback by default; require a bearer token before binding elsewhere.
"""

from __future__ import annotations

import json
import queue
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .app import App
from .tracing import render_jsonl

STREAM_POLL_SECONDS = 0.2


class CreateRunBody(BaseModel):
    agent: str
    task: str
    max_interactions: int = 10
    run_id: str | None = None


class DecisionBody(BaseModel):
    decision: str  # approve | deny


class MessageBody(BaseModel):
    text: str


class AgentBody(BaseModel):
    name: str


def make_app(app: App, token: str | None = None, static_dir: str | Path | None = None) -> FastAPI:
    api = FastAPI(title="secagent control API", version="0.1.0")

    if token is not None:

        @api.middleware("http")
        async def _require_token(request: Request, call_next):
            if request.headers.get("Authorization") != f"Bearer {token}":
                return PlainTextResponse("unauthorized", status_code=401)
            return await call_next(request)

    def _handle(run_id: str):
        try:
            return app.runs.get(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown run: {run_id}")

    @api.get("/runs")
    def list_runs():
        return [handle.to_dict() for handle in app.runs.list()]

    @api.post("/runs")
    def create_run(body: CreateRunBody):
        if not app.agents.has(body.agent):
            raise HTTPException(
                status_code=404,
                detail={"error": f"unknown agent: {body.agent}",
                        "roster": app.agents.names()},
            )
        handle = app.runs.start(
            body.agent, body.task,
            max_interactions=body.max_interactions, run_id=body.run_id,
        )
        return handle.to_dict()

    @api.get("/runs/{run_id}/state")
    def run_state(run_id: str):
        handle = _handle(run_id)
        state = handle.to_dict()
        pending = app.broker.pending_for(run_id)
        state["pending_approval"] = pending.to_dict() if pending else None
        return state

    @api.get("/runs/{run_id}/events")
    def run_events(run_id: str, request: Request, from_: int = 0):
        handle = _handle(run_id)
        start = int(request.query_params.get("from", from_))

        def _generate():
            live: "queue.Queue" = queue.Queue()
            listener = live.put
            app.tracer.subscribe(run_id, listener)
            try:
                sent = start
                # Replay the recorded prefix, then follow the live tail.
                for event in app.tracer.events(run_id):
                    if event.sequence >= sent:
                        yield _sse(event)
                        sent = event.sequence + 1
                while True:
                    try:
                        event = live.get(timeout=STREAM_POLL_SECONDS)
                    except queue.Empty:
                        if handle.done.is_set() and live.empty():
                            break
                        continue
                    if event.sequence >= sent:
                        yield _sse(event)
                        sent = event.sequence + 1
                yield "event: end\ndata: {}\n\n"
            finally:
                app.tracer.unsubscribe(run_id, listener)

        return StreamingResponse(_generate(), media_type="text/event-stream")

    @api.get("/runs/{run_id}/approvals/pending")
    def pending_approval(run_id: str):
        _handle(run_id)
        pending = app.broker.pending_for(run_id)
        return pending.to_dict() if pending else None

    @api.post("/runs/{run_id}/approvals/{request_id}")
    def resolve_approval(run_id: str, request_id: str, body: DecisionBody):
        _handle(run_id)
        request = app.broker.get(request_id)
        if request is None or request.run_id != run_id:
            raise HTTPException(status_code=404, detail=f"unknown request: {request_id}")
        try:
            resolved = app.broker.resolve(request_id, body.decision)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return resolved.to_dict()

    @api.post("/runs/{run_id}/messages")
    def inject_message(run_id: str, body: MessageBody):
        _handle(run_id)
        app.runs.inject_message(run_id, body.text)
        return {"queued": True}

    @api.post("/runs/{run_id}/agent")
    def switch_agent(run_id: str, body: AgentBody):
        _handle(run_id)
        if not app.agents.has(body.name):
            raise HTTPException(
                status_code=404,
                detail={"error": f"unknown agent: {body.name}",
                        "roster": app.agents.names()},
            )
        app.runs.switch_agent(run_id, body.name)
        return {"queued": True}

    @api.post("/runs/{run_id}/interrupt")
    def interrupt(run_id: str):
        _handle(run_id)
        app.runs.interrupt(run_id)
        return {"interrupted": True}

    @api.get("/runs/{run_id}/trace")
    def trace(run_id: str, normalize: int = 0):
        if not app.tracer.has_run(run_id):
            raise HTTPException(status_code=404, detail=f"unknown run: {run_id}")
        return PlainTextResponse(
            render_jsonl(app.tracer.events(run_id), normalize=bool(normalize))
        )

    @api.get("/agents")
    def list_agents():
        return app.agents.names()

    if static_dir is not None and Path(static_dir).is_dir():
        api.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return api


def _sse(event) -> str:
    return (
        f"id: {event.sequence}\nevent: trace\n"
        f"data: {json.dumps(event.to_dict())}\n\n"
    )


def main(argv: list[str] | None = None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="secagent-control")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--token", default=None)
    parser.add_argument("--dotenv", default=".env")
    parser.add_argument("--static", default=None, help="web console bundle dir")
    options = parser.parse_args(argv)

    if options.host not in ("127.0.0.1", "localhost", "::1") and not options.token:
        raise SystemExit("refusing to bind beyond loopback without --token")

    from .config import load_config

    app = App(config=load_config(options.dotenv))
    api = make_app(app, token=options.token, static_dir=options.static)
    uvicorn.run(api, host=options.host, port=options.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
