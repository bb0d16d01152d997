"""HTTP/WebSocket service around one engine state.

Endpoints:
  GET  /state    — current snapshot
  POST /command  — submit one command as ``{"text": "..."}``
  WS   /events   — version notifications, one per successful mutation

All mutations run under a single lock, so observers only ever see the
state between commands.  Snapshots carry a monotonically increasing
version and a schema number; a WebSocket client receives the current
version on connect and one ``{"version": n}`` message per successful
mutating command afterwards.
"""

import asyncio
import os

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from . import lang
from .engine import EngineState, exec_command

SCHEMA_VERSION = 1


class CommandBody(BaseModel):
    text: str


def _span_json(span):
    if span is None:
        return None
    return {"start": span.start, "end": span.end}


def _goal_json(sess):
    out = []
    for i, g in enumerate(sess.goals, 1):
        out.append({
            "id": g.node_id,
            "pre": lang.pretty_op(g.pre_ast),
            "post": lang.pretty_op(g.post_ast),
            "text": lang.goal_text(g.pre_ast, g.post_ast),
            "current": i == sess.current,
        })
    return out


def snapshot(state, version, last=None):
    sess = state.session
    session_json = None
    if sess is not None:
        session_json = {
            "name": sess.name,
            "completed": sess.completed,
            "ambient": list(sess.ambient.names),
            "goals": _goal_json(sess),
            "goals_text": sess.display(),
            "tree": sess.root.to_dict(),
        }
    diagnostics = None
    if last is not None:
        diagnostics = {
            "ok": last.ok,
            "kind": last.kind,
            "message": last.message,
            "span": _span_json(last.span),
        }
    return {
        "schema": SCHEMA_VERSION,
        "version": version,
        "env": state.env.names(),
        "session": session_json,
        "diagnostics": diagnostics,
    }


def create_app(config=None, web_dir=None):
    app = FastAPI(title="qrefine session service")
    app.state.engine = EngineState(config)
    app.state.version = 0
    app.state.last_result = None
    app.state.lock = asyncio.Lock()
    app.state.clients = []

    def current_snapshot():
        return snapshot(app.state.engine, app.state.version,
                        app.state.last_result)

    def broadcast(version):
        for queue in list(app.state.clients):
            queue.put_nowait(version)

    @app.get("/state")
    async def get_state():
        async with app.state.lock:
            return current_snapshot()

    @app.post("/command")
    async def post_command(body: CommandBody):
        async with app.state.lock:
            commands, diagnostics = lang.parse_script(body.text)
            real = [(ast, span) for ast, span in commands]
            if not real and not diagnostics:
                return {
                    "ok": False,
                    "error": {"message": "empty command", "span": None},
                    "result": None,
                    "snapshot": current_snapshot(),
                }
            if len(real) != 1:
                first_bad = diagnostics[0] if diagnostics else None
                message = (first_bad.message if first_bad
                           else "submit exactly one command at a time")
                return {
                    "ok": False,
                    "error": {"message": message,
                              "span": _span_json(first_bad.span)
                              if first_bad else None},
                    "result": None,
                    "snapshot": current_snapshot(),
                }
            ast, span = real[0]
            if ast is None:
                diag = diagnostics[0]
                return {
                    "ok": False,
                    "error": {"message": diag.message,
                              "span": _span_json(diag.span)},
                    "result": None,
                    "snapshot": current_snapshot(),
                }
            result = exec_command(app.state.engine, ast, span)
            app.state.last_result = result
            if result.ok and result.mutated:
                app.state.version += 1
                broadcast(app.state.version)
            payload = {
                "ok": result.ok,
                "error": None if result.ok else {
                    "message": result.message,
                    "span": _span_json(result.span),
                },
                "result": {
                    "kind": result.kind,
                    "message": result.message,
                    "goals": result.goals,
                    "value": result.value
                    if isinstance(result.value, (bool, str)) else None,
                    "mutated": result.mutated,
                },
                "snapshot": current_snapshot(),
            }
            return payload

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        queue = asyncio.Queue()
        app.state.clients.append(queue)
        try:
            await ws.send_json({"version": app.state.version})
            while True:
                version = await queue.get()
                await ws.send_json({"version": version})
        except WebSocketDisconnect:
            pass
        finally:
            if queue in app.state.clients:
                app.state.clients.remove(queue)

    web_dir = web_dir or os.environ.get("QREFINE_WEB_DIR")
    if web_dir and os.path.isdir(web_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=web_dir, html=True),
                  name="ui")

    return app
