"""HTTP service exposing live sessions: scenario load, lifecycle
control, pacing, interventions, server-sent event stream, and trace/DOT
exports. All payloads carry a top-level ``schema: "v1"`` field.

The service owns pacing and transport only; every planning and
execution decision lives in the session loop.
"""
from __future__ import annotations

import copy
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .bt import tree_to_dot
from .scenario import ScenarioError, scenario_from_dict
from .sim import (
    HeldObjectConflict,
    InterventionEvent,
    RunConfig,
    Session,
    UnresolvableEvent,
    inject,
)

SCHEMA = "v1"
SNAPSHOT_EVERY_TICKS = 20
DEFAULT_EVICTION_S = 3600.0

_CONFIG_FIELDS = (
    "planner", "graph", "bt", "provider_latency_ms", "fault_prob", "seed"
)


def event_json(e: Dict[str, object]) -> str:
    """Canonical serialization shared by the stream and the trace export,
    so concatenated stream payloads equal the trace file byte-for-byte."""
    return json.dumps(e, separators=(",", ":"))


@dataclass
class ManagedSession:
    id: str
    session: Session
    status: str = "idle"  # idle | running | paused | done | failed
    speed: float = 1.0
    lock: threading.Lock = field(default_factory=threading.Lock)
    thread: Optional[threading.Thread] = None
    stop_requested: bool = False
    last_touched: float = field(default_factory=time.monotonic)

    def touch(self):
        self.last_touched = time.monotonic()

    def handle(self) -> Dict[str, object]:
        return {
            "schema": SCHEMA,
            "id": self.id,
            "status": self.status,
            "speed": self.speed,
        }


def _error(status: int, message: str, problems: Optional[List] = None):
    body = {"schema": SCHEMA, "error": message}
    if problems is not None:
        body["problems"] = [{"field": p, "message": m} for p, m in problems]
    return JSONResponse(body, status_code=status)


def _emit_snapshots(sess: Session):
    geo = sess.geometry
    sess.emit(
        "world_snapshot",
        objects={o: list(p) for o, p in sorted(geo.objects.items())},
        regions={r: list(geo.regions[r].center) for r in sorted(geo.regions)},
        trays={
            t.id: {"dock": t.dock, "docks": {d: list(v) for d, v in t.docks.items()}}
            for t in geo.trays.values()
        },
        held=sess.world.gripper,
    )
    snap = sess.bt_snapshot()
    if snap is not None:
        sess.emit("bt_snapshot", tree=snap)
    if sess.plan is not None:
        done = [st.tup.action.key for st in sess.subtrees if st.completed]
        active = [
            st.tup.action.key for st in sess.subtrees if st.running
        ]
        sess.emit("plan_snapshot", actions=sess.plan.action_keys,
                  completed=done, active=active)


def _run_loop(ms: ManagedSession):
    sess = ms.session
    with ms.lock:
        ok = sess.initial_plan()
        if ok:
            _emit_snapshots(sess)
    if not ok:
        ms.status = "failed"
        return
    ticks = 0
    while True:
        if ms.stop_requested:
            return
        if ms.status == "paused":
            time.sleep(0.005)
            continue
        with ms.lock:
            if sess.done:
                break
            sess.tick_once()
            ticks += 1
            if not sess.done and ticks % SNAPSHOT_EVERY_TICKS == 0:
                _emit_snapshots(sess)
        time.sleep(sess.dt / max(ms.speed, 1e-6))
    ms.status = "done" if sess.metrics.success else "failed"


def _check_resolvable(ms: ManagedSession, event: InterventionEvent):
    """Dry-run the intervention on a copy so bad requests fail at the
    API boundary instead of surfacing only in the trace."""
    world_copy = copy.deepcopy(ms.session.world)
    inject(world_copy, event)


def create_app(eviction_s: float = DEFAULT_EVICTION_S) -> FastAPI:
    app = FastAPI(title="ltlbt service", version=SCHEMA)
    registry: Dict[str, ManagedSession] = {}
    registry_lock = threading.Lock()

    def evict_idle():
        now = time.monotonic()
        with registry_lock:
            stale = [
                k for k, ms in registry.items()
                if now - ms.last_touched > eviction_s
                and ms.status in ("idle", "done", "failed")
            ]
            for k in stale:
                del registry[k]

    def get_ms(sid: str) -> Optional[ManagedSession]:
        evict_idle()
        ms = registry.get(sid)
        if ms is not None:
            ms.touch()
        return ms

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        body = await request.json()
        if body.get("schema", SCHEMA) != SCHEMA:
            return _error(422, "unsupported schema",
                          [("schema", f"expected {SCHEMA!r}")])
        if "scenario" not in body:
            return _error(422, "missing scenario", [("scenario", "required")])
        try:
            scenario = scenario_from_dict(body["scenario"])
        except ScenarioError as exc:
            return _error(422, "invalid scenario", exc.problems)
        cfg_doc = body.get("config", {})
        unknown = sorted(set(cfg_doc) - set(_CONFIG_FIELDS))
        if unknown:
            return _error(422, "unknown config fields",
                          [(f"config.{k}", "unknown field") for k in unknown])
        try:
            config = RunConfig(**cfg_doc)
        except (TypeError, ValueError) as exc:
            return _error(422, "invalid config", [("config", str(exc))])
        try:
            script = [
                InterventionEvent.of(float(d["time"]), d["kind"],
                                     **{k: v for k, v in d.items()
                                        if k not in ("time", "kind")})
                for d in body.get("script", [])
            ]
        except (KeyError, ValueError) as exc:
            return _error(422, "invalid script", [("script", str(exc))])
        try:
            session = Session(scenario, config, script)
        except Exception as exc:  # e.g. formula atoms absent from the world
            return _error(422, "invalid scenario", [("formula", str(exc))])
        ms = ManagedSession(id=uuid.uuid4().hex[:12], session=session)
        with registry_lock:
            registry[ms.id] = ms
        return JSONResponse(ms.handle(), status_code=201)

    @app.get("/v1/sessions")
    async def list_sessions():
        evict_idle()
        with registry_lock:
            handles = [ms.handle() for ms in registry.values()]
        return {"schema": SCHEMA, "sessions": handles}

    @app.get("/v1/sessions/{sid}")
    async def get_session(sid: str):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        body = ms.handle()
        body["metrics"] = ms.session.metrics.to_dict()
        body["clock"] = ms.session.world.clock
        return body

    @app.post("/v1/sessions/{sid}/start")
    async def start(sid: str):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        if ms.status != "idle":
            return _error(409, f"cannot start from {ms.status}")
        ms.status = "running"
        ms.thread = threading.Thread(target=_run_loop, args=(ms,), daemon=True)
        ms.thread.start()
        return ms.handle()

    @app.post("/v1/sessions/{sid}/pause")
    async def pause(sid: str):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        if ms.status != "running":
            return _error(409, f"cannot pause from {ms.status}")
        ms.status = "paused"
        return ms.handle()

    @app.post("/v1/sessions/{sid}/resume")
    async def resume(sid: str):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        if ms.status != "paused":
            return _error(409, f"cannot resume from {ms.status}")
        ms.status = "running"
        return ms.handle()

    @app.post("/v1/sessions/{sid}/speed")
    async def set_speed(sid: str, request: Request):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        body = await request.json()
        try:
            multiplier = float(body["multiplier"])
        except (KeyError, TypeError, ValueError):
            return _error(422, "invalid speed", [("multiplier", "number required")])
        if multiplier <= 0:
            return _error(422, "invalid speed", [("multiplier", "must be positive")])
        ms.speed = multiplier
        return ms.handle()

    @app.post("/v1/sessions/{sid}/interventions")
    async def post_intervention(sid: str, request: Request):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        if ms.status not in ("running", "paused"):
            return _error(409, f"session is {ms.status}")
        body = await request.json()
        params = {k: v for k, v in body.items() if k not in ("schema", "kind", "time")}
        with ms.lock:
            apply_at = max(float(body.get("time", 0.0)), ms.session.world.clock)
            try:
                event = InterventionEvent.of(apply_at, body.get("kind", ""), **params)
                _check_resolvable(ms, event)
            except HeldObjectConflict as exc:
                return _error(409, f"held object conflict: {exc}")
            except (UnresolvableEvent, ValueError) as exc:
                return _error(422, str(exc))
            ms.session.pending_events.append(event)
            ms.session.pending_events.sort(key=lambda e: e.time)
        return {"schema": SCHEMA, "accepted": True, "applies_at": apply_at}

    @app.get("/v1/sessions/{sid}/stream")
    async def stream(sid: str, request: Request, last_event_id: Optional[int] = None):
        ms = get_ms(sid)
        if ms is None:
            return _error(410, "session gone")
        header_id = request.headers.get("last-event-id")
        start_at = 0
        if last_event_id is not None:
            start_at = last_event_id + 1
        elif header_id is not None:
            start_at = int(header_id) + 1

        def generate():
            idx = start_at
            while True:
                trace = ms.session.trace
                while idx < len(trace):
                    e = trace[idx]
                    yield (f"id: {idx}\nevent: {e['event']}\n"
                           f"data: {event_json(e)}\n\n")
                    idx += 1
                if ms.status in ("done", "failed") and idx >= len(ms.session.trace):
                    return
                time.sleep(0.005)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/v1/sessions/{sid}/trace")
    async def export_trace(sid: str):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        body = "\n".join(event_json(e) for e in ms.session.trace)
        if body:
            body += "\n"
        return PlainTextResponse(body, media_type="application/x-ndjson")

    @app.get("/v1/sessions/{sid}/export/bt.dot")
    async def export_bt_dot(sid: str):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        with ms.lock:
            sess = ms.session
            if sess.root is None:
                return _error(409, "no behavior tree yet")
            dot = tree_to_dot(sess.root, sess.ctx_epoch)
        return PlainTextResponse(dot, media_type="text/vnd.graphviz")

    @app.get("/v1/sessions/{sid}/export/pa.dot")
    async def export_pa_dot(sid: str):
        ms = get_ms(sid)
        if ms is None:
            return _error(404, "unknown session")
        with ms.lock:
            graph = ms.session.last_graph
            if graph is None:
                return _error(409, "no product graph yet")
            if hasattr(graph, "to_dot"):
                dot = graph.to_dot()
            else:
                lines = ["digraph product {", "  rankdir=LR;"]
                for k in graph.nodes:
                    lines.append(f'  "{k}";')
                for src, outs in graph.edges.items():
                    for dst, action, cost in outs:
                        lines.append(
                            f'  "{src}" -> "{dst}" '
                            f'[label="{action.key} ({cost:.3f})"];'
                        )
                lines.append("}")
                dot = "\n".join(lines)
        return PlainTextResponse(dot, media_type="text/vnd.graphviz")

    return app


def main(host: str = "127.0.0.1", port: int = 8000):
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
