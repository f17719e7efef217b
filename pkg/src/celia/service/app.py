"""HTTP + WebSocket surface over the pipeline runtime."""
from __future__ import annotations

import asyncio
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import RedirectResponse
from fastapi.staticfiles import StaticFiles

from ..geometry import Vec3
from ..simulator import ScenarioError
from ..stream import DecodeError
from .config import ServiceConfig
from .runtime import ServiceRuntime, SourceBusy
from . import schemas as S

_PUSH_POLL_SECONDS = 0.04


def _state_response(runtime: ServiceRuntime) -> S.StateResponse:
    snap = runtime.engine.latest
    kb = runtime.engine.kb
    return S.StateResponse(
        frame=snap.frame,
        time=snap.time,
        entities=[S.entity_model(tr, kb.owner_of(tr.id)) for tr in snap.tracks],
        relations=[S.relation_model(r) for r in snap.stable],
        regions=[S.region_model(r) for r in runtime.engine.regions],
        alerts=[S.alert_model(a) for a in snap.alerts],
        attention=S.AttentionModel(mode=snap.attention_mode, deadline=snap.attention_deadline),
        transcript_len=snap.transcript_len,
    )


def create_app(config: ServiceConfig | None = None, runtime: ServiceRuntime | None = None) -> FastAPI:
    runtime = runtime or ServiceRuntime(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        runtime.start()
        try:
            yield
        finally:
            runtime.stop()

    app = FastAPI(title="celia", version="0.1.0", lifespan=lifespan)
    app.state.runtime = runtime

    @app.get("/healthz", response_model=S.HealthResponse)
    def healthz():
        snap = runtime.engine.latest
        return S.HealthResponse(status="ok", time=snap.time, frame=snap.frame)

    @app.get("/state", response_model=S.StateResponse)
    def state():
        return _state_response(runtime)

    @app.get("/objects/{object_id}", response_model=S.ObjectDetailResponse)
    def object_detail(object_id: str):
        detail = runtime.object_detail(object_id)
        if detail is None:
            raise HTTPException(status_code=404, detail=f"unknown entity '{object_id}'")
        fact = detail["fact"]
        track = detail["track"]
        return S.ObjectDetailResponse(
            id=object_id,
            label=(fact.label if fact else (track.label if track else None)),
            owner=detail["owner"],
            last_seen_at=fact.last_seen_at if fact else None,
            last_centroid=(
                [fact.last_centroid.x, fact.last_centroid.y, fact.last_centroid.z] if fact else None
            ),
            last_touched_by=fact.last_touched_by if fact else None,
            last_touched_at=fact.last_touched_at if fact else None,
            relations=[S.relation_model(r) for r in (fact.last_stable_relations if fact else ())],
            entity=S.entity_model(track, detail["owner"]) if track else None,
        )

    @app.get("/alerts", response_model=list[S.AlertModel])
    def alerts():
        return [S.alert_model(a) for a in runtime.engine.latest.alerts]

    @app.get("/transcript", response_model=list[S.TranscriptEntryModel])
    def transcript():
        return [
            S.TranscriptEntryModel(t=e.t, speaker=e.speaker, text=e.text, answer=S.answer_model(e.answer))
            for e in runtime.transcript()
        ]

    @app.post("/query", response_model=S.QueryResponse)
    def query(req: S.QueryRequest):
        if not req.text.strip():
            raise HTTPException(status_code=400, detail="empty query text")
        result = runtime.query(req.text, speaker=req.speaker, at=req.time)
        return S.QueryResponse(
            answered=result["answered"],
            reason=result.get("reason"),
            time=result["time"],
            text=result.get("text"),
            grounded_object=result.get("grounded_object"),
            relations_used=[S.relation_model(r) for r in result.get("relations_used", [])],
        )

    @app.post("/events", response_model=S.EventResponse)
    def events(req: S.EventRequest):
        if req.kind not in ("keyword", "gaze", "utterance"):
            raise HTTPException(status_code=400, detail=f"unknown event kind '{req.kind}'")
        if req.kind == "utterance" and not (req.text or "").strip():
            raise HTTPException(status_code=400, detail="utterance needs text")
        result = runtime.inject_event(req.kind, speaker=req.speaker, text=req.text, at=req.time)
        answer = result.get("answer")
        return S.EventResponse(
            accepted=True,
            time=result["time"],
            answer=S.answer_model(answer) if answer is not None else None,
        )

    @app.post("/scenario", response_model=S.ScenarioResponse)
    def scenario(req: S.ScenarioRequest):
        if req.mode not in ("frames", "heightmaps", "interactive"):
            raise HTTPException(status_code=400, detail=f"unknown mode '{req.mode}'")
        if not os.path.isfile(req.path):
            raise HTTPException(status_code=400, detail=f"no such scenario file: {req.path}")
        try:
            result = runtime.run_scenario(req.path, mode=req.mode, speed=req.speed, record=req.record)
        except SourceBusy as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        except ScenarioError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return S.ScenarioResponse(
            status=result["status"],
            name=result.get("name"),
            frames=result.get("frames"),
            transcript=[
                S.TranscriptEntryModel(t=e.t, speaker=e.speaker, text=e.text, answer=S.answer_model(e.answer))
                for e in result.get("transcript", [])
            ],
        )

    @app.post("/replay", response_model=S.ReplayResponse)
    def replay(req: S.ReplayRequest):
        if not os.path.isfile(req.path):
            raise HTTPException(status_code=400, detail=f"no such recording: {req.path}")
        try:
            result = runtime.run_replay(req.path, speed=req.speed)
        except SourceBusy as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        except DecodeError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return S.ReplayResponse(
            status=result["status"],
            frames=result.get("frames"),
            elapsed=result.get("elapsed"),
            fps=result.get("fps"),
        )

    @app.post("/record", response_model=S.RecordResponse)
    def record(req: S.RecordRequest):
        try:
            result = runtime.record(req.path, req.stop)
        except (RuntimeError, ValueError) as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return S.RecordResponse(**result)

    @app.post("/sim/move")
    def sim_move(req: S.MoveRequest):
        if len(req.position) != 3:
            raise HTTPException(status_code=400, detail="position must be [x, y, z]")
        try:
            moved = runtime.move_entity(req.id, Vec3(*req.position))
        except SourceBusy as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        if not moved:
            raise HTTPException(status_code=404, detail=f"unknown entity '{req.id}'")
        return {"moved": True}

    @app.post("/snapshot")
    def snapshot(req: S.SnapshotRequest):
        runtime.snapshot_to(req.path)
        return {"written": req.path}

    @app.websocket("/frames")
    async def frames(ws: WebSocket):
        await ws.accept()
        cursor = runtime.feed_seq
        last_version = -1
        try:
            while True:
                version = runtime.feed_seq
                if version != last_version:
                    last_version = version
                    await ws.send_json({"type": "state", **_state_response(runtime).model_dump()})
                for seq, payload in runtime.feed_since(cursor):
                    cursor = seq
                    await ws.send_json(payload)
                await asyncio.sleep(_PUSH_POLL_SECONDS)
        except (WebSocketDisconnect, RuntimeError):
            return

    ui_dist = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(
        os.path.dirname(os.path.abspath(__file__))))), "frontend", "dist")
    if os.path.isdir(ui_dist):
        app.mount("/ui", StaticFiles(directory=ui_dist, html=True), name="ui")

        @app.get("/", include_in_schema=False)
        def index():
            return RedirectResponse(url="/ui/")

    return app
