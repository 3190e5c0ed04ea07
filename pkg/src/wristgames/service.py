"""Session service: catalog REST API plus a live WebSocket session stream.

The server is authoritative: clients send raw HandFrames (or ask the server
to pull from a synthetic source) and the engine ticks server-side at a fixed
timestep driven by frame timestamps, so a live session is exactly as
deterministic and replayable as a headless one. Every finished or stopped
session is persisted as a `.wrsession` file that `replay --verify` accepts.

Storage is a plain directory tree (profiles/, levels/, sessions/<patient>/)
with atomic write-rename; no database. One deployment = one clinic laptop.

Wire messages (JSON, one object per WebSocket message) all carry session_id
and a per-stream, gap-free, increasing seq:
    client -> server: InputFrame{frame}, StopSession{}
    server -> client: StateSnapshot{...}, Event{event}, Error{code, message}
Sessions start over REST (POST /sessions/start) and stream over
WS /sessions/{id}/stream.
"""

from __future__ import annotations

import asyncio
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Response, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware

from .engine import RUNNING, GameState
from .jsonio import SchemaError, canonical_dumps, parse_json
from .kinematics import HandFrame
from .levels import Level, load_level, save_level, validate_level
from .profiles import PatientProfile, load_profile, save_profile, validate_profile
from .runner import STOP_SOURCE_ENDED, SessionRunner, make_header, record_frame_result, replay as replay_record
from .session import (
    DigestMismatch,
    Recorder,
    ReplayDivergence,
    SessionRecord,
    UnknownChannel,
    export_timeseries,
    load_record,
    statistics,
)
from .sources import SyntheticSource, SyntheticSpec

log = logging.getLogger("wristgames.service")

STORAGE_ENV = "WRISTGAMES_STORAGE"

STOP_DISCONNECTED = "Disconnected"
STOP_USER = "UserStop"
STOP_TIMEOUT = "Timeout"

SESSION_HARD_CAP_SLACK_S = 10.0

LOBBY = "Lobby"


class Storage:
    """profiles/, levels/, sessions/<patient_id>/ under one root; atomic writes."""

    def __init__(self, root: Path):
        self.root = Path(root)
        for sub in ("profiles", "levels", "sessions"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    def _atomic_write(self, path: Path, text: str) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)

    # profiles
    def list_profiles(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "profiles").glob("*.json"))

    def profile_path(self, profile_id: str) -> Path:
        return self.root / "profiles" / f"{_safe_id(profile_id)}.json"

    def load_profile(self, profile_id: str) -> Optional[PatientProfile]:
        path = self.profile_path(profile_id)
        if not path.exists():
            return None
        return load_profile(path.read_text(encoding="utf-8"))

    def save_profile(self, profile_id: str, profile: PatientProfile) -> None:
        self._atomic_write(self.profile_path(profile_id), save_profile(profile) + "\n")

    # levels
    def list_levels(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "levels").glob("*.json"))

    def level_path(self, level_id: str) -> Path:
        return self.root / "levels" / f"{_safe_id(level_id)}.json"

    def load_level(self, level_id: str) -> Optional[Level]:
        path = self.level_path(level_id)
        if not path.exists():
            return None
        return load_level(path.read_text(encoding="utf-8"))

    def save_level(self, level_id: str, level: Level) -> None:
        self._atomic_write(self.level_path(level_id), save_level(level) + "\n")

    # sessions
    def session_path(self, patient_id: str, session_id: str) -> Path:
        patient_dir = self.root / "sessions" / _safe_id(patient_id)
        patient_dir.mkdir(parents=True, exist_ok=True)
        return patient_dir / f"{_safe_id(session_id)}.wrsession"

    def find_session(self, session_id: str) -> Optional[Path]:
        matches = list((self.root / "sessions").glob(f"*/{_safe_id(session_id)}.wrsession"))
        return matches[0] if matches else None

    def list_sessions(self, patient_id: Optional[str] = None) -> list[dict]:
        pattern = f"{_safe_id(patient_id)}/*.wrsession" if patient_id else "*/*.wrsession"
        out = []
        for path in sorted((self.root / "sessions").glob(pattern)):
            meta = _session_meta(path)
            if meta is not None:
                out.append(meta)
        return out


def _safe_id(identifier: str) -> str:
    if not identifier or any(c in identifier for c in "/\\.\0"):
        raise HTTPException(status_code=400, detail=f"bad identifier {identifier!r}")
    return identifier


def _session_meta(path: Path) -> Optional[dict]:
    """Listing metadata from the header and footer lines only (no full verify)."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
        text = data.decode("utf-8")
        lines = text.strip("\n").split("\n")
        header = parse_json(lines[0], "header")
        footer = None
        if len(lines) > 1:
            _, _, payload = lines[-1].partition(" ")
            maybe = parse_json(payload, "footer") if payload else None
            if isinstance(maybe, dict) and maybe.get("type") == "footer":
                footer = maybe
        return {
            "session_id": path.stem,
            "patient_id": header.get("patient_id"),
            "game_kind": header.get("game_kind"),
            "mode": header.get("mode"),
            "started_at": header.get("started_at"),
            "final_score": footer.get("final_score") if footer else None,
            "status": footer.get("status") if footer else "InProgress",
            "status_reason": footer.get("status_reason") if footer else None,
        }
    except (OSError, ValueError, SchemaError):
        return None


@dataclass
class LiveSession:
    session_id: str
    kind: str
    mode: str
    level: Level
    profile: PatientProfile
    runner: SessionRunner
    recorder: Recorder
    source_spec: Optional[dict] = None
    source_rate: float = 100.0
    source_seed: int = 0
    snapshot_every: int = 1
    state_name: str = LOBBY
    seq: int = 0
    started_monotonic: float = field(default_factory=time.monotonic)
    persisted: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def hard_cap_exceeded(self) -> bool:
        return time.monotonic() - self.started_monotonic > self.profile.session_length + SESSION_HARD_CAP_SLACK_S


def snapshot_payload(session: LiveSession, state: GameState) -> dict:
    return {
        "type": "StateSnapshot",
        "session_id": session.session_id,
        "seq": session.next_seq(),
        "tick": state.tick_count,
        "elapsed_ms": state.elapsed_ms,
        "play_ms": state.play_ms,
        "avatar": state.avatar.to_dict(),
        "score": state.score,
        "status": state.status,
        "status_reason": state.status_reason,
        "scalars": state.scalars.to_dict(),
        "next_element_index": state.next_element_index,
        "distance_status": state.last_distance_status,
    }


def event_payload(session: LiveSession, event) -> dict:
    return {
        "type": "Event",
        "session_id": session.session_id,
        "seq": session.next_seq(),
        "event": event.to_dict(),
    }


def error_payload(session_id: str, seq: int, code: str, message: str) -> dict:
    return {"type": "Error", "session_id": session_id, "seq": seq, "code": code, "message": message}


def create_app(
    storage_root: Optional[str] = None,
    tick_ms: float = 10.0,
    snapshot_every: int = 1,
    disconnect_grace_s: float = 5.0,
) -> FastAPI:
    root = Path(storage_root or os.environ.get(STORAGE_ENV) or "./wristgames-data")
    storage = Storage(root)
    app = FastAPI(title="wristgames session service")
    # the browser client is served as static files from another origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    live: dict[str, LiveSession] = {}
    registry_lock = threading.Lock()

    def _finalize(session: LiveSession, status: str, reason: Optional[str]) -> None:
        with session.lock:
            if session.persisted:
                return
            session.persisted = True
            state = session.runner.state
            if state.status != RUNNING:
                status, reason = state.status, state.status_reason
            session.recorder.finalize(state.score, status, reason)
            session.state_name = status
        log.info("session %s persisted: %s (%s)", session.session_id, status, reason)

    # --- catalog ---------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"ok": True, "live_sessions": len(live)}

    @app.get("/profiles")
    def list_profiles():
        return {"profiles": storage.list_profiles()}

    @app.get("/profiles/{profile_id}")
    def get_profile(profile_id: str):
        profile = _catch_schema(lambda: storage.load_profile(profile_id))
        if profile is None:
            raise HTTPException(status_code=404, detail=f"unknown profile {profile_id!r}")
        return profile.to_dict()

    @app.put("/profiles/{profile_id}")
    def put_profile(profile_id: str, body: dict):
        try:
            profile = PatientProfile.from_dict(body)
        except SchemaError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        violations = validate_profile(profile)
        if violations:
            raise HTTPException(status_code=422, detail=[str(v) for v in violations])
        storage.save_profile(profile_id, profile)
        return {"ok": True, "profile_id": profile_id}

    @app.get("/levels")
    def list_levels():
        return {"levels": storage.list_levels()}

    @app.get("/levels/{level_id}")
    def get_level(level_id: str):
        level = _catch_schema(lambda: storage.load_level(level_id))
        if level is None:
            raise HTTPException(status_code=404, detail=f"unknown level {level_id!r}")
        return level.to_dict()

    @app.put("/levels/{level_id}")
    def put_level(level_id: str, body: dict, profile_id: Optional[str] = Query(default=None)):
        try:
            level = Level.from_dict(body)
        except SchemaError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        profile = PatientProfile()
        if profile_id is not None:
            stored = storage.load_profile(profile_id)
            if stored is None:
                raise HTTPException(status_code=404, detail=f"unknown profile {profile_id!r}")
            profile = stored
        violations = validate_level(level, profile)
        if violations:
            raise HTTPException(status_code=422, detail=[str(v) for v in violations])
        storage.save_level(level_id, level)
        return {"ok": True, "level_id": level_id}

    # --- sessions --------------------------------------------------------------

    @app.get("/sessions")
    def list_sessions(patient_id: Optional[str] = Query(default=None)):
        return {"sessions": storage.list_sessions(patient_id)}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        path = storage.find_session(session_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        meta = _session_meta(path)
        if meta is None:
            raise HTTPException(status_code=500, detail="session file unreadable")
        return meta

    def _load_session_record(session_id: str) -> SessionRecord:
        path = storage.find_session(session_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        try:
            return load_record(str(path))
        except (DigestMismatch, SchemaError, ValueError) as exc:
            raise HTTPException(status_code=409, detail=f"session file failed integrity check: {exc}")

    @app.get("/sessions/{session_id}/stats")
    def session_stats(session_id: str):
        return statistics(_load_session_record(session_id)).to_dict()

    @app.get("/sessions/{session_id}/export")
    def session_export(session_id: str, channel: str = Query(...)):
        try:
            csv = export_timeseries(_load_session_record(session_id), channel)
        except UnknownChannel as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return Response(content=csv, media_type="text/csv")

    @app.get("/sessions/{session_id}/replay")
    def session_replay(session_id: str, every: int = Query(default=10, ge=1)):
        record = _load_session_record(session_id)
        states = []
        events = []
        try:
            for result in replay_record(record):
                for event in result.events:
                    events.append({"tick": result.tick, "event": event.to_dict()})
                if result.tick % every == 0:
                    state = result.state
                    states.append({
                        "tick": state.tick_count,
                        "elapsed_ms": state.elapsed_ms,
                        "play_ms": state.play_ms,
                        "avatar": state.avatar.to_dict(),
                        "score": state.score,
                        "status": state.status,
                        "next_element_index": state.next_element_index,
                        "distance_status": state.last_distance_status,
                    })
        except ReplayDivergence as exc:
            raise HTTPException(status_code=409, detail=f"replay divergence: {exc}")
        return {
            "header": record.header.to_dict(),
            "footer": record.footer.to_dict(),
            "states": states,
            "events": events,
            "verified": True,
        }

    @app.post("/sessions/start")
    def start_session(body: dict):
        profile_id = body.get("profile_id")
        level_id = body.get("level_id")
        if not isinstance(profile_id, str) or not isinstance(level_id, str):
            raise HTTPException(status_code=422, detail="profile_id and level_id are required")
        profile = _catch_schema(lambda: storage.load_profile(profile_id))
        if profile is None:
            raise HTTPException(status_code=404, detail=f"unknown profile {profile_id!r}")
        level = _catch_schema(lambda: storage.load_level(level_id))
        if level is None:
            raise HTTPException(status_code=404, detail=f"unknown level {level_id!r}")
        violations = validate_profile(profile) + validate_level(level, profile)
        if violations:
            raise HTTPException(status_code=422, detail=[str(v) for v in violations])
        kind = body.get("kind", level.game_kind)
        mode = body.get("mode")
        if not isinstance(mode, str):
            raise HTTPException(status_code=422, detail="mode is required")
        source_spec = body.get("source")
        if source_spec is not None:
            try:
                SyntheticSpec.from_dict(source_spec)
            except SchemaError as exc:
                raise HTTPException(status_code=422, detail=f"bad source spec: {exc}")

        session_id = uuid.uuid4().hex[:12]
        header = make_header(kind, mode, level, profile, source=source_spec, tick_ms=tick_ms)
        path = storage.session_path(profile.patient_id, session_id)
        try:
            runner = SessionRunner(kind, mode, level, profile, tick_ms=tick_ms)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        recorder = Recorder(header, path=str(path))
        session = LiveSession(
            session_id=session_id,
            kind=kind,
            mode=mode,
            level=level,
            profile=profile,
            runner=runner,
            recorder=recorder,
            source_spec=source_spec,
            source_rate=float(body.get("rate", 100.0)),
            source_seed=int(body.get("seed", 0)),
            snapshot_every=int(body.get("snapshot_every", snapshot_every)),
        )
        with registry_lock:
            live[session_id] = session
        return {
            "session_id": session_id,
            "state": session.state_name,
            "patient_id": profile.patient_id,
            "game_kind": kind,
            "mode": mode,
            "level_id": level_id,
            "profile_id": profile_id,
        }

    # --- live stream -------------------------------------------------------------

    async def _pump_frame(ws: WebSocket, session: LiveSession, frame: HandFrame) -> bool:
        """Feed one frame; stream resulting snapshots and events. False = session over."""
        result = session.runner.process_frame(frame)
        record_frame_result(session.recorder, frame, result)
        for tick_result in result.ticks:
            for event in tick_result.events:
                await ws.send_text(canonical_dumps(event_payload(session, event)))
            if tick_result.tick % session.snapshot_every == 0:
                await ws.send_text(canonical_dumps(snapshot_payload(session, tick_result.state)))
        return session.runner.state.status == RUNNING

    async def _close_out(ws: WebSocket, session: LiveSession, status: str, reason: Optional[str]) -> None:
        _finalize(session, status, reason)
        with registry_lock:
            live.pop(session.session_id, None)
        try:
            await ws.close()
        except Exception:
            pass

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str):
        await ws.accept()
        session = live.get(session_id)
        if session is None:
            await ws.send_text(canonical_dumps(error_payload(session_id, 1, "UnknownSession", f"no live session {session_id!r}")))
            await ws.close()
            return
        session.state_name = RUNNING

        try:
            if session.source_spec is not None:
                await _run_server_pull(ws, session)
            else:
                await _run_client_push(ws, session)
        except (WebSocketDisconnect, RuntimeError):
            # receive raises WebSocketDisconnect; send on a dead socket raises RuntimeError
            if not session.persisted:
                await asyncio.sleep(disconnect_grace_s)
                _finalize(session, "Stopped", STOP_DISCONNECTED)
                with registry_lock:
                    live.pop(session.session_id, None)

    async def _run_server_pull(ws: WebSocket, session: LiveSession) -> None:
        spec = SyntheticSpec.from_dict(session.source_spec)
        duration_s = session.level.duration + 2.0
        source = SyntheticSource(spec, rate_hz=session.source_rate, duration_s=duration_s, seed=session.source_seed)
        running = True
        for i, frame in enumerate(source):
            running = await _pump_frame(ws, session, frame)
            if not running:
                break
            if session.hard_cap_exceeded():
                await _close_out(ws, session, "Stopped", STOP_TIMEOUT)
                return
            if i % 50 == 0:
                await asyncio.sleep(0)   # share the loop with other sessions
        # engine status wins in _finalize; a still-Running game ran out of frames
        await _close_out(ws, session, "Stopped", STOP_SOURCE_ENDED)

    async def _run_client_push(ws: WebSocket, session: LiveSession) -> None:
        last_client_seq = 0
        while True:
            raw = await ws.receive_text()
            try:
                msg = parse_json(raw, "message")
            except SchemaError as exc:
                await ws.send_text(canonical_dumps(error_payload(session.session_id, session.next_seq(), "BadMessage", str(exc))))
                continue
            seq = msg.get("seq")
            if isinstance(seq, int):
                if seq <= last_client_seq:
                    await ws.send_text(canonical_dumps(error_payload(
                        session.session_id, session.next_seq(), "BadSequence",
                        f"client seq {seq} not increasing (last {last_client_seq})")))
                    continue
                last_client_seq = seq
            kind = msg.get("type")
            if kind == "StopSession":
                await _close_out(ws, session, "Stopped", STOP_USER)
                return
            if kind != "InputFrame":
                await ws.send_text(canonical_dumps(error_payload(session.session_id, session.next_seq(), "BadMessage", f"unexpected type {kind!r}")))
                continue
            try:
                frame = HandFrame.from_dict(msg.get("frame", {}), "frame")
            except SchemaError as exc:
                await ws.send_text(canonical_dumps(error_payload(session.session_id, session.next_seq(), "BadFrame", str(exc))))
                continue
            try:
                running = await _pump_frame(ws, session, frame)
            except ValueError as exc:
                # out-of-order frame: drop it, keep the session alive
                await ws.send_text(canonical_dumps(error_payload(session.session_id, session.next_seq(), "OutOfOrder", str(exc))))
                continue
            if not running:
                await _close_out(ws, session, session.runner.state.status, session.runner.state.status_reason)
                return
            if session.hard_cap_exceeded():
                await _close_out(ws, session, "Stopped", STOP_TIMEOUT)
                return

    def _catch_schema(loader):
        try:
            return loader()
        except SchemaError as exc:
            raise HTTPException(status_code=500, detail=f"stored document is corrupt: {exc}")

    return app
