"""Session files: append-only, integrity-checked, replayable.

File layout (`.wrsession`, UTF-8):

    line 1      JSON header (embeds the level and profile plus their digests)
    lines 2..   one entry per line, length-prefixed: "<bytes> <json>"
    last line   length-prefixed JSON footer with entry count and file digest

The length prefix is the UTF-8 byte length of the JSON payload, which makes
torn writes detectable: recovery keeps every complete line before the first
damaged one. The footer digest is SHA-256 over the header line, every body
line, and the footer's own fields (minus the digest itself), so any
single-byte change anywhere in the file is caught.

Entries are frames (raw pose + derived angles), game events, and periodic
tick digests (engine state hashes) that let replay localize a divergence.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import os
from dataclasses import dataclass, field
from typing import Optional, Union

from . import ENGINE_VERSION
from .engine import (
    EV_ADAPTED,
    EV_GESTURE,
    EV_SAFETY_STOP,
    FAILURE_EVENTS,
    SUCCESS_EVENTS,
    GameEvent,
)
from .jsonio import SchemaError, canonical_dumps, optional, parse_json, reject_unknown, require
from .kinematics import HandFrame, NeutralPose, WristAngles
from .levels import Level
from .profiles import PatientProfile

SESSION_SCHEMA_VERSION = 1
TICK_DIGEST_EVERY = 100   # ticks between recorded state hashes (1 s at 10 ms)

CHANNELS = ("flexion_extension_left", "flexion_extension_right", "deviation_left", "deviation_right")

HISTOGRAM_BIN_DEG = 5.0
HISTOGRAM_BINS = 36  # covers [-90, 90)


class OutOfOrderEntry(ValueError):
    pass


class DigestMismatch(ValueError):
    pass


class ReplayDivergence(ValueError):
    def __init__(self, message: str, tick: Optional[int] = None, entry_index: Optional[int] = None):
        self.tick = tick
        self.entry_index = entry_index
        super().__init__(message)


class UnknownChannel(ValueError):
    pass


# --- entries -----------------------------------------------------------------

@dataclass(frozen=True)
class FrameEntry:
    timestamp: float
    frame: HandFrame
    angles: WristAngles   # smoothed angles as consumed by the game

    def to_dict(self) -> dict:
        return {"type": "frame", "timestamp": self.timestamp, "frame": self.frame.to_dict(), "angles": self.angles.to_dict()}


@dataclass(frozen=True)
class EventEntry:
    event: GameEvent

    @property
    def timestamp(self) -> float:
        return self.event.timestamp

    def to_dict(self) -> dict:
        return {"type": "event", "event": self.event.to_dict()}


@dataclass(frozen=True)
class TickEntry:
    timestamp: float
    tick: int
    state_hash: str

    def to_dict(self) -> dict:
        return {"type": "tick", "timestamp": self.timestamp, "tick": self.tick, "state_hash": self.state_hash}


Entry = Union[FrameEntry, EventEntry, TickEntry]


def entry_from_dict(obj: dict, where: str = "entry") -> Entry:
    kind = require(obj, "type", str, where)
    if kind == "frame":
        reject_unknown(obj, {"type", "timestamp", "frame", "angles"}, where)
        return FrameEntry(
            timestamp=float(require(obj, "timestamp", float, where)),
            frame=HandFrame.from_dict(require(obj, "frame", dict, where), f"{where}.frame"),
            angles=WristAngles.from_dict(require(obj, "angles", dict, where), f"{where}.angles"),
        )
    if kind == "event":
        reject_unknown(obj, {"type", "event"}, where)
        return EventEntry(event=GameEvent.from_dict(require(obj, "event", dict, where)))
    if kind == "tick":
        reject_unknown(obj, {"type", "timestamp", "tick", "state_hash"}, where)
        return TickEntry(
            timestamp=float(require(obj, "timestamp", float, where)),
            tick=int(require(obj, "tick", int, where)),
            state_hash=require(obj, "state_hash", str, where),
        )
    raise SchemaError(f"{where}.type", f"unknown entry type {kind!r}")


# --- header / footer -----------------------------------------------------------

@dataclass(frozen=True)
class SessionHeader:
    patient_id: str
    game_kind: str
    mode: str
    level: Level
    profile: PatientProfile
    neutral_pose: NeutralPose = field(default_factory=NeutralPose)
    started_at: str = ""                 # wall clock, ISO-8601; not replay input
    engine_version: str = ENGINE_VERSION
    tick_ms: float = 10.0
    digest_every: int = TICK_DIGEST_EVERY
    source: Optional[dict] = None        # provenance of the frame stream

    def level_digest(self) -> str:
        return hashlib.sha256(canonical_dumps(self.level.to_dict()).encode()).hexdigest()

    def profile_digest(self) -> str:
        return hashlib.sha256(canonical_dumps(self.profile.to_dict()).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "schema_version": SESSION_SCHEMA_VERSION,
            "format": "wrsession",
            "patient_id": self.patient_id,
            "game_kind": self.game_kind,
            "mode": self.mode,
            "level_digest": self.level_digest(),
            "profile_digest": self.profile_digest(),
            "level": self.level.to_dict(),
            "profile": self.profile.to_dict(),
            "neutral_pose": self.neutral_pose.to_dict(),
            "started_at": self.started_at,
            "engine_version": self.engine_version,
            "tick_ms": self.tick_ms,
            "digest_every": self.digest_every,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "header") -> "SessionHeader":
        reject_unknown(
            obj,
            {
                "schema_version", "format", "patient_id", "game_kind", "mode",
                "level_digest", "profile_digest", "level", "profile",
                "neutral_pose", "started_at", "engine_version", "tick_ms",
                "digest_every", "source",
            },
            where,
        )
        version = require(obj, "schema_version", int, where)
        if version != SESSION_SCHEMA_VERSION:
            raise SchemaError(f"{where}.schema_version", f"unsupported version {version}")
        header = cls(
            patient_id=require(obj, "patient_id", str, where),
            game_kind=require(obj, "game_kind", str, where),
            mode=require(obj, "mode", str, where),
            level=Level.from_dict(require(obj, "level", dict, where), f"{where}.level"),
            profile=PatientProfile.from_dict(require(obj, "profile", dict, where), f"{where}.profile"),
            neutral_pose=NeutralPose.from_dict(optional(obj, "neutral_pose", dict, {}, where), f"{where}.neutral_pose"),
            started_at=optional(obj, "started_at", str, "", where),
            engine_version=require(obj, "engine_version", str, where),
            tick_ms=float(optional(obj, "tick_ms", float, 10.0, where)),
            digest_every=int(optional(obj, "digest_every", int, TICK_DIGEST_EVERY, where)),
            source=optional(obj, "source", dict, None, where),
        )
        if require(obj, "level_digest", str, where) != header.level_digest():
            raise DigestMismatch("embedded level does not match level_digest")
        if require(obj, "profile_digest", str, where) != header.profile_digest():
            raise DigestMismatch("embedded profile does not match profile_digest")
        return header


@dataclass(frozen=True)
class SessionFooter:
    final_score: int
    status: str
    status_reason: Optional[str]
    entry_count: int
    digest: str

    def core_dict(self) -> dict:
        return {
            "type": "footer",
            "final_score": self.final_score,
            "status": self.status,
            "status_reason": self.status_reason,
            "entry_count": self.entry_count,
        }

    def to_dict(self) -> dict:
        out = self.core_dict()
        out["digest"] = self.digest
        return out

    @classmethod
    def from_dict(cls, obj: dict, where: str = "footer") -> "SessionFooter":
        reject_unknown(obj, {"type", "final_score", "status", "status_reason", "entry_count", "digest"}, where)
        if require(obj, "type", str, where) != "footer":
            raise SchemaError(f"{where}.type", "expected footer")
        return cls(
            final_score=int(require(obj, "final_score", int, where)),
            status=require(obj, "status", str, where),
            status_reason=optional(obj, "status_reason", str, None, where),
            entry_count=int(require(obj, "entry_count", int, where)),
            digest=require(obj, "digest", str, where),
        )


@dataclass(frozen=True)
class SessionRecord:
    header: SessionHeader
    entries: tuple[Entry, ...]
    footer: SessionFooter

    def frames(self) -> list[FrameEntry]:
        return [e for e in self.entries if isinstance(e, FrameEntry)]

    def events(self) -> list[GameEvent]:
        return [e.event for e in self.entries if isinstance(e, EventEntry)]

    def tick_digests(self) -> list[TickEntry]:
        return [e for e in self.entries if isinstance(e, TickEntry)]

    def serialize(self) -> bytes:
        writer = Recorder(self.header)
        for entry in self.entries:
            writer.record(entry)
        writer.finalize(self.footer.final_score, self.footer.status, self.footer.status_reason)
        return writer.data


def _entry_line(entry_json: str) -> str:
    return f"{len(entry_json.encode('utf-8'))} {entry_json}\n"


def _split_prefixed(line: str, where: str) -> str:
    prefix, sep, payload = line.partition(" ")
    if not sep or not prefix.isdigit():
        raise SchemaError(where, "missing length prefix")
    if int(prefix) != len(payload.encode("utf-8")):
        raise SchemaError(where, f"length prefix {prefix} does not match payload")
    return payload


class Recorder:
    """Streaming writer: header immediately, entries appended, footer on finalize.

    When given a path the file streams to `<path>.partial` and renames into
    place on finalize, so a crash leaves a recoverable partial file and a
    completed session appears atomically.
    """

    def __init__(self, header: SessionHeader, path: Optional[str] = None):
        self.header = header
        self.path = path
        self._lines: list[str] = []
        self._entries: list[Entry] = []
        self._digest = hashlib.sha256()
        self._last_ts: Optional[float] = None
        self._last_frame_ts: Optional[float] = None
        self._finalized = False
        self.data: Optional[bytes] = None

        header_line = canonical_dumps(header.to_dict()) + "\n"
        self._digest.update(header_line.encode("utf-8"))
        self._fh = None
        if path is not None:
            self._fh = open(path + ".partial", "w", encoding="utf-8", newline="")
        self._write(header_line)

    def _write(self, text: str) -> None:
        self._lines.append(text)
        if self._fh is not None:
            self._fh.write(text)
            self._fh.flush()

    def record(self, entry: Entry) -> None:
        if self._finalized:
            raise ValueError("recorder already finalized")
        ts = entry.timestamp
        if self._last_ts is not None and ts < self._last_ts:
            raise OutOfOrderEntry(f"entry at {ts} ms after {self._last_ts} ms")
        if isinstance(entry, FrameEntry):
            if self._last_frame_ts is not None and ts <= self._last_frame_ts:
                raise OutOfOrderEntry(f"frame timestamps must strictly increase ({ts} after {self._last_frame_ts})")
            self._last_frame_ts = ts
        self._last_ts = ts
        line = _entry_line(canonical_dumps(entry.to_dict()))
        self._digest.update(line.encode("utf-8"))
        self._entries.append(entry)
        self._write(line)

    def finalize(self, final_score: int, status: str, status_reason: Optional[str] = None) -> SessionRecord:
        if self._finalized:
            raise ValueError("recorder already finalized")
        self._finalized = True
        core = {
            "type": "footer",
            "final_score": final_score,
            "status": status,
            "status_reason": status_reason,
            "entry_count": len(self._entries),
        }
        self._digest.update(canonical_dumps(core).encode("utf-8"))
        footer = SessionFooter(
            final_score=final_score,
            status=status,
            status_reason=status_reason,
            entry_count=len(self._entries),
            digest=self._digest.hexdigest(),
        )
        self._write(_entry_line(canonical_dumps(footer.to_dict())))
        self.data = "".join(self._lines).encode("utf-8")
        if self._fh is not None:
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._fh.close()
            os.replace(self.path + ".partial", self.path)
        return SessionRecord(header=self.header, entries=tuple(self._entries), footer=footer)


def utc_now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --- reading --------------------------------------------------------------------

def parse_record(data: bytes) -> SessionRecord:
    """Strict parse: verifies framing, ordering, entry count, and file digest."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DigestMismatch(f"undecodable session file: {exc}") from exc
    if not text.endswith("\n"):
        raise SchemaError("session", "file does not end with a newline (truncated?)")
    lines = text.split("\n")[:-1]
    if len(lines) < 2:
        raise SchemaError("session", "expected at least a header and a footer line")

    header_obj = parse_json(lines[0], "header")
    header = SessionHeader.from_dict(header_obj)

    digest = hashlib.sha256()
    digest.update((lines[0] + "\n").encode("utf-8"))

    entries: list[Entry] = []
    last_ts: Optional[float] = None
    for i, line in enumerate(lines[1:-1], start=1):
        payload = _split_prefixed(line, f"line {i + 1}")
        digest.update((line + "\n").encode("utf-8"))
        obj = parse_json(payload, f"line {i + 1}")
        entry = entry_from_dict(obj, f"line {i + 1}")
        if last_ts is not None and entry.timestamp < last_ts:
            raise OutOfOrderEntry(f"line {i + 1}: entry at {entry.timestamp} ms after {last_ts} ms")
        last_ts = entry.timestamp
        entries.append(entry)

    footer_payload = _split_prefixed(lines[-1], "footer")
    footer_obj = parse_json(footer_payload, "footer")
    footer = SessionFooter.from_dict(footer_obj)
    if footer.entry_count != len(entries):
        raise DigestMismatch(f"footer says {footer.entry_count} entries, file has {len(entries)}")
    digest.update(canonical_dumps(footer.core_dict()).encode("utf-8"))
    if digest.hexdigest() != footer.digest:
        raise DigestMismatch("file digest does not verify")
    return SessionRecord(header=header, entries=tuple(entries), footer=footer)


def recover_record(data: bytes) -> tuple[SessionHeader, list[Entry], Optional[SessionFooter]]:
    """Lenient read: everything complete before the first damaged byte.

    Returns the footer only when the whole file verifies; a truncated or
    unfinalized file yields (header, entries, None).
    """
    try:
        return_record = parse_record(data)
        return (return_record.header, list(return_record.entries), return_record.footer)
    except (SchemaError, DigestMismatch, OutOfOrderEntry):
        pass
    text = data.decode("utf-8", errors="replace")
    lines = text.split("\n")
    if not lines:
        raise SchemaError("session", "empty file")
    header = SessionHeader.from_dict(parse_json(lines[0], "header"))
    entries: list[Entry] = []
    for line in lines[1:-1] if text.endswith("\n") else lines[1:]:
        try:
            payload = _split_prefixed(line, "entry")
            obj = parse_json(payload, "entry")
            if obj.get("type") == "footer":
                break
            entries.append(entry_from_dict(obj))
        except (SchemaError, DigestMismatch, KeyError, ValueError):
            break
    return (header, entries, None)


def load_record(path: str) -> SessionRecord:
    with open(path, "rb") as fh:
        return parse_record(fh.read())


# --- statistics --------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelStats:
    max: Optional[float]
    min: Optional[float]
    histogram: tuple[int, ...]   # 36 bins of 5 degrees covering [-90, 90]

    def to_dict(self) -> dict:
        return {"max": self.max, "min": self.min, "histogram": list(self.histogram)}


@dataclass(frozen=True)
class SessionStats:
    duration_s: float
    channels: dict
    gesture_count: int
    hits: int
    misses: int
    score: int
    adaptations: int
    safety_stops: int

    def to_dict(self) -> dict:
        return {
            "duration_s": self.duration_s,
            "channels": {name: ch.to_dict() for name, ch in self.channels.items()},
            "gesture_count": self.gesture_count,
            "hits": self.hits,
            "misses": self.misses,
            "score": self.score,
            "adaptations": self.adaptations,
            "safety_stops": self.safety_stops,
        }


def _channel_value(angles: WristAngles, channel: str) -> Optional[float]:
    field_name, hand = channel.rsplit("_", 1)
    a = angles.hand(hand)
    if a is None:
        return None
    return a.flexion_extension if field_name == "flexion_extension" else a.deviation


def statistics(record: SessionRecord) -> SessionStats:
    per_channel: dict[str, list[float]] = {c: [] for c in CHANNELS}
    last_ts = 0.0
    for entry in record.entries:
        last_ts = max(last_ts, entry.timestamp)
        if isinstance(entry, FrameEntry):
            for channel in CHANNELS:
                value = _channel_value(entry.angles, channel)
                if value is not None:
                    per_channel[channel].append(value)

    channels = {}
    for name, values in per_channel.items():
        hist = [0] * HISTOGRAM_BINS
        for v in values:
            idx = int((v + 90.0) / HISTOGRAM_BIN_DEG)
            hist[min(max(idx, 0), HISTOGRAM_BINS - 1)] += 1
        channels[name] = ChannelStats(
            max=max(values) if values else None,
            min=min(values) if values else None,
            histogram=tuple(hist),
        )

    events = record.events()
    return SessionStats(
        duration_s=last_ts / 1000.0,
        channels=channels,
        gesture_count=sum(1 for e in events if e.kind == EV_GESTURE),
        hits=sum(1 for e in events if e.kind in SUCCESS_EVENTS),
        misses=sum(1 for e in events if e.kind in FAILURE_EVENTS),
        score=record.footer.final_score,
        adaptations=sum(1 for e in events if e.kind == EV_ADAPTED),
        safety_stops=sum(1 for e in events if e.kind == EV_SAFETY_STOP),
    )


def export_timeseries(record: SessionRecord, channel: str) -> str:
    """CSV with header `timestamp_ms,angle_deg`, 2-decimal angles."""
    if channel not in CHANNELS:
        raise UnknownChannel(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    rows = ["timestamp_ms,angle_deg"]
    for entry in record.entries:
        if not isinstance(entry, FrameEntry):
            continue
        value = _channel_value(entry.angles, channel)
        if value is None:
            continue
        ts = entry.timestamp
        ts_text = str(int(ts)) if ts == int(ts) else repr(ts)
        rows.append(f"{ts_text},{value:.2f}")
    return "\n".join(rows) + "\n"
