"""The deterministic frame-to-tick pipeline, shared by live play and replay.

A SessionRunner owns everything between a raw HandFrame and the engine:
calibration, smoothing, per-hand gesture detection, sample-and-hold of the
latest inputs, and fixed-timestep advancement. Live sessions and replays run
the exact same code over the exact same frames, which is why a replayed
session reproduces every event and state hash bit for bit.

Frame/tick interleaving: a frame arriving at time T first drives all ticks
that end at or before T (using inputs held from before T), then its own
angles and gestures become the held inputs for later ticks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .engine import (
    FLAPPY,
    MODE_IMPULSE,
    RHYTHM,
    RUNNING,
    GameEvent,
    GameState,
    new_game,
    required_hands,
    state_hash,
    tick,
)
from .kinematics import (
    DEFAULT_SMOOTH_ALPHA,
    FLAP,
    PRESS,
    GestureDetector,
    GestureSpec,
    HandFrame,
    NeutralPose,
    WristAngles,
    smooth,
    wrist_angles,
)
from .levels import Level
from .profiles import PatientProfile
from .session import (
    EventEntry,
    FrameEntry,
    Recorder,
    ReplayDivergence,
    SessionHeader,
    SessionRecord,
    TickEntry,
    utc_now_iso,
)

STOP_SOURCE_ENDED = "SourceEnded"
STOP_USER = "UserStop"


@dataclass
class TickResult:
    tick: int
    state: GameState
    events: list[GameEvent]
    digest: Optional[str] = None   # present every digest_every ticks


@dataclass
class FrameResult:
    angles: WristAngles            # smoothed, as consumed by the game
    ticks: list[TickResult] = field(default_factory=list)


def _game_gesture_kinds(kind: str, mode: str) -> tuple[str, ...]:
    if kind == RHYTHM:
        return (PRESS,)
    if kind == FLAPPY and mode == MODE_IMPULSE:
        return (FLAP,)
    return ()


class SessionRunner:
    def __init__(
        self,
        kind: str,
        mode: str,
        level: Level,
        profile: PatientProfile,
        neutral_pose: NeutralPose = NeutralPose(),
        tick_ms: float = 10.0,
        alpha: float = DEFAULT_SMOOTH_ALPHA,
        digest_every: int = 100,
    ):
        self.state = new_game(kind, mode, level, profile)
        self.neutral_pose = neutral_pose
        self.tick_ms = tick_ms
        self.alpha = alpha
        self.digest_every = digest_every
        self._smoothed: Optional[WristAngles] = None
        self._held_angles = WristAngles()
        self._held_distance: Optional[float] = None
        self._pending_gestures: list = []
        self._last_frame_ts: Optional[float] = None
        self._detectors = {}
        for gesture_kind in _game_gesture_kinds(kind, mode):
            spec = GestureSpec.from_tuning(gesture_kind, profile.gesture_spec)
            for hand in required_hands(kind, mode, profile, level):
                self._detectors[(hand, gesture_kind)] = GestureDetector(spec, hand)

    def process_frame(self, frame: HandFrame) -> FrameResult:
        """Advance due ticks, then absorb this frame's inputs."""
        if self._last_frame_ts is not None and frame.timestamp <= self._last_frame_ts:
            raise ValueError(f"frame timestamps must strictly increase ({frame.timestamp} after {self._last_frame_ts})")
        self._last_frame_ts = frame.timestamp

        ticks = self._advance_to(frame.timestamp)

        raw = wrist_angles(frame, self.neutral_pose)
        smoothed = smooth(self._smoothed, raw, self.alpha)
        self._smoothed = smoothed
        for (hand, _), detector in self._detectors.items():
            angles = smoothed.hand(hand)
            if angles is None:
                continue
            event = detector.push(frame.timestamp, angles.flexion_extension)
            if event is not None:
                self._pending_gestures.append(event)
        self._held_angles = smoothed
        if frame.left is not None and frame.right is not None:
            self._held_distance = math.dist(frame.left.palm_position, frame.right.palm_position)
        else:
            self._held_distance = None
        return FrameResult(angles=smoothed, ticks=ticks)

    def _advance_to(self, until_ms: float) -> list[TickResult]:
        out: list[TickResult] = []
        while self.state.status == RUNNING and self.state.elapsed_ms + self.tick_ms <= until_ms + 1e-9:
            tick_end = self.state.elapsed_ms + self.tick_ms
            due = [g for g in self._pending_gestures if g.timestamp <= tick_end + 1e-9]
            self._pending_gestures = [g for g in self._pending_gestures if g.timestamp > tick_end + 1e-9]
            self.state, events = tick(self.state, self._held_angles, due, self.tick_ms, self._held_distance)
            digest = state_hash(self.state) if self.state.tick_count % self.digest_every == 0 else None
            out.append(TickResult(tick=self.state.tick_count, state=self.state, events=events, digest=digest))
        return out


def make_header(
    kind: str,
    mode: str,
    level: Level,
    profile: PatientProfile,
    neutral_pose: NeutralPose = NeutralPose(),
    source: Optional[dict] = None,
    tick_ms: float = 10.0,
    digest_every: int = 100,
    started_at: Optional[str] = None,
) -> SessionHeader:
    return SessionHeader(
        patient_id=profile.patient_id,
        game_kind=kind,
        mode=mode,
        level=level,
        profile=profile,
        neutral_pose=neutral_pose,
        started_at=utc_now_iso() if started_at is None else started_at,
        tick_ms=tick_ms,
        digest_every=digest_every,
        source=source,
    )


def run_session(
    kind: str,
    mode: str,
    level: Level,
    profile: PatientProfile,
    frames: Iterable[HandFrame],
    recorder: Optional[Recorder] = None,
    neutral_pose: NeutralPose = NeutralPose(),
    tick_ms: float = 10.0,
    digest_every: int = 100,
) -> tuple[SessionRecord, GameState]:
    """Drive a full session from a frame source and record it.

    The source is consumed until the game leaves Running or frames run out;
    a game still Running at stream end is finalized as Stopped(SourceEnded).
    """
    if recorder is None:
        recorder = Recorder(make_header(kind, mode, level, profile, neutral_pose, tick_ms=tick_ms, digest_every=digest_every))
    runner = SessionRunner(kind, mode, level, profile, neutral_pose, tick_ms=tick_ms, digest_every=digest_every)
    for frame in frames:
        result = runner.process_frame(frame)
        record_frame_result(recorder, frame, result)
        if runner.state.status != RUNNING:
            break
    state = runner.state
    status = state.status
    reason = state.status_reason
    if status == RUNNING:
        status, reason = "Stopped", STOP_SOURCE_ENDED
    record = recorder.finalize(state.score, status, reason)
    return (record, state)


def _record_ticks(recorder: Recorder, ticks: list[TickResult]) -> None:
    for result in ticks:
        for event in result.events:
            recorder.record(EventEntry(event=event))
        if result.digest is not None:
            recorder.record(TickEntry(timestamp=result.state.elapsed_ms, tick=result.tick, state_hash=result.digest))


def record_frame_result(recorder: Recorder, frame: HandFrame, result: FrameResult) -> None:
    """Persist one processed frame in the order replay regenerates: the ticks
    the frame triggered (their events, then digest), then the frame itself."""
    _record_ticks(recorder, result.ticks)
    recorder.record(FrameEntry(timestamp=frame.timestamp, frame=frame, angles=result.angles))


# --- replay -------------------------------------------------------------------------

def replay(record: SessionRecord) -> Iterator[TickResult]:
    """Re-execute a session from its recorded frames, verifying as it goes.

    Yields every recomputed tick; raises ReplayDivergence at the first entry
    where the recomputation disagrees with what was recorded (events, derived
    angles, or state hashes).
    """
    header = record.header
    runner = SessionRunner(
        header.game_kind,
        header.mode,
        header.level,
        header.profile,
        header.neutral_pose,
        tick_ms=header.tick_ms,
        digest_every=header.digest_every,
    )
    expected = list(record.entries)
    cursor = 0

    def check(recomputed_entry, tick_no: Optional[int]) -> None:
        nonlocal cursor
        if cursor >= len(expected):
            raise ReplayDivergence(
                f"replay produced more entries than recorded (extra {recomputed_entry.to_dict()['type']})",
                tick=tick_no, entry_index=cursor,
            )
        want = expected[cursor]
        if recomputed_entry.to_dict() != want.to_dict():
            raise ReplayDivergence(
                f"entry {cursor} diverged: recomputed {recomputed_entry.to_dict()} != recorded {want.to_dict()}",
                tick=tick_no, entry_index=cursor,
            )
        cursor += 1

    for entry in record.entries:
        if not isinstance(entry, FrameEntry):
            continue
        result = runner.process_frame(entry.frame)
        for tick_result in result.ticks:
            for event in tick_result.events:
                check(EventEntry(event=event), tick_result.tick)
            if tick_result.digest is not None:
                check(
                    TickEntry(timestamp=tick_result.state.elapsed_ms, tick=tick_result.tick, state_hash=tick_result.digest),
                    tick_result.tick,
                )
            yield tick_result
        check(FrameEntry(timestamp=entry.frame.timestamp, frame=entry.frame, angles=result.angles), None)
        if runner.state.status != RUNNING:
            break

    if cursor != len(expected):
        raise ReplayDivergence(
            f"recorded {len(expected)} entries but replay reproduced {cursor}",
            entry_index=cursor,
        )


@dataclass(frozen=True)
class ReplayReport:
    ticks: int
    events: int
    tick_digests: int
    final_score: int
    status: str

    def to_dict(self) -> dict:
        return {
            "ticks": self.ticks,
            "events": self.events,
            "tick_digests": self.tick_digests,
            "final_score": self.final_score,
            "status": self.status,
        }


def verify_replay(record: SessionRecord) -> ReplayReport:
    """Full-session verification; raises ReplayDivergence on any mismatch."""
    ticks = 0
    events = 0
    digests = 0
    last_state = None
    for result in replay(record):
        ticks += 1
        events += len(result.events)
        digests += 1 if result.digest is not None else 0
        last_state = result.state
    return ReplayReport(
        ticks=ticks,
        events=events,
        tick_digests=digests,
        final_score=last_state.score if last_state is not None else 0,
        status=record.footer.status,
    )
