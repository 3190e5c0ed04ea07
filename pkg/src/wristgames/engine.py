"""The four game state machines as one pure fixed-timestep transition.

tick(state, angles, gestures, dt) -> (state', events) is deterministic and
side-effect free: identical inputs give bitwise-identical outputs, which is
what makes recorded sessions replayable. All game time is milliseconds; level
element times are seconds and converted at the boundary.

Two clocks run per game: elapsed_ms always advances, play_ms (the level
clock) freezes while hand tracking has dropped out for more than
DROPOUT_PAUSE_MS, so patients are not punished for sensor glitches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .jsonio import canonical_dumps, optional, reject_unknown, require, sha256_hex
from .kinematics import (
    DISTANCE_OK,
    FLAP,
    PRESS,
    GestureEvent,
    WristAngles,
)
from .levels import FLAPPY, PLANE, RHYTHM, SKIING, Level, validate_level
from .profiles import AdaptPolicy, PatientProfile

TICK_MS = 10.0
DROPOUT_PAUSE_MS = 500.0

# flappy impulse physics (y in screen fractions, time in seconds)
DEFAULT_GRAVITY = 1.5      # screen heights per s^2, scaled by fall_speed
DEFAULT_IMPULSE_V = 0.6    # screen heights per s
DEFAULT_HIT_WINDOW_MS = 150.0

MODE_DEFAULT = "Default"
MODE_IMPULSE = "Impulse"
MODE_CONTINUOUS = "Continuous"
MODE_DEVIATION = "Deviation"
MODE_ROTATED_FLEXION = "RotatedFlexion"
MODE_ONE_HAND = "OneHand"
MODE_TWO_HANDS = "TwoHands"

MODES = {
    RHYTHM: (MODE_DEFAULT,),
    FLAPPY: (MODE_IMPULSE, MODE_CONTINUOUS),
    SKIING: (MODE_DEVIATION, MODE_ROTATED_FLEXION),
    PLANE: (MODE_ONE_HAND, MODE_TWO_HANDS),
}

RUNNING = "Running"
STOPPED = "Stopped"
FINISHED = "Finished"

STOP_ADAPT_EXHAUSTED = "AdaptExhausted"
STOP_SAFETY = "SafetyStop"

EV_HIT = "Hit"
EV_MISS = "Miss"
EV_GESTURE = "GestureUsed"
EV_COLLISION = "Collision"
EV_GATE_PASSED = "GatePassed"
EV_RING_PASSED = "RingPassed"
EV_ADAPTED = "Adapted"
EV_SAFETY_STOP = "SafetyStop"
EV_DISTANCE = "DistanceWarning"
EV_FINISHED = "Finished"

SUCCESS_EVENTS = {EV_HIT, EV_GATE_PASSED, EV_RING_PASSED}
FAILURE_EVENTS = {EV_MISS, EV_COLLISION}


class InvalidLevel(ValueError):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("level failed validation: " + "; ".join(map(str, violations)))


class IllegalMode(ValueError):
    pass


@dataclass(frozen=True)
class GameEvent:
    kind: str
    timestamp: float                      # ms on the session clock
    element: Optional[int] = None
    points: Optional[int] = None
    hand: Optional[str] = None
    gesture: Optional[str] = None
    distance_status: Optional[str] = None
    scalars: Optional[dict] = None
    reason: Optional[str] = None
    final_score: Optional[int] = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "timestamp": self.timestamp}
        for name in ("element", "points", "hand", "gesture", "distance_status", "scalars", "reason", "final_score"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_dict(cls, obj: dict, where: str = "event") -> "GameEvent":
        reject_unknown(obj, {"kind", "timestamp", "element", "points", "hand", "gesture", "distance_status", "scalars", "reason", "final_score"}, where)
        return cls(
            kind=require(obj, "kind", str, where),
            timestamp=float(require(obj, "timestamp", float, where)),
            element=optional(obj, "element", int, None, where),
            points=optional(obj, "points", int, None, where),
            hand=optional(obj, "hand", str, None, where),
            gesture=optional(obj, "gesture", str, None, where),
            distance_status=optional(obj, "distance_status", str, None, where),
            scalars=optional(obj, "scalars", dict, None, where),
            reason=optional(obj, "reason", str, None, where),
            final_score=optional(obj, "final_score", int, None, where),
        )


@dataclass
class DifficultyScalars:
    fall_speed: float = DEFAULT_GRAVITY
    impulse_v: float = DEFAULT_IMPULSE_V
    hit_window_ms: float = DEFAULT_HIT_WINDOW_MS
    extent_scale: float = 1.0   # widens gaps/gates/rings when > 1

    def eased(self, factor: float) -> "DifficultyScalars":
        return DifficultyScalars(
            fall_speed=self.fall_speed * factor,
            impulse_v=self.impulse_v,
            hit_window_ms=self.hit_window_ms / factor,
            extent_scale=self.extent_scale / factor,
        )

    def to_dict(self) -> dict:
        return {
            "fall_speed": self.fall_speed,
            "impulse_v": self.impulse_v,
            "hit_window_ms": self.hit_window_ms,
            "extent_scale": self.extent_scale,
        }


@dataclass
class Avatar:
    y: float = 0.5    # flappy height, 0..1
    vy: float = 0.0   # flappy vertical velocity (impulse mode)
    x: float = 0.0    # skier track position, -1..+1
    yaw: float = 0.0  # plane, -1..+1
    pitch: float = 0.0

    def to_dict(self) -> dict:
        return {"y": self.y, "vy": self.vy, "x": self.x, "yaw": self.yaw, "pitch": self.pitch}


@dataclass
class GameState:
    kind: str
    mode: str
    level: Level
    profile: PatientProfile
    elapsed_ms: float = 0.0
    play_ms: float = 0.0       # level clock; pauses on tracking dropout
    tick_count: int = 0
    avatar: Avatar = field(default_factory=Avatar)
    resolved: list[bool] = field(default_factory=list)
    next_element_index: int = 0
    score: int = 0
    adaptation_count: int = 0
    scalars: DifficultyScalars = field(default_factory=DifficultyScalars)
    perf_window: list[bool] = field(default_factory=list)   # True = success
    status: str = RUNNING
    status_reason: Optional[str] = None
    absence_ms: float = 0.0
    safety_ms: dict = field(default_factory=dict)           # channel -> ms over ROM
    last_distance_status: str = DISTANCE_OK

    def copy(self) -> "GameState":
        return replace(
            self,
            avatar=replace(self.avatar),
            resolved=list(self.resolved),
            perf_window=list(self.perf_window),
            scalars=replace(self.scalars),
            safety_ms=dict(self.safety_ms),
        )

    def canonical_dict(self) -> dict:
        """Dynamic state only; the level and profile are pinned by digest in
        the session header, so hashing them again would be redundant."""
        return {
            "kind": self.kind,
            "mode": self.mode,
            "elapsed_ms": self.elapsed_ms,
            "play_ms": self.play_ms,
            "tick_count": self.tick_count,
            "avatar": self.avatar.to_dict(),
            "resolved": self.resolved,
            "next_element_index": self.next_element_index,
            "score": self.score,
            "adaptation_count": self.adaptation_count,
            "scalars": self.scalars.to_dict(),
            "perf_window": self.perf_window,
            "status": self.status,
            "status_reason": self.status_reason,
            "absence_ms": self.absence_ms,
            "safety_ms": self.safety_ms,
            "last_distance_status": self.last_distance_status,
        }


def state_hash(state: GameState) -> str:
    return sha256_hex(canonical_dumps(state.canonical_dict()))


def required_hands(kind: str, mode: str, profile: PatientProfile, level: Level) -> tuple[str, ...]:
    if kind == PLANE and mode == MODE_TWO_HANDS:
        return ("left", "right")
    if kind == RHYTHM:
        lanes = tuple(sorted({e.lane for e in level.elements}))
        return lanes or ("left", "right")
    return (active_hand(profile),)


def active_hand(profile: PatientProfile) -> str:
    return profile.handedness if profile.handedness in ("left", "right") else "right"


def new_game(kind: str, mode: str, level: Level, profile: PatientProfile) -> GameState:
    if kind not in MODES:
        raise IllegalMode(f"unknown game kind {kind!r}")
    if mode not in MODES[kind]:
        raise IllegalMode(f"mode {mode!r} is not legal for {kind} (expected one of {MODES[kind]})")
    if level.game_kind != kind:
        raise InvalidLevel([f"level is for {level.game_kind}, not {kind}"])
    violations = validate_level(level, profile)
    if violations:
        raise InvalidLevel(violations)
    return GameState(kind=kind, mode=mode, level=level, profile=profile, resolved=[False] * len(level.elements))


# --- angle -> position mappings ----------------------------------------------

def map_continuous_height(flexion_extension: float, rom: tuple[float, float]) -> float:
    """Piecewise-linear height: -flexion_max -> 0, neutral -> 0.5, +extension_max -> 1."""
    flexion_max, extension_max = rom
    if flexion_max <= 0 or extension_max <= 0:
        raise ValueError("rom components must be > 0")
    if flexion_extension >= 0:
        return 0.5 + 0.5 * min(flexion_extension / extension_max, 1.0)
    return 0.5 - 0.5 * min(-flexion_extension / flexion_max, 1.0)


def map_lateral(angle: float, rom_left: float, rom_right: float) -> float:
    """Piecewise-linear track position: -rom_left -> -1, neutral -> 0, +rom_right -> +1."""
    if rom_left <= 0 or rom_right <= 0:
        raise ValueError("rom values must be > 0")
    if angle >= 0:
        return min(angle / rom_right, 1.0)
    return -min(-angle / rom_left, 1.0)


def plane_attitude(
    angles: WristAngles,
    mode: str,
    profile: PatientProfile,
    hand_distance_cm: Optional[float] = None,
) -> Optional[tuple[float, float, str]]:
    """(pitch, yaw, distance_status) for the plane, or None on tracking dropout.

    TwoHands averages both wrists and grades the palm distance against the
    profile band; OneHand reads the active wrist and always reports Ok.
    """
    rom_fe = (profile.rom_flexion_max, profile.rom_extension_max)
    if mode == MODE_TWO_HANDS:
        if angles.left is None or angles.right is None:
            return None
        fe = (angles.left.flexion_extension + angles.right.flexion_extension) / 2.0
        dev = (angles.left.deviation + angles.right.deviation) / 2.0
        status = DISTANCE_OK
        if hand_distance_cm is not None:
            lo, hi = profile.hand_distance_band
            status = "TooClose" if hand_distance_cm < lo else "TooFar" if hand_distance_cm > hi else DISTANCE_OK
    else:
        hand = angles.hand(active_hand(profile))
        if hand is None:
            return None
        fe, dev = hand.flexion_extension, hand.deviation
        status = DISTANCE_OK
    pitch = 2.0 * map_continuous_height(fe, rom_fe) - 1.0
    yaw = map_lateral(dev, profile.rom_deviation_left_max, profile.rom_deviation_right_max)
    return (pitch, yaw, status)


def flappy_impulse(y: float, vy: float, flap: bool, dt_ms: float, scalars: DifficultyScalars) -> tuple[float, float]:
    """One impulse-mode physics step: flap resets vy, gravity pulls, y clamps.

    Constant-acceleration step is integrated exactly (dy = v*dt - g*dt^2/2) so
    the trajectory between impulses does not depend on the tick size.
    """
    dt = dt_ms / 1000.0
    g = scalars.fall_speed
    v0 = scalars.impulse_v if flap else vy
    y_new = y + v0 * dt - 0.5 * g * dt * dt
    vy_new = v0 - g * dt
    if y_new < 0.0:
        y_new = 0.0
    elif y_new > 1.0:
        y_new = 1.0
    return (y_new, vy_new)


def resolve_element(kind: str, element, avatar: Avatar, scalars: DifficultyScalars, points: int) -> tuple[str, int]:
    """Containment outcome for a spatial element due now: (event kind, points).

    Rhythm notes resolve on gesture timing, not containment, and are handled
    in the tick itself.
    """
    if kind == FLAPPY:
        half = element.gap_height * scalars.extent_scale / 2.0
        lo = max(0.0, element.gap_center - half)
        hi = min(1.0, element.gap_center + half)
        return (EV_HIT, points) if lo <= avatar.y <= hi else (EV_COLLISION, 0)
    if kind == SKIING:
        half = element.width * scalars.extent_scale / 2.0
        lo = max(-1.0, element.center - half)
        hi = min(1.0, element.center + half)
        return (EV_GATE_PASSED, points) if lo <= avatar.x <= hi else (EV_MISS, 0)
    if kind == PLANE:
        radius = element.radius * scalars.extent_scale
        d = math.hypot(avatar.yaw - element.center_yaw, avatar.pitch - element.center_pitch)
        return (EV_RING_PASSED, points) if d <= radius else (EV_MISS, 0)
    raise ValueError(f"resolve_element does not apply to {kind}")


# --- adaptation and safety -----------------------------------------------------

def adapt(state: GameState, policy: AdaptPolicy) -> Optional[GameEvent]:
    """Evaluate the perf window in place; returns the Adapted/stop event if any.

    Challenge only ever moves in the easier direction; after max_adaptations
    the game stops (when the policy says so) instead of easing further.
    """
    if len(state.perf_window) < policy.miss_window:
        return None
    misses = sum(1 for ok in state.perf_window if not ok)
    if misses / len(state.perf_window) < policy.miss_threshold:
        return None
    state.perf_window.clear()
    if state.adaptation_count < policy.max_adaptations:
        state.adaptation_count += 1
        state.scalars = state.scalars.eased(policy.ease_factor)
        return GameEvent(kind=EV_ADAPTED, timestamp=state.elapsed_ms, scalars=state.scalars.to_dict())
    if policy.stop_after_exhausted:
        state.status = STOPPED
        state.status_reason = STOP_ADAPT_EXHAUSTED
        return GameEvent(kind=EV_SAFETY_STOP, timestamp=state.elapsed_ms, reason=STOP_ADAPT_EXHAUSTED)
    return None


def _rom_violations(angles: WristAngles, profile: PatientProfile) -> set[str]:
    """Channels currently beyond the profile ROM, as 'hand.direction' keys."""
    out = set()
    for hand in ("left", "right"):
        a = angles.hand(hand)
        if a is None:
            continue
        if a.flexion_extension > profile.rom_extension_max:
            out.add(f"{hand}.extension")
        elif a.flexion_extension < -profile.rom_flexion_max:
            out.add(f"{hand}.flexion")
        if a.deviation > profile.rom_deviation_right_max:
            out.add(f"{hand}.deviation_right")
        elif a.deviation < -profile.rom_deviation_left_max:
            out.add(f"{hand}.deviation_left")
    return out


def safety_check(state: GameState, angles: WristAngles, profile: PatientProfile, dt_ms: float) -> Optional[GameEvent]:
    """Accumulate over-ROM time per channel; stop after safety_grace ms.

    Channels not currently violating (including absent hands: a dropout is
    not a violation) reset their timers.
    """
    violating = _rom_violations(angles, profile)
    state.safety_ms = {key: state.safety_ms.get(key, 0.0) + dt_ms for key in sorted(violating)}
    for key, over_ms in state.safety_ms.items():
        if over_ms > profile.safety_grace:
            state.status = STOPPED
            state.status_reason = f"{STOP_SAFETY}:{key}"
            return GameEvent(kind=EV_SAFETY_STOP, timestamp=state.elapsed_ms, reason=f"rom:{key}")
    return None


# --- the transition -------------------------------------------------------------

def tick(
    state: GameState,
    angles: WristAngles,
    gestures: Sequence[GestureEvent] = (),
    dt_ms: float = TICK_MS,
    hand_distance_cm: Optional[float] = None,
) -> tuple[GameState, list[GameEvent]]:
    """Advance the game by one timestep. Pure; non-Running states are inert."""
    if state.status != RUNNING:
        return (state, [])
    if not 0.0 < dt_ms <= 100.0:
        raise ValueError(f"dt_ms must be in (0, 100], got {dt_ms}")

    s = state.copy()
    events: list[GameEvent] = []
    s.elapsed_ms += dt_ms
    s.tick_count += 1

    required = required_hands(s.kind, s.mode, s.profile, s.level)
    tracked = all(angles.hand(h) is not None for h in required)
    s.absence_ms = 0.0 if tracked else s.absence_ms + dt_ms
    paused = s.absence_ms > DROPOUT_PAUSE_MS

    if not paused:
        s.play_ms += dt_ms
        _update_avatar(s, angles, gestures, dt_ms, tracked, hand_distance_cm, events)
        _resolve_due_elements(s, gestures, events)

    stop = safety_check(s, angles, s.profile, dt_ms)
    if stop is not None:
        events.append(stop)
        return (s, events)

    if s.status == RUNNING and not paused:
        duration_ms = s.level.duration * 1000.0
        if s.play_ms >= duration_ms and all(s.resolved):
            s.status = FINISHED
            events.append(GameEvent(kind=EV_FINISHED, timestamp=s.elapsed_ms, final_score=s.score))
    return (s, events)


def _update_avatar(
    s: GameState,
    angles: WristAngles,
    gestures: Sequence[GestureEvent],
    dt_ms: float,
    tracked: bool,
    hand_distance_cm: Optional[float],
    events: list[GameEvent],
) -> None:
    profile = s.profile
    hand = active_hand(profile)

    if s.kind == FLAPPY:
        if s.mode == MODE_IMPULSE:
            flap = any(g.kind == FLAP and g.hand == hand for g in gestures)
            for g in gestures:
                if g.kind == FLAP and g.hand == hand:
                    events.append(GameEvent(kind=EV_GESTURE, timestamp=s.elapsed_ms, hand=g.hand, gesture=FLAP))
            s.avatar.y, s.avatar.vy = flappy_impulse(s.avatar.y, s.avatar.vy, flap, dt_ms, s.scalars)
        else:
            a = angles.hand(hand)
            if a is not None:
                s.avatar.y = map_continuous_height(a.flexion_extension, (profile.rom_flexion_max, profile.rom_extension_max))
                s.avatar.vy = 0.0
    elif s.kind == SKIING:
        a = angles.hand(hand)
        if a is not None:
            if s.mode == MODE_DEVIATION:
                s.avatar.x = map_lateral(a.deviation, profile.rom_deviation_left_max, profile.rom_deviation_right_max)
            else:
                # hand rotated 90 degrees: flexion/extension becomes lateral motion
                signed = a.flexion_extension * profile.rotated_flexion_sign
                rom_pos = profile.rom_extension_max if profile.rotated_flexion_sign > 0 else profile.rom_flexion_max
                rom_neg = profile.rom_flexion_max if profile.rotated_flexion_sign > 0 else profile.rom_extension_max
                s.avatar.x = map_lateral(signed, rom_neg, rom_pos)
    elif s.kind == PLANE:
        attitude = plane_attitude(angles, s.mode, profile, hand_distance_cm)
        if attitude is not None:
            pitch, yaw, status = attitude
            s.avatar.pitch = pitch
            s.avatar.yaw = yaw
            if status != s.last_distance_status:
                events.append(GameEvent(kind=EV_DISTANCE, timestamp=s.elapsed_ms, distance_status=status))
                s.last_distance_status = status


def _resolve_due_elements(s: GameState, gestures: Sequence[GestureEvent], events: list[GameEvent]) -> None:
    level = s.level
    points = level.points()
    policy = s.profile.adaptation_policy

    if s.kind == RHYTHM:
        for g in gestures:
            if s.status != RUNNING:
                break
            if g.kind != PRESS:
                continue
            events.append(GameEvent(kind=EV_GESTURE, timestamp=s.elapsed_ms, hand=g.hand, gesture=PRESS))
            idx = _closest_open_note(s, g.hand)
            if idx is not None:
                s.resolved[idx] = True
                s.score += points
                events.append(GameEvent(kind=EV_HIT, timestamp=s.elapsed_ms, element=idx, points=points))
                _record_outcome(s, policy, True, events)
        for idx, element in enumerate(level.elements):
            if s.status != RUNNING:
                break
            if s.resolved[idx]:
                continue
            if s.play_ms > element.time * 1000.0 + s.scalars.hit_window_ms:
                s.resolved[idx] = True
                events.append(GameEvent(kind=EV_MISS, timestamp=s.elapsed_ms, element=idx))
                _record_outcome(s, policy, False, events)
    else:
        for idx, element in enumerate(level.elements):
            if s.status != RUNNING:
                break
            if s.resolved[idx]:
                continue
            if s.play_ms >= element.time * 1000.0:
                outcome, awarded = resolve_element(s.kind, element, s.avatar, s.scalars, points)
                s.resolved[idx] = True
                s.score += awarded
                events.append(GameEvent(kind=outcome, timestamp=s.elapsed_ms, element=idx, points=awarded or None))
                _record_outcome(s, policy, outcome in SUCCESS_EVENTS, events)
    s.next_element_index = next((i for i, done in enumerate(s.resolved) if not done), len(s.resolved))


def _closest_open_note(s: GameState, hand: str) -> Optional[int]:
    best_idx = None
    best_delta = None
    for idx, note in enumerate(s.level.elements):
        if s.resolved[idx] or note.lane != hand:
            continue
        delta = abs(note.time * 1000.0 - s.play_ms)
        if delta <= s.scalars.hit_window_ms and (best_delta is None or delta < best_delta):
            best_idx, best_delta = idx, delta
    return best_idx


def _record_outcome(s: GameState, policy: AdaptPolicy, success: bool, events: list[GameEvent]) -> None:
    s.perf_window.append(success)
    if len(s.perf_window) > policy.miss_window:
        del s.perf_window[0]
    event = adapt(s, policy)
    if event is not None:
        events.append(event)
