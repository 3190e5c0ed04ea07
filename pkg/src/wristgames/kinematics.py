"""Wrist kinematics: hand-pose frames to wrist angles, smoothing, gestures.

Conventions (device-centered, controller facing up between patient and
screen): x points to the player's right, y up, z toward the player. The
forearm is assumed fixed along -z (it rests on a support and must not move),
so both wrist angles are derived from the palm-to-fingers direction alone:

    flexion/extension = asin(d_y)        positive = extension (hand bends up)
    lateral deviation = atan2(d_x, -d_z) positive = toward player's right

All angles are degrees. All functions here are pure and safe from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .jsonio import SchemaError, optional, reject_unknown, require

Vec3 = tuple[float, float, float]

HANDS = ("left", "right")

# Device limits used by frame_quality: half of the sensor's ~150 degree
# field of view, and the minimum useful palm height above the controller.
FOV_HALF_ANGLE_DEG = 75.0
MIN_PALM_HEIGHT_CM = 10.0

DEFAULT_SMOOTH_ALPHA = 0.3

ANGLE_CLAMP_DEG = 90.0


class MalformedFrame(ValueError):
    """Frame carries a degenerate direction vector and cannot yield angles."""


@dataclass(frozen=True)
class HandPose:
    palm_position: Vec3
    hand_direction: Vec3
    palm_normal: Vec3
    confidence: float = 1.0

    def to_dict(self) -> dict:
        return {
            "palm_position": list(self.palm_position),
            "hand_direction": list(self.hand_direction),
            "palm_normal": list(self.palm_normal),
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "hand") -> "HandPose":
        reject_unknown(obj, {"palm_position", "hand_direction", "palm_normal", "confidence"}, where)
        return cls(
            palm_position=_vec3(require(obj, "palm_position", list, where), f"{where}.palm_position"),
            hand_direction=_vec3(require(obj, "hand_direction", list, where), f"{where}.hand_direction"),
            palm_normal=_vec3(require(obj, "palm_normal", list, where), f"{where}.palm_normal"),
            confidence=float(optional(obj, "confidence", float, 1.0, where)),
        )


@dataclass(frozen=True)
class HandFrame:
    """One timestamped hand-pose sample; timestamps are ms since session start."""

    timestamp: float
    left: Optional[HandPose] = None
    right: Optional[HandPose] = None

    def hand(self, name: str) -> Optional[HandPose]:
        return self.left if name == "left" else self.right

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "left": self.left.to_dict() if self.left else None,
            "right": self.right.to_dict() if self.right else None,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "frame") -> "HandFrame":
        reject_unknown(obj, {"timestamp", "left", "right"}, where)
        left = optional(obj, "left", dict, None, where)
        right = optional(obj, "right", dict, None, where)
        return cls(
            timestamp=float(require(obj, "timestamp", float, where)),
            left=HandPose.from_dict(left, f"{where}.left") if left is not None else None,
            right=HandPose.from_dict(right, f"{where}.right") if right is not None else None,
        )


@dataclass(frozen=True)
class HandAngles:
    flexion_extension: float
    deviation: float

    def to_dict(self) -> dict:
        return {"flexion_extension": self.flexion_extension, "deviation": self.deviation}

    @classmethod
    def from_dict(cls, obj: dict, where: str = "angles") -> "HandAngles":
        reject_unknown(obj, {"flexion_extension", "deviation"}, where)
        return cls(
            flexion_extension=float(require(obj, "flexion_extension", float, where)),
            deviation=float(require(obj, "deviation", float, where)),
        )


@dataclass(frozen=True)
class WristAngles:
    left: Optional[HandAngles] = None
    right: Optional[HandAngles] = None

    def hand(self, name: str) -> Optional[HandAngles]:
        return self.left if name == "left" else self.right

    def to_dict(self) -> dict:
        return {
            "left": self.left.to_dict() if self.left else None,
            "right": self.right.to_dict() if self.right else None,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "angles") -> "WristAngles":
        reject_unknown(obj, {"left", "right"}, where)
        left = optional(obj, "left", dict, None, where)
        right = optional(obj, "right", dict, None, where)
        return cls(
            left=HandAngles.from_dict(left, f"{where}.left") if left is not None else None,
            right=HandAngles.from_dict(right, f"{where}.right") if right is not None else None,
        )


@dataclass(frozen=True)
class NeutralPose:
    """Per-hand calibration offsets captured with the hand held at rest.

    Offsets are subtracted from the raw angles; (flexion_extension, deviation)
    per hand, degrees, each in [-45, +45].
    """

    left: tuple[float, float] = (0.0, 0.0)
    right: tuple[float, float] = (0.0, 0.0)

    def offsets(self, hand: str) -> tuple[float, float]:
        return self.left if hand == "left" else self.right

    def to_dict(self) -> dict:
        return {"left": list(self.left), "right": list(self.right)}

    @classmethod
    def from_dict(cls, obj: dict, where: str = "neutral_pose") -> "NeutralPose":
        reject_unknown(obj, {"left", "right"}, where)
        return cls(
            left=_pair(optional(obj, "left", list, [0.0, 0.0], where), f"{where}.left"),
            right=_pair(optional(obj, "right", list, [0.0, 0.0], where), f"{where}.right"),
        )


def _vec3(value, where: str) -> Vec3:
    if not isinstance(value, list) or len(value) != 3 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise SchemaError(where, "expected a 3-element number array")
    return (float(value[0]), float(value[1]), float(value[2]))


def _pair(value, where: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise SchemaError(where, "expected a 2-element number array")
    return (float(value[0]), float(value[1]))


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def wrist_angles(frame: HandFrame, calib: NeutralPose = NeutralPose()) -> WristAngles:
    """Derive per-hand wrist angles from a frame; absent hands stay absent.

    Raises MalformedFrame when a present hand's direction vector is degenerate
    (norm < 0.5). Output angles are clamped to [-90, +90] so tracking glitches
    degrade gracefully instead of killing a session.
    """
    out = {}
    for hand in HANDS:
        pose = frame.hand(hand)
        if pose is None:
            out[hand] = None
            continue
        dx, dy, dz = pose.hand_direction
        norm = math.sqrt(dx * dx + dy * dy + dz * dz)
        if norm < 0.5:
            raise MalformedFrame(f"{hand} hand_direction norm {norm:.3f} < 0.5 at t={frame.timestamp}")
        fe_off, dev_off = calib.offsets(hand)
        fe = math.degrees(math.asin(_clamp(dy, -1.0, 1.0))) - fe_off
        dev = math.degrees(math.atan2(dx, -dz)) - dev_off
        out[hand] = HandAngles(
            flexion_extension=_clamp(fe, -ANGLE_CLAMP_DEG, ANGLE_CLAMP_DEG),
            deviation=_clamp(dev, -ANGLE_CLAMP_DEG, ANGLE_CLAMP_DEG),
        )
    return WristAngles(left=out["left"], right=out["right"])


def smooth(prev: Optional[WristAngles], next_: WristAngles, alpha: float = DEFAULT_SMOOTH_ALPHA) -> WristAngles:
    """Exponential moving average per component.

    Hands absent in `next_` pass through as absent; a hand with no previous
    sample seeds the filter with its first value.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if prev is None:
        return next_
    out = {}
    for hand in HANDS:
        nxt = next_.hand(hand)
        prv = prev.hand(hand)
        if nxt is None:
            out[hand] = None
        elif prv is None:
            out[hand] = nxt
        else:
            out[hand] = HandAngles(
                flexion_extension=alpha * nxt.flexion_extension + (1.0 - alpha) * prv.flexion_extension,
                deviation=alpha * nxt.deviation + (1.0 - alpha) * prv.deviation,
            )
    return WristAngles(left=out["left"], right=out["right"])


# --- gestures ---------------------------------------------------------------

PRESS = "press"  # fast flexion (bend down), negative angle direction
FLAP = "flap"    # fast extension (bend up), positive angle direction

GESTURE_KINDS = (PRESS, FLAP)


@dataclass(frozen=True)
class GestureTuning:
    """Per-patient gesture thresholds (profile override unit)."""

    min_sweep: float = 25.0        # degrees the sweep must cover
    max_duration_ms: float = 250.0  # sweep must complete within this
    trigger_angle: float = 10.0    # sweep must end this far past neutral
    refractory_ms: float = 300.0   # dead time after an emitted event

    def to_dict(self) -> dict:
        return {
            "min_sweep": self.min_sweep,
            "max_duration_ms": self.max_duration_ms,
            "trigger_angle": self.trigger_angle,
            "refractory_ms": self.refractory_ms,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "gesture_spec") -> "GestureTuning":
        reject_unknown(obj, {"min_sweep", "max_duration_ms", "trigger_angle", "refractory_ms"}, where)
        base = cls()
        return cls(
            min_sweep=float(optional(obj, "min_sweep", float, base.min_sweep, where)),
            max_duration_ms=float(optional(obj, "max_duration_ms", float, base.max_duration_ms, where)),
            trigger_angle=float(optional(obj, "trigger_angle", float, base.trigger_angle, where)),
            refractory_ms=float(optional(obj, "refractory_ms", float, base.refractory_ms, where)),
        )


@dataclass(frozen=True)
class GestureSpec:
    kind: str = PRESS
    min_sweep: float = 25.0
    max_duration_ms: float = 250.0
    trigger_angle: float = 10.0
    refractory_ms: float = 300.0

    def __post_init__(self):
        if self.kind not in GESTURE_KINDS:
            raise ValueError(f"unknown gesture kind {self.kind!r}")
        if self.min_sweep <= 0 or self.max_duration_ms <= 0 or self.refractory_ms < 0:
            raise ValueError("min_sweep and max_duration_ms must be > 0, refractory_ms >= 0")

    @classmethod
    def from_tuning(cls, kind: str, tuning: GestureTuning) -> "GestureSpec":
        return cls(
            kind=kind,
            min_sweep=tuning.min_sweep,
            max_duration_ms=tuning.max_duration_ms,
            trigger_angle=tuning.trigger_angle,
            refractory_ms=tuning.refractory_ms,
        )


@dataclass(frozen=True)
class GestureEvent:
    hand: str
    kind: str
    timestamp: float       # ms, time of the sample that completed the sweep
    peak_velocity: float   # deg/s, signed: negative for press, positive for flap

    def to_dict(self) -> dict:
        return {
            "hand": self.hand,
            "kind": self.kind,
            "timestamp": self.timestamp,
            "peak_velocity": self.peak_velocity,
        }


class GestureDetector:
    """Incremental sweep detector over one hand's flexion/extension signal.

    A gesture fires at sample j when some earlier sample i satisfies all of:
    the signal moves monotonically in the gesture direction from i to j (ties
    allowed), t_j - t_i <= max_duration_ms, the swept angle is >= min_sweep,
    the sweep ends beyond trigger_angle past neutral in the gesture direction,
    and at least refractory_ms passed since the previous event. At most one
    event fires per pushed sample.
    """

    def __init__(self, spec: GestureSpec, hand: str = "right", last_event_ms: Optional[float] = None):
        self.spec = spec
        self.hand = hand
        self._samples: list[tuple[float, float]] = []
        self._run_start_t: Optional[float] = None
        self._last_event_ms = last_event_ms
        self._last_t: Optional[float] = None

    def reset(self) -> None:
        self._samples.clear()
        self._run_start_t = None
        self._last_t = None

    def push(self, timestamp: float, angle: float) -> Optional[GestureEvent]:
        if self._last_t is not None and timestamp <= self._last_t:
            raise ValueError(f"timestamps must be strictly increasing ({timestamp} after {self._last_t})")
        self._last_t = timestamp
        sign = -1.0 if self.spec.kind == PRESS else 1.0

        if self._samples and (angle - self._samples[-1][1]) * sign < 0.0:
            # moved against the gesture direction: the monotone run restarts here
            self._run_start_t = timestamp
        elif self._run_start_t is None:
            self._run_start_t = timestamp
        self._samples.append((timestamp, angle))

        # keep only samples that can still start a qualifying sweep
        horizon = timestamp - self.spec.max_duration_ms
        while self._samples and self._samples[0][0] < horizon:
            self._samples.pop(0)

        start_idx = None
        for idx, (t, _) in enumerate(self._samples):
            if t >= self._run_start_t:
                start_idx = idx
                break
        if start_idx is None or start_idx == len(self._samples) - 1:
            return None

        start_t, start_angle = self._samples[start_idx]
        sweep = (angle - start_angle) * sign
        ends_beyond = angle * sign >= self.spec.trigger_angle
        refractory_ok = (
            self._last_event_ms is None
            or timestamp - self._last_event_ms >= self.spec.refractory_ms
        )
        if sweep >= self.spec.min_sweep and ends_beyond and refractory_ok:
            self._last_event_ms = timestamp
            return GestureEvent(
                hand=self.hand,
                kind=self.spec.kind,
                timestamp=timestamp,
                peak_velocity=self._peak_velocity(start_idx),
            )
        return None

    def _peak_velocity(self, start_idx: int) -> float:
        sign = -1.0 if self.spec.kind == PRESS else 1.0
        best_mag = 0.0
        for (t0, a0), (t1, a1) in zip(self._samples[start_idx:], self._samples[start_idx + 1:]):
            mag = (a1 - a0) / (t1 - t0) * 1000.0 * sign
            if mag > best_mag:
                best_mag = mag
        return best_mag * sign


def detect_gesture(
    window: Sequence[tuple[float, float]],
    spec: GestureSpec,
    hand: str = "right",
    last_event_ms: Optional[float] = None,
) -> Optional[GestureEvent]:
    """Scan a (timestamp, angle) window and return the first qualifying event."""
    detector = GestureDetector(spec, hand, last_event_ms=last_event_ms)
    for t, angle in window:
        event = detector.push(t, angle)
        if event is not None:
            return event
    return None


def scan_gestures(
    window: Iterable[tuple[float, float]],
    spec: GestureSpec,
    hand: str = "right",
) -> list[GestureEvent]:
    """All events an online detector emits over the window, refractory applied."""
    detector = GestureDetector(spec, hand)
    events = []
    for t, angle in window:
        event = detector.push(t, angle)
        if event is not None:
            events.append(event)
    return events


# --- spatial checks ---------------------------------------------------------

DISTANCE_OK = "Ok"
DISTANCE_TOO_CLOSE = "TooClose"
DISTANCE_TOO_FAR = "TooFar"


def hand_distance_status(left_palm: Vec3, right_palm: Vec3, band: tuple[float, float]) -> str:
    """Classify the palm-to-palm distance against the therapist's band (cm)."""
    lo, hi = band
    if lo >= hi:
        raise ValueError(f"distance band must satisfy min < max, got {band}")
    d = math.dist(left_palm, right_palm)
    if d < lo:
        return DISTANCE_TOO_CLOSE
    if d > hi:
        return DISTANCE_TOO_FAR
    return DISTANCE_OK


FOV_WARNING = "FovWarning"
PROXIMITY_WARNING = "ProximityWarning"


def frame_quality(frame: HandFrame) -> set[str]:
    """Warnings for hands drifting out of the sensor's sweet spot."""
    warnings: set[str] = set()
    for hand in HANDS:
        pose = frame.hand(hand)
        if pose is None:
            continue
        x, y, z = pose.palm_position
        if y < MIN_PALM_HEIGHT_CM:
            warnings.add(PROXIMITY_WARNING)
        off_axis = math.degrees(math.atan2(math.hypot(x, z), y))
        if off_axis > FOV_HALF_ANGLE_DEG:
            warnings.add(FOV_WARNING)
    return warnings
