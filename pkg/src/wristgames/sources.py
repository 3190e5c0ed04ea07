"""Frame sources: synthetic motion, recorded traces, and the device bridge.

The engine only ever sees HandFrame streams, so anything that can produce
frames can drive a session: a deterministic synthetic generator (tests, CLI),
a previously recorded session file, or an external hardware adapter speaking
the bridge protocol (newline-delimited JSON HandFrames over a TCP socket).
"""

from __future__ import annotations

import math
import socket
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .jsonio import SchemaError, optional, parse_json, reject_unknown, require
from .kinematics import HandFrame, HandPose, Vec3
from .rng import SplitMix64

NOMINAL_RATE_MIN_HZ = 30.0
NOMINAL_RATE_MAX_HZ = 240.0

DEFAULT_PALM_HEIGHT_CM = 20.0
DEFAULT_HAND_SEPARATION_CM = 20.0


class TraceParseError(ValueError):
    pass


class BridgeDisconnected(ConnectionError):
    pass


# --- angle -> pose inversion -----------------------------------------------------

def synth_inverse(flexion_extension: float, deviation: float) -> Vec3:
    """Direction vector whose wrist_angles are the requested degrees.

    Exact inverse of asin/atan2 up to float rounding; at |flexion| = 90 the
    deviation is geometrically undefined (the hand points straight up/down).
    """
    fe = math.radians(flexion_extension)
    dev = math.radians(deviation)
    dy = math.sin(fe)
    h = math.cos(fe)
    return (h * math.sin(dev), dy, -h * math.cos(dev))


def pose_from_angles(
    flexion_extension: float,
    deviation: float,
    palm_position: Vec3 = (0.0, DEFAULT_PALM_HEIGHT_CM, 0.0),
    confidence: float = 1.0,
) -> HandPose:
    return HandPose(
        palm_position=palm_position,
        hand_direction=synth_inverse(flexion_extension, deviation),
        palm_normal=(0.0, -1.0, 0.0),
        confidence=confidence,
    )


# --- waveforms --------------------------------------------------------------------

@dataclass(frozen=True)
class Waveform:
    """constant(value) | sine(amplitude, frequency, phase) | sweep(start, end, duration)."""

    kind: str = "constant"
    value: float = 0.0
    amplitude: float = 0.0
    frequency: float = 1.0
    phase: float = 0.0          # radians
    start: float = 0.0
    end: float = 0.0
    duration: float = 1.0       # seconds; sweep holds its end value afterwards

    def __post_init__(self):
        if self.kind not in ("constant", "sine", "sweep"):
            raise ValueError(f"unknown waveform kind {self.kind!r}")
        if self.kind == "sine" and not (abs(self.amplitude) <= 90.0 and 0.0 < self.frequency <= 5.0):
            raise ValueError("sine needs |amplitude| <= 90 deg and frequency in (0, 5] Hz")
        if self.kind == "sweep" and self.duration <= 0:
            raise ValueError("sweep duration must be > 0")

    def at(self, t_s: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "sine":
            return self.amplitude * math.sin(2.0 * math.pi * self.frequency * t_s + self.phase)
        frac = min(max(t_s / self.duration, 0.0), 1.0)
        return self.start + frac * (self.end - self.start)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "sine":
            return {"kind": "sine", "amplitude": self.amplitude, "frequency": self.frequency, "phase": self.phase}
        return {"kind": "sweep", "start": self.start, "end": self.end, "duration": self.duration}

    @classmethod
    def from_dict(cls, obj: dict, where: str = "waveform") -> "Waveform":
        kind = require(obj, "kind", str, where)
        if kind == "constant":
            reject_unknown(obj, {"kind", "value"}, where)
            return cls(kind="constant", value=float(optional(obj, "value", float, 0.0, where)))
        if kind == "sine":
            reject_unknown(obj, {"kind", "amplitude", "frequency", "phase"}, where)
            return cls(
                kind="sine",
                amplitude=float(require(obj, "amplitude", float, where)),
                frequency=float(require(obj, "frequency", float, where)),
                phase=float(optional(obj, "phase", float, 0.0, where)),
            )
        if kind == "sweep":
            reject_unknown(obj, {"kind", "start", "end", "duration"}, where)
            return cls(
                kind="sweep",
                start=float(require(obj, "start", float, where)),
                end=float(require(obj, "end", float, where)),
                duration=float(require(obj, "duration", float, where)),
            )
        raise SchemaError(f"{where}.kind", f"unknown waveform kind {kind!r}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Deterministic motion recipe; frames are a pure function of (spec, index, seed)."""

    flexion_extension: Waveform = field(default_factory=Waveform)
    deviation: Waveform = field(default_factory=Waveform)
    noise_amplitude: float = 0.0                       # degrees, gaussian
    hands: tuple[str, ...] = ("right",)
    dropouts: dict = field(default_factory=dict)       # hand -> [[start_ms, end_ms], ...]
    hand_separation_cm: float = DEFAULT_HAND_SEPARATION_CM

    def hand_absent(self, hand: str, t_ms: float) -> bool:
        if hand not in self.hands:
            return True
        return any(a <= t_ms < b for a, b in self.dropouts.get(hand, ()))

    def to_dict(self) -> dict:
        return {
            "flexion_extension": self.flexion_extension.to_dict(),
            "deviation": self.deviation.to_dict(),
            "noise_amplitude": self.noise_amplitude,
            "hands": list(self.hands),
            "dropouts": {h: [list(w) for w in ws] for h, ws in self.dropouts.items()},
            "hand_separation_cm": self.hand_separation_cm,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "synthetic") -> "SyntheticSpec":
        reject_unknown(obj, {"flexion_extension", "deviation", "noise_amplitude", "hands", "dropouts", "hand_separation_cm"}, where)
        fe = optional(obj, "flexion_extension", dict, None, where)
        dev = optional(obj, "deviation", dict, None, where)
        hands = optional(obj, "hands", list, ["right"], where)
        dropouts_raw = optional(obj, "dropouts", dict, {}, where)
        dropouts = {}
        for hand, windows in dropouts_raw.items():
            if hand not in ("left", "right"):
                raise SchemaError(f"{where}.dropouts.{hand}", "hand must be 'left' or 'right'")
            dropouts[hand] = [(float(w[0]), float(w[1])) for w in windows]
        return cls(
            flexion_extension=Waveform.from_dict(fe, f"{where}.flexion_extension") if fe else Waveform(),
            deviation=Waveform.from_dict(dev, f"{where}.deviation") if dev else Waveform(),
            noise_amplitude=float(optional(obj, "noise_amplitude", float, 0.0, where)),
            hands=tuple(str(h) for h in hands),
            dropouts=dropouts,
            hand_separation_cm=float(optional(obj, "hand_separation_cm", float, DEFAULT_HAND_SEPARATION_CM, where)),
        )


class SyntheticSource:
    """Iterator of HandFrames sampled from a SyntheticSpec at nominal_rate."""

    def __init__(self, spec: SyntheticSpec, rate_hz: float = 100.0, duration_s: Optional[float] = None, seed: int = 0):
        if not NOMINAL_RATE_MIN_HZ <= rate_hz <= NOMINAL_RATE_MAX_HZ:
            raise ValueError(f"rate must be in [{NOMINAL_RATE_MIN_HZ}, {NOMINAL_RATE_MAX_HZ}] Hz")
        self.spec = spec
        self.rate_hz = rate_hz
        self.duration_s = duration_s
        self.seed = seed
        self._rng = SplitMix64(seed)
        self._index = 0

    def __iter__(self) -> Iterator[HandFrame]:
        return self

    def __next__(self) -> HandFrame:
        t_ms = self._index * (1000.0 / self.rate_hz)
        if self.duration_s is not None and t_ms > self.duration_s * 1000.0:
            raise StopIteration
        self._index += 1
        t_s = t_ms / 1000.0
        spec = self.spec
        poses = {}
        for hand in ("left", "right"):
            if spec.hand_absent(hand, t_ms):
                poses[hand] = None
                continue
            fe = spec.flexion_extension.at(t_s)
            dev = spec.deviation.at(t_s)
            if spec.noise_amplitude > 0.0:
                fe += self._rng.gauss(0.0, spec.noise_amplitude)
                dev += self._rng.gauss(0.0, spec.noise_amplitude)
            fe = max(-89.9, min(89.9, fe))
            dev = max(-89.9, min(89.9, dev))
            x = -spec.hand_separation_cm / 2.0 if hand == "left" else spec.hand_separation_cm / 2.0
            poses[hand] = pose_from_angles(fe, dev, palm_position=(x, DEFAULT_PALM_HEIGHT_CM, 0.0))
        return HandFrame(timestamp=t_ms, left=poses["left"], right=poses["right"])


class ListSource:
    """Wrap a prebuilt frame list (player simulations, tests)."""

    def __init__(self, frames):
        self._iter = iter(frames)

    def __iter__(self):
        return self

    def __next__(self) -> HandFrame:
        return next(self._iter)


class TraceSource:
    """Frames replayed verbatim from a recorded session file body."""

    def __init__(self, path: str):
        from .session import recover_record  # lazy: session imports kinematics too

        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise TraceParseError(f"cannot read trace {path}: {exc}") from exc
        try:
            _, entries, _ = recover_record(data)
        except Exception as exc:
            raise TraceParseError(f"cannot parse trace {path}: {exc}") from exc
        self._frames = [e.frame for e in entries if hasattr(e, "frame")]
        self._iter = iter(self._frames)

    def __len__(self) -> int:
        return len(self._frames)

    def __iter__(self):
        return self

    def __next__(self) -> HandFrame:
        return next(self._iter)


class BridgeSource:
    """Connects to a device bridge: one HandFrame JSON object per line."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0):
        host, _, port = endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bridge endpoint must be host:port, got {endpoint!r}")
        try:
            self._sock = socket.create_connection((host, int(port)), timeout=timeout_s)
        except OSError as exc:
            raise BridgeDisconnected(f"cannot connect to bridge {endpoint}: {exc}") from exc
        self._file = self._sock.makefile("r", encoding="utf-8")

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass

    def __iter__(self):
        return self

    def __next__(self) -> HandFrame:
        try:
            line = self._file.readline()
        except OSError as exc:
            self.close()
            raise BridgeDisconnected(f"bridge read failed: {exc}") from exc
        if not line:
            self.close()
            raise StopIteration
        obj = parse_json(line, "bridge frame")
        if not isinstance(obj, dict):
            raise SchemaError("bridge frame", "expected a JSON object per line")
        return HandFrame.from_dict(obj)
