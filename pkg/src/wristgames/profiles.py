"""Patient profiles: the therapist's per-patient tuning knobs.

A profile is the single source of truth for allowed range of motion, session
length, gesture thresholds, hand-distance band, and the adaptive-difficulty
policy. Profiles are clinical settings, so the file schema is strict: unknown
fields are rejected by name and a schema_version is required.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .jsonio import SchemaError, canonical_dumps, optional, parse_json, reject_unknown, require
from .kinematics import GestureTuning

PROFILE_SCHEMA_VERSION = 1

HANDEDNESS = ("left", "right", "both")

SESSION_LENGTH_MIN_S = 30.0
SESSION_LENGTH_MAX_S = 1800.0


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass(frozen=True)
class AdaptPolicy:
    """When and how hard the engine eases difficulty mid-session."""

    miss_window: int = 5          # outcomes per evaluation window
    miss_threshold: float = 0.6   # miss fraction that triggers an easing step
    ease_factor: float = 0.8      # challenge scalars multiply/divide by this
    max_adaptations: int = 3
    stop_after_exhausted: bool = True

    def validate(self, where: str = "adaptation_policy") -> list[Violation]:
        out = []
        if self.miss_window < 1:
            out.append(Violation(f"{where}.miss_window", "must be >= 1"))
        if not 0.0 < self.miss_threshold <= 1.0:
            out.append(Violation(f"{where}.miss_threshold", "must be in (0, 1]"))
        if not 0.0 < self.ease_factor < 1.0:
            out.append(Violation(f"{where}.ease_factor", "must be in (0, 1)"))
        if self.max_adaptations < 0:
            out.append(Violation(f"{where}.max_adaptations", "must be >= 0"))
        return out

    def to_dict(self) -> dict:
        return {
            "miss_window": self.miss_window,
            "miss_threshold": self.miss_threshold,
            "ease_factor": self.ease_factor,
            "max_adaptations": self.max_adaptations,
            "stop_after_exhausted": self.stop_after_exhausted,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "adaptation_policy") -> "AdaptPolicy":
        reject_unknown(obj, {"miss_window", "miss_threshold", "ease_factor", "max_adaptations", "stop_after_exhausted"}, where)
        base = cls()
        return cls(
            miss_window=int(optional(obj, "miss_window", int, base.miss_window, where)),
            miss_threshold=float(optional(obj, "miss_threshold", float, base.miss_threshold, where)),
            ease_factor=float(optional(obj, "ease_factor", float, base.ease_factor, where)),
            max_adaptations=int(optional(obj, "max_adaptations", int, base.max_adaptations, where)),
            stop_after_exhausted=bool(optional(obj, "stop_after_exhausted", bool, base.stop_after_exhausted, where)),
        )


@dataclass(frozen=True)
class PatientProfile:
    patient_id: str = "default"
    handedness: str = "right"
    rom_extension_max: float = 40.0
    rom_flexion_max: float = 40.0
    rom_deviation_left_max: float = 30.0
    rom_deviation_right_max: float = 30.0
    session_length: float = 300.0                   # seconds
    gesture_spec: GestureTuning = field(default_factory=GestureTuning)
    hand_distance_band: tuple[float, float] = (15.0, 30.0)  # cm
    safety_grace: float = 1000.0                    # ms beyond ROM before a stop
    adaptation_policy: AdaptPolicy = field(default_factory=AdaptPolicy)
    rotated_flexion_sign: int = 1   # skiing slap scheme: +1 maps extension to +x

    def rom(self, channel: str) -> float:
        return {
            "extension": self.rom_extension_max,
            "flexion": self.rom_flexion_max,
            "deviation_left": self.rom_deviation_left_max,
            "deviation_right": self.rom_deviation_right_max,
        }[channel]

    def to_dict(self) -> dict:
        return {
            "schema_version": PROFILE_SCHEMA_VERSION,
            "patient_id": self.patient_id,
            "handedness": self.handedness,
            "rom_extension_max": self.rom_extension_max,
            "rom_flexion_max": self.rom_flexion_max,
            "rom_deviation_left_max": self.rom_deviation_left_max,
            "rom_deviation_right_max": self.rom_deviation_right_max,
            "session_length": self.session_length,
            "gesture_spec": self.gesture_spec.to_dict(),
            "hand_distance_band": list(self.hand_distance_band),
            "safety_grace": self.safety_grace,
            "adaptation_policy": self.adaptation_policy.to_dict(),
            "rotated_flexion_sign": self.rotated_flexion_sign,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "profile") -> "PatientProfile":
        reject_unknown(
            obj,
            {
                "schema_version", "patient_id", "handedness",
                "rom_extension_max", "rom_flexion_max",
                "rom_deviation_left_max", "rom_deviation_right_max",
                "session_length", "gesture_spec", "hand_distance_band",
                "safety_grace", "adaptation_policy", "rotated_flexion_sign",
            },
            where,
        )
        version = require(obj, "schema_version", int, where)
        if version != PROFILE_SCHEMA_VERSION:
            raise SchemaError(f"{where}.schema_version", f"unsupported version {version}")
        handedness = require(obj, "handedness", str, where)
        if handedness not in HANDEDNESS:
            raise SchemaError(f"{where}.handedness", f"must be one of {HANDEDNESS}")
        band = optional(obj, "hand_distance_band", list, [15.0, 30.0], where)
        if len(band) != 2 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in band):
            raise SchemaError(f"{where}.hand_distance_band", "expected [min_cm, max_cm]")
        sign = int(optional(obj, "rotated_flexion_sign", int, 1, where))
        if sign not in (-1, 1):
            raise SchemaError(f"{where}.rotated_flexion_sign", "must be -1 or +1")
        return cls(
            patient_id=require(obj, "patient_id", str, where),
            handedness=handedness,
            rom_extension_max=float(require(obj, "rom_extension_max", float, where)),
            rom_flexion_max=float(require(obj, "rom_flexion_max", float, where)),
            rom_deviation_left_max=float(require(obj, "rom_deviation_left_max", float, where)),
            rom_deviation_right_max=float(require(obj, "rom_deviation_right_max", float, where)),
            session_length=float(require(obj, "session_length", float, where)),
            gesture_spec=GestureTuning.from_dict(optional(obj, "gesture_spec", dict, {}, where), f"{where}.gesture_spec"),
            hand_distance_band=(float(band[0]), float(band[1])),
            safety_grace=float(optional(obj, "safety_grace", float, 1000.0, where)),
            adaptation_policy=AdaptPolicy.from_dict(optional(obj, "adaptation_policy", dict, {}, where), f"{where}.adaptation_policy"),
            rotated_flexion_sign=sign,
        )


def validate_profile(profile: PatientProfile) -> list[Violation]:
    """Every invariant violation, by field name; an empty list means valid."""
    out: list[Violation] = []
    if not profile.patient_id:
        out.append(Violation("patient_id", "must be non-empty"))
    if profile.handedness not in HANDEDNESS:
        out.append(Violation("handedness", f"must be one of {HANDEDNESS}"))
    for fname in ("rom_extension_max", "rom_flexion_max", "rom_deviation_left_max", "rom_deviation_right_max"):
        value = getattr(profile, fname)
        if not 0.0 < value <= 90.0:
            out.append(Violation(fname, "must be in (0, 90] degrees"))
    if not SESSION_LENGTH_MIN_S <= profile.session_length <= SESSION_LENGTH_MAX_S:
        out.append(Violation("session_length", f"must be in [{SESSION_LENGTH_MIN_S:.0f}, {SESSION_LENGTH_MAX_S:.0f}] s"))
    lo, hi = profile.hand_distance_band
    if not (0.0 <= lo < hi):
        out.append(Violation("hand_distance_band", "must satisfy 0 <= min < max"))
    if profile.safety_grace < 0.0:
        out.append(Violation("safety_grace", "must be >= 0 ms"))
    g = profile.gesture_spec
    if g.min_sweep <= 0:
        out.append(Violation("gesture_spec.min_sweep", "must be > 0"))
    if g.max_duration_ms <= 0:
        out.append(Violation("gesture_spec.max_duration_ms", "must be > 0"))
    if g.refractory_ms < 0:
        out.append(Violation("gesture_spec.refractory_ms", "must be >= 0"))
    out.extend(profile.adaptation_policy.validate())
    return out


def save_profile(profile: PatientProfile) -> str:
    return canonical_dumps(profile.to_dict())


def load_profile(text: str) -> PatientProfile:
    """Parse a profile document; strict schema, no validation of ranges.

    Range checks live in validate_profile so callers can report violations as
    data instead of exceptions.
    """
    obj = parse_json(text, "profile")
    if not isinstance(obj, dict):
        raise SchemaError("profile", "expected a JSON object")
    return PatientProfile.from_dict(obj)
