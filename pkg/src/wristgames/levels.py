"""Level content per game: model, authoring, validation, seeded generation.

A level is an ordered list of timed elements along the track axis. Therapists
either author levels by hand (add/move/delete commands) or generate them
randomly within constraints; both paths go through validate_level, which is
the single authority on whether a level is playable for a given patient.

Generation is reproducible: same (kind, constraints, profile, seed) gives a
byte-identical level on any machine (splitmix64, see rng.py).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .jsonio import SchemaError, canonical_dumps, optional, parse_json, reject_unknown, require
from .profiles import PatientProfile, Violation, validate_profile
from .rng import SplitMix64

LEVEL_SCHEMA_VERSION = 1

RHYTHM = "Rhythm"
FLAPPY = "Flappy"
SKIING = "Skiing"
PLANE = "Plane"
GAME_KINDS = (RHYTHM, FLAPPY, SKIING, PLANE)

LANES = ("left", "right")

# Minimum spacing assumed for hand-authored levels (no constraints snapshot):
# below this a human cannot realistically resolve consecutive elements.
MIN_HUMAN_SPACING_S = 0.3

DEFAULT_POINTS = {RHYTHM: 100, FLAPPY: 10, SKIING: 50, PLANE: 50}


class InfeasibleConstraints(ValueError):
    """Constraints cannot be satisfied by any level (spacing x count > duration)."""


@dataclass(frozen=True)
class RhythmNote:
    time: float           # seconds
    lane: str             # "left" | "right"

    def to_dict(self) -> dict:
        return {"time": self.time, "lane": self.lane}


@dataclass(frozen=True)
class FlappyPipe:
    time: float
    gap_center: float     # fraction of screen height, 0..1
    gap_height: float     # fraction of screen height

    def to_dict(self) -> dict:
        return {"time": self.time, "gap_center": self.gap_center, "gap_height": self.gap_height}


@dataclass(frozen=True)
class SkiGate:
    time: float
    center: float         # fraction of track width, -1..+1
    width: float          # fraction of track width

    def to_dict(self) -> dict:
        return {"time": self.time, "center": self.center, "width": self.width}


@dataclass(frozen=True)
class PlaneRing:
    time: float
    center_yaw: float     # -1..+1
    center_pitch: float   # -1..+1
    radius: float         # fraction

    def to_dict(self) -> dict:
        return {"time": self.time, "center_yaw": self.center_yaw, "center_pitch": self.center_pitch, "radius": self.radius}


Element = Union[RhythmNote, FlappyPipe, SkiGate, PlaneRing]

ELEMENT_TYPES = {RHYTHM: RhythmNote, FLAPPY: FlappyPipe, SKIING: SkiGate, PLANE: PlaneRing}
ELEMENT_FIELDS = {
    RHYTHM: {"time", "lane"},
    FLAPPY: {"time", "gap_center", "gap_height"},
    SKIING: {"time", "center", "width"},
    PLANE: {"time", "center_yaw", "center_pitch", "radius"},
}


@dataclass(frozen=True)
class GenConstraints:
    """Therapist knobs for random generation (duration, count, ROM share...)."""

    duration: float               # seconds
    element_count: int
    rom_fraction: float = 0.8     # share of profile ROM the level may demand
    min_spacing: float = 1.0      # seconds between consecutive elements
    lanes: tuple[str, ...] = LANES          # rhythm
    gap_height: float = 0.3                 # flappy
    gate_width: float = 0.25                # skiing
    ring_radius: float = 0.2                # plane

    def validate(self, where: str = "constraints") -> list[Violation]:
        out = []
        if self.duration <= 0:
            out.append(Violation(f"{where}.duration", "must be > 0"))
        if self.element_count < 1:
            out.append(Violation(f"{where}.element_count", "must be >= 1"))
        if not 0.0 < self.rom_fraction <= 1.0:
            out.append(Violation(f"{where}.rom_fraction", "must be in (0, 1]"))
        if self.min_spacing < 0:
            out.append(Violation(f"{where}.min_spacing", "must be >= 0"))
        if self.min_spacing * (self.element_count - 1) > self.duration:
            out.append(Violation(f"{where}.min_spacing", "spacing x count exceeds duration"))
        if not self.lanes or any(lane not in LANES for lane in self.lanes):
            out.append(Violation(f"{where}.lanes", f"must be a non-empty subset of {LANES}"))
        if not 0.0 < self.gap_height <= 1.0:
            out.append(Violation(f"{where}.gap_height", "must be in (0, 1]"))
        if not 0.0 < self.gate_width <= 2.0:
            out.append(Violation(f"{where}.gate_width", "must be in (0, 2]"))
        if not 0.0 < self.ring_radius <= 1.0:
            out.append(Violation(f"{where}.ring_radius", "must be in (0, 1]"))
        return out

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "element_count": self.element_count,
            "rom_fraction": self.rom_fraction,
            "min_spacing": self.min_spacing,
            "lanes": list(self.lanes),
            "gap_height": self.gap_height,
            "gate_width": self.gate_width,
            "ring_radius": self.ring_radius,
        }

    @classmethod
    def from_dict(cls, obj: dict, where: str = "constraints") -> "GenConstraints":
        reject_unknown(obj, {"duration", "element_count", "rom_fraction", "min_spacing", "lanes", "gap_height", "gate_width", "ring_radius"}, where)
        lanes = optional(obj, "lanes", list, list(LANES), where)
        return cls(
            duration=float(require(obj, "duration", float, where)),
            element_count=int(require(obj, "element_count", int, where)),
            rom_fraction=float(optional(obj, "rom_fraction", float, 0.8, where)),
            min_spacing=float(optional(obj, "min_spacing", float, 1.0, where)),
            lanes=tuple(str(l) for l in lanes),
            gap_height=float(optional(obj, "gap_height", float, 0.3, where)),
            gate_width=float(optional(obj, "gate_width", float, 0.25, where)),
            ring_radius=float(optional(obj, "ring_radius", float, 0.2, where)),
        )


@dataclass(frozen=True)
class Level:
    game_kind: str
    duration: float               # seconds
    elements: tuple[Element, ...] = ()
    gen_seed: Optional[int] = None
    constraints_snapshot: Optional[GenConstraints] = None
    points_per_element: Optional[int] = None   # None -> engine default for the kind

    def points(self) -> int:
        return self.points_per_element if self.points_per_element is not None else DEFAULT_POINTS[self.game_kind]

    def to_dict(self) -> dict:
        out = {
            "schema_version": LEVEL_SCHEMA_VERSION,
            "game_kind": self.game_kind,
            "duration": self.duration,
            "elements": [e.to_dict() for e in self.elements],
        }
        if self.gen_seed is not None:
            out["gen_seed"] = self.gen_seed
        if self.constraints_snapshot is not None:
            out["constraints_snapshot"] = self.constraints_snapshot.to_dict()
        if self.points_per_element is not None:
            out["points_per_element"] = self.points_per_element
        return out

    @classmethod
    def from_dict(cls, obj: dict, where: str = "level") -> "Level":
        reject_unknown(obj, {"schema_version", "game_kind", "duration", "elements", "gen_seed", "constraints_snapshot", "points_per_element"}, where)
        version = require(obj, "schema_version", int, where)
        if version != LEVEL_SCHEMA_VERSION:
            raise SchemaError(f"{where}.schema_version", f"unsupported version {version}")
        kind = require(obj, "game_kind", str, where)
        if kind not in GAME_KINDS:
            raise SchemaError(f"{where}.game_kind", f"unknown game kind {kind!r}")
        elements = []
        for i, entry in enumerate(require(obj, "elements", list, where)):
            if not isinstance(entry, dict):
                raise SchemaError(f"{where}.elements[{i}]", "expected an object")
            elements.append(_element_from_dict(kind, entry, f"{where}.elements[{i}]"))
        seed = optional(obj, "gen_seed", int, None, where)
        if seed is not None and not 0 <= seed < 2**64:
            raise SchemaError(f"{where}.gen_seed", "must be an unsigned 64-bit integer")
        snapshot = optional(obj, "constraints_snapshot", dict, None, where)
        return cls(
            game_kind=kind,
            duration=float(require(obj, "duration", float, where)),
            elements=tuple(elements),
            gen_seed=seed,
            constraints_snapshot=GenConstraints.from_dict(snapshot, f"{where}.constraints_snapshot") if snapshot is not None else None,
            points_per_element=optional(obj, "points_per_element", int, None, where),
        )


def _element_from_dict(kind: str, obj: dict, where: str) -> Element:
    reject_unknown(obj, ELEMENT_FIELDS[kind], where)
    time = float(require(obj, "time", float, where))
    if kind == RHYTHM:
        lane = require(obj, "lane", str, where)
        if lane not in LANES:
            raise SchemaError(f"{where}.lane", f"must be one of {LANES}")
        return RhythmNote(time=time, lane=lane)
    if kind == FLAPPY:
        return FlappyPipe(
            time=time,
            gap_center=float(require(obj, "gap_center", float, where)),
            gap_height=float(require(obj, "gap_height", float, where)),
        )
    if kind == SKIING:
        return SkiGate(
            time=time,
            center=float(require(obj, "center", float, where)),
            width=float(require(obj, "width", float, where)),
        )
    return PlaneRing(
        time=time,
        center_yaw=float(require(obj, "center_yaw", float, where)),
        center_pitch=float(require(obj, "center_pitch", float, where)),
        radius=float(require(obj, "radius", float, where)),
    )


def save_level(level: Level) -> str:
    return canonical_dumps(level.to_dict())


def load_level(text: str) -> Level:
    obj = parse_json(text, "level")
    if not isinstance(obj, dict):
        raise SchemaError("level", "expected a JSON object")
    return Level.from_dict(obj)


# --- validation ---------------------------------------------------------------

def _reachable_band(rom_fraction: float) -> tuple[float, float]:
    """Track band [lo, hi] in -1..+1 coordinates reachable at this ROM share.

    The engine maps -ROM..+ROM linearly onto -1..+1 (and 0..1 for flappy via
    a 0.5 shift), so a rom_fraction f reaches exactly the central f band.
    """
    return (-rom_fraction, rom_fraction)


def validate_level(level: Level, profile: PatientProfile) -> list[Violation]:
    """All level violations against the profile; empty list means playable."""
    out: list[Violation] = []
    out.extend(validate_profile(profile))
    if level.game_kind not in GAME_KINDS:
        out.append(Violation("game_kind", f"unknown game kind {level.game_kind!r}"))
        return out
    if level.duration < 0:
        out.append(Violation("duration", "must be >= 0"))
    if level.points_per_element is not None and level.points_per_element < 0:
        out.append(Violation("points_per_element", "must be >= 0"))

    snapshot = level.constraints_snapshot
    if snapshot is not None:
        out.extend(snapshot.validate("constraints_snapshot"))
    rom_fraction = snapshot.rom_fraction if snapshot is not None else 1.0
    min_spacing = snapshot.min_spacing if snapshot is not None else MIN_HUMAN_SPACING_S
    band_lo, band_hi = _reachable_band(rom_fraction)

    prev_time = None
    for i, element in enumerate(level.elements):
        where = f"elements[{i}]"
        if not isinstance(element, ELEMENT_TYPES[level.game_kind]):
            out.append(Violation(where, f"element type {type(element).__name__} does not match {level.game_kind}"))
            continue
        if element.time < 0:
            out.append(Violation(f"{where}.time", "must be >= 0"))
        if prev_time is not None:
            if element.time <= prev_time:
                out.append(Violation(f"{where}.time", "element times must be strictly increasing"))
            elif element.time - prev_time < min_spacing - 1e-9:
                out.append(Violation(f"{where}.time", f"spacing {element.time - prev_time:.3f} s below minimum {min_spacing:.3f} s"))
        prev_time = element.time
        if element.time > level.duration:
            out.append(Violation(f"{where}.time", "beyond level duration"))

        if isinstance(element, RhythmNote):
            if element.lane not in LANES:
                out.append(Violation(f"{where}.lane", f"must be one of {LANES}"))
        elif isinstance(element, FlappyPipe):
            if not 0.0 <= element.gap_center <= 1.0:
                out.append(Violation(f"{where}.gap_center", "center out of range [0, 1]"))
            if not 0.0 < element.gap_height <= 1.0:
                out.append(Violation(f"{where}.gap_height", "must be in (0, 1]"))
            if element.gap_center - element.gap_height / 2 < -1e-9 or element.gap_center + element.gap_height / 2 > 1.0 + 1e-9:
                out.append(Violation(f"{where}.gap_height", "gap extends past the screen"))
            center_band = (0.5 + band_lo / 2, 0.5 + band_hi / 2)  # 0..1 coordinates
            if not center_band[0] - 1e-9 <= element.gap_center <= center_band[1] + 1e-9:
                out.append(Violation(f"{where}.gap_center", f"outside reachable band for rom_fraction {rom_fraction}"))
        elif isinstance(element, SkiGate):
            if not -1.0 <= element.center <= 1.0:
                out.append(Violation(f"{where}.center", "center out of range [-1, 1]"))
            if not 0.0 < element.width <= 2.0:
                out.append(Violation(f"{where}.width", "must be in (0, 2]"))
            if element.center - element.width / 2 < -1.0 - 1e-9 or element.center + element.width / 2 > 1.0 + 1e-9:
                out.append(Violation(f"{where}.width", "gate extends past the track"))
            if not band_lo - 1e-9 <= element.center <= band_hi + 1e-9:
                out.append(Violation(f"{where}.center", f"outside reachable band for rom_fraction {rom_fraction}"))
        elif isinstance(element, PlaneRing):
            for axis in ("center_yaw", "center_pitch"):
                value = getattr(element, axis)
                if not -1.0 <= value <= 1.0:
                    out.append(Violation(f"{where}.{axis}", "center out of range [-1, 1]"))
                elif not band_lo - 1e-9 <= value <= band_hi + 1e-9:
                    out.append(Violation(f"{where}.{axis}", f"outside reachable band for rom_fraction {rom_fraction}"))
                if abs(value) + element.radius > 1.0 + 1e-9:
                    out.append(Violation(f"{where}.radius", "ring extends past the view"))
            if not 0.0 < element.radius <= 1.0:
                out.append(Violation(f"{where}.radius", "must be in (0, 1]"))

    if level.elements and level.elements[-1].time > level.duration:
        out.append(Violation("duration", "must be >= the last element time"))

    if level.game_kind == RHYTHM and level.elements:
        tuning = profile.gesture_spec
        if tuning.trigger_angle > rom_fraction * profile.rom_flexion_max:
            out.append(Violation("gesture_spec.trigger_angle", "press trigger beyond reachable flexion"))
        if tuning.min_sweep > rom_fraction * (profile.rom_flexion_max + profile.rom_extension_max):
            out.append(Violation("gesture_spec.min_sweep", "press sweep beyond reachable arc"))
    return out


# --- generation -----------------------------------------------------------------

def generate_level(kind: str, constraints: GenConstraints, profile: PatientProfile, seed: int) -> Level:
    """Random level within constraints; deterministic in (kind, constraints, profile, seed).

    Times use a jittered fixed stride so min_spacing holds by construction;
    positions are sampled uniformly inside the ROM-reachable band intersected
    with the on-screen extent for the element's size.
    """
    if kind not in GAME_KINDS:
        raise ValueError(f"unknown game kind {kind!r}")
    if constraints.min_spacing * constraints.element_count > constraints.duration:
        raise InfeasibleConstraints(
            f"{constraints.element_count} elements at >= {constraints.min_spacing} s spacing do not fit in {constraints.duration} s"
        )
    if kind == RHYTHM:
        tuning = profile.gesture_spec
        if (tuning.trigger_angle > constraints.rom_fraction * profile.rom_flexion_max
                or tuning.min_sweep > constraints.rom_fraction * (profile.rom_flexion_max + profile.rom_extension_max)):
            raise InfeasibleConstraints("rom_fraction too small for the profile's press gesture")
    bad = constraints.validate() + validate_profile(profile)
    if bad:
        raise ValueError("invalid inputs: " + "; ".join(map(str, bad)))

    rng = SplitMix64(seed)
    count = constraints.element_count
    stride = constraints.duration / count
    jitter_half = (stride - constraints.min_spacing) / 2.0
    band_lo, band_hi = _reachable_band(constraints.rom_fraction)

    elements: list[Element] = []
    for k in range(count):
        time = (k + 0.5) * stride + rng.uniform(-jitter_half, jitter_half)
        if kind == RHYTHM:
            elements.append(RhythmNote(time=time, lane=rng.choice(constraints.lanes)))
        elif kind == FLAPPY:
            h = constraints.gap_height
            lo = max(0.5 + band_lo / 2, h / 2)
            hi = min(0.5 + band_hi / 2, 1.0 - h / 2)
            elements.append(FlappyPipe(time=time, gap_center=rng.uniform(lo, hi), gap_height=h))
        elif kind == SKIING:
            w = constraints.gate_width
            lo = max(band_lo, -1.0 + w / 2)
            hi = min(band_hi, 1.0 - w / 2)
            elements.append(SkiGate(time=time, center=rng.uniform(lo, hi), width=w))
        else:
            r = constraints.ring_radius
            lo = max(band_lo, -1.0 + r)
            hi = min(band_hi, 1.0 - r)
            yaw = rng.uniform(lo, hi)
            pitch = rng.uniform(lo, hi)
            elements.append(PlaneRing(time=time, center_yaw=yaw, center_pitch=pitch, radius=r))

    return Level(
        game_kind=kind,
        duration=constraints.duration,
        elements=tuple(elements),
        gen_seed=seed,
        constraints_snapshot=constraints,
    )


# --- authoring -------------------------------------------------------------------

@dataclass(frozen=True)
class AddElement:
    element: Element


@dataclass(frozen=True)
class MoveElement:
    index: int
    time: float


@dataclass(frozen=True)
class DeleteElement:
    index: int


EditCommand = Union[AddElement, MoveElement, DeleteElement]


def author_level(kind: str, edits: Sequence[EditCommand], duration: float = 0.0) -> Level:
    """Apply edit commands in order; the result is NOT validated here.

    Bad geometry or ordering is the therapist's to see via validate_level;
    only structurally impossible edits (bad indices) raise.
    """
    if kind not in GAME_KINDS:
        raise ValueError(f"unknown game kind {kind!r}")
    elements: list[Element] = []
    for n, edit in enumerate(edits):
        if isinstance(edit, AddElement):
            if not isinstance(edit.element, ELEMENT_TYPES[kind]):
                raise ValueError(f"edit {n}: element type {type(edit.element).__name__} does not match {kind}")
            elements.append(edit.element)
        elif isinstance(edit, MoveElement):
            if not 0 <= edit.index < len(elements):
                raise IndexError(f"edit {n}: index {edit.index} out of range")
            old = elements[edit.index]
            elements[edit.index] = type(old)(**{**_fields_of(old), "time": edit.time})
        elif isinstance(edit, DeleteElement):
            if not 0 <= edit.index < len(elements):
                raise IndexError(f"edit {n}: index {edit.index} out of range")
            del elements[edit.index]
        else:
            raise ValueError(f"edit {n}: unknown command {type(edit).__name__}")
    return Level(game_kind=kind, duration=duration, elements=tuple(elements))


def _fields_of(element: Element) -> dict:
    return element.to_dict()
