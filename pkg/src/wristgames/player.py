"""Synthetic "imperfect player" models for tuning experiments.

These simulate how a patient with limited speed and precision plays: the
rhythm player needs recovery time between presses and jitters its timing; the
skiing player tracks gate centers with lag and tremor. They exist to make
level-tuning effects measurable without humans: easier levels (wider spacing,
wider gates) must produce measurably higher hit rates for the same simulated
player and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import MODE_DEFAULT, MODE_DEVIATION
from .kinematics import HandFrame
from .levels import RHYTHM, SKIING, GenConstraints, Level, generate_level
from .profiles import AdaptPolicy, PatientProfile
from .rng import SplitMix64
from .runner import run_session
from .session import SessionRecord, statistics
from .sources import pose_from_angles


@dataclass(frozen=True)
class RhythmPlayerParams:
    attack_s: float = 0.14       # time to full flexion
    release_s: float = 0.28      # time back to neutral
    depth_deg: float = 36.0      # press depth before noise
    depth_noise_deg: float = 2.0
    timing_jitter_s: float = 0.05
    recover_s: float = 0.55      # minimum gap between attempted presses
    tremor_deg: float = 0.6      # per-sample gaussian


@dataclass(frozen=True)
class SkiPlayerParams:
    lag_s: float = 0.25          # first-order tracking lag
    tremor_hz: float = 4.7       # physiological tremor band
    tremor_amp_deg: float = 3.1  # oscillation amplitude before smoothing
    noise_deg: float = 0.4       # per-sample gaussian on top
    anticipation_s: float = 0.4  # starts moving toward a gate this early


def rhythm_player_frames(level: Level, profile: PatientProfile, seed: int, rate_hz: float = 100.0,
                         params: RhythmPlayerParams = RhythmPlayerParams()) -> list[HandFrame]:
    """Two-handed angle trace of a player pressing at note times.

    Attention is a single shared channel: a note arriving before the player
    has recovered from the previous attempt (either hand) is skipped, which
    is what makes dense levels score worse.
    """
    rng = SplitMix64(seed)
    attempts = {"left": [], "right": []}   # hand -> [(pulse_start_s, depth)]
    busy_until = -1.0
    for note in level.elements:
        jitter = rng.gauss(0.0, params.timing_jitter_s)
        depth = params.depth_deg + rng.gauss(0.0, params.depth_noise_deg)
        if note.time < busy_until:
            continue
        attempts[note.lane].append((note.time + jitter - 0.1, depth))
        busy_until = note.time + params.recover_s

    duration_s = level.duration + 1.0
    frames = []
    n = int(duration_s * rate_hz) + 1
    cursor = {"left": 0, "right": 0}
    for k in range(n):
        t_ms = k * (1000.0 / rate_hz)
        t = t_ms / 1000.0
        poses = {}
        for hand in ("left", "right"):
            pulses = attempts[hand]
            ai = cursor[hand]
            while ai < len(pulses) and t > pulses[ai][0] + params.attack_s + params.release_s:
                ai += 1
            cursor[hand] = ai
            fe = 0.0
            if ai < len(pulses):
                start, depth = pulses[ai]
                if start <= t <= start + params.attack_s:
                    fe = -depth * (t - start) / params.attack_s
                elif start + params.attack_s < t <= start + params.attack_s + params.release_s:
                    fe = -depth * (1.0 - (t - start - params.attack_s) / params.release_s)
            fe += rng.gauss(0.0, params.tremor_deg)
            poses[hand] = pose_from_angles(max(-89.0, min(89.0, fe)), 0.0, palm_position=(-10.0 if hand == "left" else 10.0, 20.0, 0.0))
        frames.append(HandFrame(timestamp=t_ms, left=poses["left"], right=poses["right"]))
    return frames


def skiing_player_frames(level: Level, profile: PatientProfile, seed: int, rate_hz: float = 100.0,
                         params: SkiPlayerParams = SkiPlayerParams()) -> list[HandFrame]:
    """Deviation trace of a player steering toward each upcoming gate.

    Error model: first-order lag toward the gate center plus an oscillatory
    tremor. The tremor is bounded, so widening a gate past its amplitude
    catches most of the residual error, which is exactly the tuning effect
    being measured.
    """
    import math

    rng = SplitMix64(seed)
    tremor_phase = rng.uniform(0.0, 2.0 * math.pi)
    hand = "right" if profile.handedness != "left" else "left"
    duration_s = level.duration + 1.0
    gates = list(level.elements)
    frames = []
    angle = 0.0
    dt = 1.0 / rate_hz
    n = int(duration_s * rate_hz) + 1
    gi = 0
    for k in range(n):
        t_ms = k * (1000.0 / rate_hz)
        t = t_ms / 1000.0
        while gi < len(gates) and t > gates[gi].time:
            gi += 1
        if gi < len(gates) and t >= gates[gi].time - params.anticipation_s - 2.0:
            center = gates[gi].center
            rom = profile.rom_deviation_right_max if center >= 0 else profile.rom_deviation_left_max
            target = center * rom
        else:
            target = 0.0
        angle += (target - angle) * min(1.0, dt / params.lag_s)
        noisy = (
            angle
            + params.tremor_amp_deg * math.sin(2.0 * math.pi * params.tremor_hz * t + tremor_phase)
            + rng.gauss(0.0, params.noise_deg)
        )
        pose = pose_from_angles(0.0, max(-89.0, min(89.0, noisy)))
        frames.append(HandFrame(timestamp=t_ms, left=pose if hand == "left" else None, right=pose if hand == "right" else None))
    return frames


def hit_rate(record: SessionRecord) -> float:
    stats = statistics(record)
    total = stats.hits + stats.misses
    return stats.hits / total if total else 0.0


@dataclass(frozen=True)
class TuningResult:
    rhythm_original: float
    rhythm_spaced: float
    skiing_original: float
    skiing_widened: float

    def to_dict(self) -> dict:
        return {
            "rhythm": {"original": self.rhythm_original, "2x_spacing": self.rhythm_spaced},
            "skiing": {"original": self.skiing_original, "1.5x_gate_width": self.skiing_widened},
        }


def tuning_comparison(seed: int = 42, profile: PatientProfile = None) -> TuningResult:
    """The level-tuning effect as a measurement.

    Same simulated player and seed on: a rhythm level vs. one with doubled
    note spacing, and a skiing level vs. one with gates 1.5x wider. Same
    generation seed keeps skiing gate times/centers identical, so wider gates
    can only help. In-session adaptation is disabled so the comparison
    isolates the level change from the engine's own easing.
    """
    if profile is None:
        profile = PatientProfile(
            patient_id="sim",
            adaptation_policy=AdaptPolicy(max_adaptations=0, stop_after_exhausted=False),
        )
    rhythm_dense = GenConstraints(duration=30.0, element_count=50, rom_fraction=0.8, min_spacing=0.4)
    rhythm_spaced = GenConstraints(duration=30.0, element_count=25, rom_fraction=0.8, min_spacing=0.8)
    ski_narrow = GenConstraints(duration=80.0, element_count=40, rom_fraction=0.8, min_spacing=1.6, gate_width=0.10)
    ski_wide = GenConstraints(duration=80.0, element_count=40, rom_fraction=0.8, min_spacing=1.6, gate_width=0.15)

    rates = {}
    for name, kind, mode, constraints, player in (
        ("rhythm_original", RHYTHM, MODE_DEFAULT, rhythm_dense, rhythm_player_frames),
        ("rhythm_spaced", RHYTHM, MODE_DEFAULT, rhythm_spaced, rhythm_player_frames),
        ("skiing_original", SKIING, MODE_DEVIATION, ski_narrow, skiing_player_frames),
        ("skiing_widened", SKIING, MODE_DEVIATION, ski_wide, skiing_player_frames),
    ):
        level = generate_level(kind, constraints, profile, seed=seed)
        frames = player(level, profile, seed=seed)
        record, _ = run_session(kind, mode, level, profile, frames)
        rates[name] = hit_rate(record)
    return TuningResult(**rates)
