#!/usr/bin/env python3
"""Run one synthetic session per game end to end and verify its replay.

Writes the session files into ./demo-sessions/ and prints a summary line per
game: final score, status, event counts, and the replay verification result.
"""

import sys
from pathlib import Path

from wristgames.engine import MODE_CONTINUOUS, MODE_DEFAULT, MODE_DEVIATION, MODE_TWO_HANDS
from wristgames.levels import FLAPPY, PLANE, RHYTHM, SKIING, GenConstraints, generate_level
from wristgames.player import rhythm_player_frames, skiing_player_frames
from wristgames.profiles import PatientProfile
from wristgames.runner import make_header, run_session, verify_replay
from wristgames.session import Recorder, statistics
from wristgames.sources import ListSource, SyntheticSource, SyntheticSpec, Waveform

RUNS = [
    (RHYTHM, MODE_DEFAULT, "player", ("left", "right")),
    (FLAPPY, MODE_CONTINUOUS, "flexion_extension", ("right",)),
    (SKIING, MODE_DEVIATION, "player", ("right",)),
    (PLANE, MODE_TWO_HANDS, "flexion_extension", ("left", "right")),
]


def main():
    out_dir = Path("demo-sessions")
    out_dir.mkdir(exist_ok=True)
    profile = PatientProfile(patient_id="demo")
    for kind, mode, channel, hands in RUNS:
        constraints = GenConstraints(duration=20.0, element_count=8, rom_fraction=0.8, min_spacing=1.0)
        level = generate_level(kind, constraints, profile, seed=42)
        if channel == "player":
            player = rhythm_player_frames if kind == RHYTHM else skiing_player_frames
            source = ListSource(player(level, profile, seed=7))
        else:
            wave = Waveform(kind="sine", amplitude=25.0, frequency=0.5)
            spec = SyntheticSpec(
                flexion_extension=wave if channel == "flexion_extension" else Waveform(),
                deviation=wave if channel == "deviation" else Waveform(),
                noise_amplitude=1.0,
                hands=hands,
            )
            source = SyntheticSource(spec, rate_hz=100.0, duration_s=22.0, seed=7)
        path = out_dir / f"{kind.lower()}.wrsession"
        header = make_header(kind, mode, level, profile, source={"demo": True})
        recorder = Recorder(header, path=str(path))
        record, state = run_session(kind, mode, level, profile, source, recorder=recorder)
        report = verify_replay(record)
        stats = statistics(record)
        print(
            f"{kind:>7} {mode:<11} score {state.score:>4}  {record.footer.status:<9}"
            f" hits {stats.hits}/{stats.hits + stats.misses}  replay: {report.ticks} ticks verified -> {path}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
