import dataclasses

import pytest

from wristgames.engine import FINISHED, MODE_CONTINUOUS, MODE_DEFAULT, MODE_DEVIATION, MODE_IMPULSE, MODE_TWO_HANDS
from wristgames.levels import FLAPPY, PLANE, RHYTHM, SKIING, GenConstraints, generate_level
from wristgames.profiles import PatientProfile
from wristgames.runner import STOP_SOURCE_ENDED, SessionRunner, make_header, replay, run_session, verify_replay
from wristgames.session import Recorder, ReplayDivergence, SessionRecord, TickEntry, parse_record
from wristgames.sources import SyntheticSource, SyntheticSpec, Waveform

PROFILE = PatientProfile(patient_id="p1")


def sine_source(duration_s, amplitude=25.0, frequency=0.5, seed=0, noise=0.0, hands=("right",), channel="flexion_extension"):
    wave = Waveform(kind="sine", amplitude=amplitude, frequency=frequency)
    spec = SyntheticSpec(
        flexion_extension=wave if channel == "flexion_extension" else Waveform(),
        deviation=wave if channel == "deviation" else Waveform(),
        noise_amplitude=noise,
        hands=hands,
    )
    return SyntheticSpec.from_dict(spec.to_dict()), SyntheticSource(spec, rate_hz=100.0, duration_s=duration_s, seed=seed)


def quick_level(kind, duration=6.0, count=4, **kw):
    c = GenConstraints(duration=duration, element_count=count, rom_fraction=0.8, min_spacing=0.5, **kw)
    return generate_level(kind, c, PROFILE, seed=7)


class TestRunSession:
    def test_skiing_session_finishes(self):
        level = quick_level(SKIING)
        _, source = sine_source(duration_s=8.0, channel="deviation")
        record, state = run_session(SKIING, MODE_DEVIATION, level, PROFILE, source)
        assert state.status == FINISHED
        assert record.footer.status == FINISHED
        assert record.footer.final_score == state.score
        outcomes = [e for e in record.events() if e.kind in ("GatePassed", "Miss")]
        assert len(outcomes) == len(level.elements)

    def test_source_exhaustion_marks_stopped(self):
        level = quick_level(SKIING, duration=20.0)
        _, source = sine_source(duration_s=2.0, channel="deviation")
        record, state = run_session(SKIING, MODE_DEVIATION, level, PROFILE, source)
        assert record.footer.status == "Stopped"
        assert record.footer.status_reason == STOP_SOURCE_ENDED

    def test_tick_digests_every_second(self):
        level = quick_level(SKIING)
        _, source = sine_source(duration_s=8.0, channel="deviation")
        record, _ = run_session(SKIING, MODE_DEVIATION, level, PROFILE, source)
        digests = record.tick_digests()
        assert [d.tick for d in digests[:3]] == [100, 200, 300]

    def test_frames_recorded_with_smoothed_angles(self):
        level = quick_level(FLAPPY)
        _, source = sine_source(duration_s=2.0)
        record, _ = run_session(FLAPPY, MODE_CONTINUOUS, level, PROFILE, source)
        frames = record.frames()
        assert len(frames) == 201
        # smoothing lags the raw sine, so recorded angles differ from raw
        assert frames[30].angles.right is not None


class TestReplay:
    @pytest.mark.parametrize(
        "kind,mode,channel",
        [
            (RHYTHM, MODE_DEFAULT, "flexion_extension"),
            (FLAPPY, MODE_IMPULSE, "flexion_extension"),
            (FLAPPY, MODE_CONTINUOUS, "flexion_extension"),
            (SKIING, MODE_DEVIATION, "deviation"),
            (PLANE, MODE_TWO_HANDS, "flexion_extension"),
        ],
    )
    def test_replay_reproduces_session(self, kind, mode, channel):
        level = quick_level(kind)
        hands = ("left", "right") if kind in (RHYTHM, PLANE) else ("right",)
        _, source = sine_source(duration_s=8.0, channel=channel, noise=1.5, seed=3, hands=hands)
        record, _ = run_session(kind, mode, level, PROFILE, source)
        report = verify_replay(record)
        assert report.events == len(record.events())
        assert report.tick_digests == len(record.tick_digests())

    def test_replay_after_serialization_round_trip(self):
        level = quick_level(SKIING)
        _, source = sine_source(duration_s=8.0, channel="deviation", noise=2.0, seed=11)
        record, _ = run_session(SKIING, MODE_DEVIATION, level, PROFILE, source)
        verify_replay(parse_record(record.serialize()))

    def test_tampered_tick_hash_diverges(self):
        level = quick_level(SKIING)
        _, source = sine_source(duration_s=8.0, channel="deviation")
        record, _ = run_session(SKIING, MODE_DEVIATION, level, PROFILE, source)
        entries = list(record.entries)
        for i, entry in enumerate(entries):
            if isinstance(entry, TickEntry):
                entries[i] = dataclasses.replace(entry, state_hash="0" * 64)
                break
        tampered = SessionRecord(header=record.header, entries=tuple(entries), footer=record.footer)
        reparsed = parse_record(tampered.serialize())  # integrity passes: it is a "valid" file
        with pytest.raises(ReplayDivergence) as err:
            verify_replay(reparsed)
        assert err.value.entry_index is not None

    def test_incompatible_engine_behavior_reports_tick(self):
        # simulate an engine change by altering the recorded profile-driven outcome:
        # drop a recorded event so the replay has an extra one
        level = quick_level(SKIING)
        _, source = sine_source(duration_s=8.0, channel="deviation")
        record, _ = run_session(SKIING, MODE_DEVIATION, level, PROFILE, source)
        entries = [e for e in record.entries]
        event_idx = next(i for i, e in enumerate(entries) if hasattr(e, "event"))
        del entries[event_idx]
        tampered = SessionRecord(header=record.header, entries=tuple(entries), footer=record.footer)
        with pytest.raises(ReplayDivergence):
            verify_replay(tampered)


class TestSampleAndHold:
    def test_tick_uses_inputs_from_before_its_start(self):
        level = quick_level(SKIING)
        runner = SessionRunner(SKIING, MODE_DEVIATION, level, PROFILE)
        _, source = sine_source(duration_s=1.0, channel="deviation")
        frames = list(source)
        first = runner.process_frame(frames[0])
        assert first.ticks == []  # nothing due before t=0 frame
        second = runner.process_frame(frames[1])
        assert len(second.ticks) == 1
        assert second.ticks[0].state.elapsed_ms == 10.0
