"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to get one PASS line per
criterion on stdout; any failure fails the suite.
"""

import json
import math
import random
import threading
import time

import pytest
from fastapi.testclient import TestClient

from wristgames.engine import (
    MODE_CONTINUOUS,
    MODE_DEFAULT,
    MODE_DEVIATION,
    MODE_IMPULSE,
    MODE_ONE_HAND,
    MODE_ROTATED_FLEXION,
    MODE_TWO_HANDS,
    RUNNING,
    STOPPED,
    new_game,
    tick,
)
from wristgames.kinematics import (
    PRESS,
    GestureSpec,
    HandAngles,
    HandFrame,
    WristAngles,
    scan_gestures,
    wrist_angles,
)
from wristgames.levels import (
    FLAPPY,
    GAME_KINDS,
    PLANE,
    RHYTHM,
    SKIING,
    GenConstraints,
    Level,
    SkiGate,
    generate_level,
    save_level,
    validate_level,
)
from wristgames.profiles import AdaptPolicy, PatientProfile
from wristgames.player import tuning_comparison
from wristgames.runner import run_session, verify_replay
from wristgames.service import create_app
from wristgames.session import load_record, parse_record, recover_record
from wristgames.sources import SyntheticSource, SyntheticSpec, Waveform, pose_from_angles

from test_kinematics import oracle_scan, piecewise_linear_signal, sample_sine


def ok(name: str) -> None:
    print(f"\nACCEPTANCE {name}: PASS")


# --- criterion: replay fidelity ------------------------------------------------

GAME_MODES = [
    (RHYTHM, MODE_DEFAULT),
    (FLAPPY, MODE_IMPULSE),
    (FLAPPY, MODE_CONTINUOUS),
    (SKIING, MODE_DEVIATION),
    (SKIING, MODE_ROTATED_FLEXION),
    (PLANE, MODE_ONE_HAND),
    (PLANE, MODE_TWO_HANDS),
]


def random_session(rng: random.Random):
    kind, mode = rng.choice(GAME_MODES)
    duration = rng.uniform(3.0, 6.0)
    count = rng.randint(2, 6)
    profile = PatientProfile(
        patient_id=f"p{rng.randint(0, 99)}",
        adaptation_policy=AdaptPolicy(miss_window=rng.randint(3, 5), max_adaptations=rng.randint(1, 3)),
    )
    constraints = GenConstraints(
        duration=duration,
        element_count=count,
        rom_fraction=rng.uniform(0.5, 1.0),
        min_spacing=0.4,
    )
    level = generate_level(kind, constraints, profile, seed=rng.getrandbits(64))
    channel = "deviation" if (kind == SKIING and mode == MODE_DEVIATION) else "flexion_extension"
    wave = Waveform(kind="sine", amplitude=rng.uniform(15.0, 35.0), frequency=rng.uniform(0.4, 1.5))
    hands = ("left", "right") if kind in (RHYTHM, PLANE) else ("right",)
    dropouts = {}
    if rng.random() < 0.3:
        start = rng.uniform(500.0, duration * 500.0)
        dropouts = {hands[0]: [(start, start + rng.uniform(100.0, 900.0))]}
    spec = SyntheticSpec(
        flexion_extension=wave if channel == "flexion_extension" else Waveform(),
        deviation=wave if channel == "deviation" else Waveform(),
        noise_amplitude=rng.uniform(0.0, 2.0),
        hands=hands,
        dropouts=dropouts,
    )
    source = SyntheticSource(spec, rate_hz=100.0, duration_s=duration + 1.0, seed=rng.getrandbits(64))
    return kind, mode, level, profile, source


def test_replay_fidelity_100_sessions():
    rng = random.Random(0xACCE97)
    t0 = time.monotonic()
    total_events = 0
    for case in range(100):
        kind, mode, level, profile, source = random_session(rng)
        record, _ = run_session(kind, mode, level, profile, source)
        reparsed = parse_record(record.serialize())
        report = verify_replay(reparsed)
        assert report.events == len(record.events()), f"case {case}"
        assert report.tick_digests == len(record.tick_digests()), f"case {case}"
        total_events += report.events
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, f"replay fidelity suite took {elapsed:.1f} s (budget 60 s)"
    assert total_events > 0
    ok(f"replay fidelity (100 sessions, {total_events} events, {elapsed:.1f} s)")


# --- criterion: kinematics oracle ------------------------------------------------

def test_kinematics_oracle_10000_point_sweep():
    worst_forward = 0.0
    worst_round_trip = 0.0
    for i in range(100):
        for j in range(100):
            fe = -89.0 + i * (178.0 / 99.0)
            dev = -89.0 + j * (178.0 / 99.0)
            pose = pose_from_angles(fe, dev)
            frame = HandFrame(timestamp=0.0, right=pose)
            angles = wrist_angles(frame).right
            # independent closed form straight from the direction vector
            dx, dy, dz = pose.hand_direction
            expect_fe = math.degrees(math.asin(max(-1.0, min(1.0, dy))))
            expect_dev = math.degrees(math.atan2(dx, -dz))
            worst_forward = max(
                worst_forward,
                abs(angles.flexion_extension - expect_fe),
                abs(angles.deviation - expect_dev),
            )
            worst_round_trip = max(
                worst_round_trip,
                abs(angles.flexion_extension - fe),
                abs(angles.deviation - dev),
            )
    assert worst_forward < 0.01
    assert worst_round_trip < 0.01
    ok(f"kinematics oracle (10,000 points, max forward err {worst_forward:.2e} deg, round trip {worst_round_trip:.2e} deg)")


# --- criterion: gesture oracle -----------------------------------------------------

def test_gesture_oracle_1000_signals_and_sinusoid():
    samples = sample_sine(30.0, 1.0, 10.0, rate_hz=100.0)
    press_events = scan_gestures(samples, GestureSpec(kind=PRESS))
    assert len(press_events) == 10

    rng = random.Random(0x6E57)
    spec = GestureSpec(kind=PRESS)
    flap = GestureSpec(kind="flap")
    for case in range(1000):
        signal = piecewise_linear_signal(rng, rng.randint(2, 10), rng.uniform(400.0, 2500.0), rng.choice([50.0, 100.0]))
        use = spec if case % 2 == 0 else flap
        got = [e.timestamp for e in scan_gestures(signal, use)]
        want = oracle_scan(signal, use)
        assert got == want, f"case {case}"
    ok("gesture oracle (exactly 10 presses on the 1 Hz sinusoid; 1000 random signals match brute force)")


# --- criterion: generator soundness + determinism ------------------------------------

def test_generator_1000_seed_sweep():
    profile = PatientProfile(patient_id="gen")
    for kind in GAME_KINDS:
        constraints = GenConstraints(duration=30.0, element_count=10, rom_fraction=0.7, min_spacing=1.0)
        for seed in range(1000):
            level = generate_level(kind, constraints, profile, seed=seed)
            violations = validate_level(level, profile)
            assert violations == [], f"{kind} seed {seed}: {violations}"
            assert save_level(level) == save_level(generate_level(kind, constraints, profile, seed=seed))
            times = [e.time for e in level.elements]
            assert all(b - a >= constraints.min_spacing - 1e-9 for a, b in zip(times, times[1:]))
            if kind == SKIING:
                assert all(abs(e.center) <= constraints.rom_fraction + 1e-9 for e in level.elements)
            elif kind == FLAPPY:
                band = constraints.rom_fraction / 2.0
                assert all(abs(e.gap_center - 0.5) <= band + 1e-9 for e in level.elements)
            elif kind == PLANE:
                assert all(
                    abs(e.center_yaw) <= constraints.rom_fraction + 1e-9
                    and abs(e.center_pitch) <= constraints.rom_fraction + 1e-9
                    for e in level.elements
                )
    ok("generator soundness + determinism (1000-seed sweep x 4 games)")


# --- criterion: adaptation + safety semantics ------------------------------------------

def test_adaptation_and_safety_semantics():
    policy = AdaptPolicy()  # window 5, threshold 0.6, ease 0.8, max 3, stop on exhaustion
    profile = PatientProfile(patient_id="adapt", adaptation_policy=policy)
    times = [1.0 + 0.5 * i for i in range(30)]
    level = Level(
        game_kind=SKIING,
        duration=times[-1] + 1.0,
        elements=tuple(SkiGate(time=t, center=0.6, width=0.1) for t in times),
    )
    state = new_game(SKIING, MODE_DEVIATION, level, profile)
    parked = WristAngles(right=HandAngles(0.0, -30.0))  # far from every gate
    adapted_at = []
    scalar_trace = []
    while state.status == RUNNING:
        state, events = tick(state, parked, (), 10.0)
        scalar_trace.append((state.scalars.fall_speed, state.scalars.hit_window_ms, state.scalars.extent_scale))
        for event in events:
            if event.kind == "Adapted":
                adapted_at.append(sum(1 for r in state.resolved if r))
    # every 5th miss trips the policy; the 4th trip exhausts and stops
    assert adapted_at == [5, 10, 15]
    assert state.status == STOPPED and state.status_reason == "AdaptExhausted"
    assert state.adaptation_count == 3
    for (f0, h0, e0), (f1, h1, e1) in zip(scalar_trace, scalar_trace[1:]):
        assert f1 <= f0 and h1 >= h0 and e1 >= e0   # challenge never increases
    expected_ease = 0.8 ** 3
    assert state.scalars.fall_speed == pytest.approx(1.5 * expected_ease)

    # sustained ROM violation: 1200 ms beyond ROM with 1000 ms grace stops the game
    state = new_game(SKIING, MODE_DEVIATION, level, profile)
    over_rom = WristAngles(right=HandAngles(50.0, 0.0))  # extension ROM is 40
    stopped_at = None
    for i in range(120):
        state, events = tick(state, over_rom, (), 10.0)
        if any(e.kind == "SafetyStop" for e in events):
            stopped_at = state.elapsed_ms
            break
    assert stopped_at == pytest.approx(1010.0)  # first tick past the 1000 ms grace
    assert state.status == STOPPED and state.status_reason.startswith("SafetyStop")

    # a 900 ms violation recovers without a stop
    state = new_game(SKIING, MODE_DEVIATION, level, profile)
    for i in range(90):
        state, _ = tick(state, over_rom, (), 10.0)
    assert state.status == RUNNING
    state, _ = tick(state, WristAngles(right=HandAngles(0.0, 0.0)), (), 10.0)
    assert state.safety_ms == {}
    ok("adaptation + safety semantics (thresholds, monotone easing, exhaustion stop, 1200 ms ROM stop)")


# --- criterion: directional tuning reproduction ---------------------------------------

def test_tuning_effect_directional_reproduction():
    result = tuning_comparison(seed=42)
    rhythm_gain = result.rhythm_spaced - result.rhythm_original
    ski_gain = result.skiing_widened - result.skiing_original
    assert result.rhythm_spaced > result.rhythm_original
    assert result.skiing_widened > result.skiing_original
    assert rhythm_gain >= 0.10, f"rhythm gain {rhythm_gain:.3f} < 10 percentage points"
    assert ski_gain >= 0.10, f"skiing gain {ski_gain:.3f} < 10 percentage points"
    ok(
        "directional tuning effect (rhythm "
        f"{result.rhythm_original:.2f}->{result.rhythm_spaced:.2f}, skiing "
        f"{result.skiing_original:.2f}->{result.skiing_widened:.2f}, same seed)"
    )


# --- criterion: format integrity --------------------------------------------------------

def test_format_integrity():
    rng = random.Random(0xF0F0)
    profile = PatientProfile(patient_id="fmt")
    level = generate_level(
        SKIING, GenConstraints(duration=3.0, element_count=3, rom_fraction=0.8, min_spacing=0.5), profile, seed=1
    )
    spec = SyntheticSpec(deviation=Waveform(kind="sine", amplitude=20.0, frequency=0.8), noise_amplitude=1.0)
    source = SyntheticSource(spec, rate_hz=100.0, duration_s=4.0, seed=2)
    record, _ = run_session(SKIING, MODE_DEVIATION, level, profile, source)
    data = record.serialize()

    # bitwise round trip
    assert parse_record(data).serialize() == data

    # single-byte corruption is detected everywhere: exhaustive over the first
    # entry, the footer, and a stride across the whole file
    exhaustive = set(range(0, min(len(data), 600)))            # header + first entries
    exhaustive |= set(range(len(data) - 400, len(data)))       # footer + digest hex
    exhaustive |= set(range(0, len(data), 101))                # everywhere else, sampled
    exhaustive |= {pos for pos in rng.sample(range(len(data)), 300)}
    checked = 0
    for pos in sorted(exhaustive):
        for flip in (0x01, 0x80):
            corrupted = bytearray(data)
            corrupted[pos] ^= flip
            with pytest.raises(ValueError):
                parse_record(bytes(corrupted))
            checked += 1

    # truncation recovery returns exactly the complete prefix
    body_start = data.index(b"\n") + 1
    recovered_ok = 0
    for k in range(1, len(data) - body_start, 37):
        _, entries, footer = recover_record(data[:-k])
        assert footer is None
        assert [e.to_dict() for e in entries] == [e.to_dict() for e in record.entries[: len(entries)]]
        recovered_ok += 1
    ok(f"format integrity (bitwise round trip, {checked} corruptions detected, {recovered_ok} truncations recovered)")


# --- criterion: service end to end ---------------------------------------------------------

def test_service_end_to_end(tmp_path):
    app = create_app(storage_root=str(tmp_path / "data"), disconnect_grace_s=0.2)
    with TestClient(app) as client:
        # keep easing but play through misses, so the session spans the full 60 s
        profile = PatientProfile(patient_id="s2", adaptation_policy=AdaptPolicy(stop_after_exhausted=False))
        assert client.put("/profiles/s2", json=profile.to_dict()).status_code == 200
        level = generate_level(
            FLAPPY,
            GenConstraints(duration=60.0, element_count=20, rom_fraction=0.8, min_spacing=1.0),
            profile,
            seed=9,
        )
        assert client.put("/levels/l60", json=level.to_dict()).status_code == 200

        # one 60 s session streamed by a headless client at 100 Hz
        start = client.post("/sessions/start", json={
            "profile_id": "s2", "level_id": "l60", "mode": "Continuous", "snapshot_every": 10,
        })
        assert start.status_code == 200
        session_id = start.json()["session_id"]
        spec = SyntheticSpec(flexion_extension=Waveform(kind="sine", amplitude=25.0, frequency=0.5))
        frames = list(SyntheticSource(spec, rate_hz=100.0, duration_s=61.0))
        assert len(frames) >= 6000
        snapshots = 0
        finished = False
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            def send_all():
                try:
                    for seq, frame in enumerate(frames, start=1):
                        ws.send_text(json.dumps({
                            "type": "InputFrame", "session_id": session_id, "seq": seq, "frame": frame.to_dict(),
                        }))
                except Exception:
                    pass

            sender = threading.Thread(target=send_all)
            sender.start()
            while True:
                try:
                    msg = json.loads(ws.receive_text())
                except Exception:
                    break
                if msg["type"] == "StateSnapshot":
                    snapshots += 1
                if msg["type"] == "Event" and msg["event"]["kind"] == "Finished":
                    finished = True
            sender.join(timeout=60)
        assert finished
        assert snapshots >= 590   # one per 10 ticks over 60 s
        path = tmp_path / "data" / "sessions" / "s2" / f"{session_id}.wrsession"
        record = load_record(str(path))
        report = verify_replay(record)
        assert report.ticks >= 6000
        assert record.footer.status == "Finished"

        # eight concurrent server-pull sessions complete without error
        level8 = generate_level(
            FLAPPY,
            GenConstraints(duration=5.0, element_count=3, rom_fraction=0.8, min_spacing=1.0),
            profile,
            seed=10,
        )
        assert client.put("/levels/l8", json=level8.to_dict()).status_code == 200
        handles = []
        for i in range(8):
            resp = client.post("/sessions/start", json={
                "profile_id": "s2", "level_id": "l8", "mode": "Continuous",
                "source": spec.to_dict(), "snapshot_every": 20, "seed": i,
            })
            assert resp.status_code == 200
            handles.append(resp.json()["session_id"])
        errors = []

        def run(sid):
            try:
                with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
                    while True:
                        try:
                            ws.receive_text()
                        except Exception:
                            break
            except Exception as exc:  # noqa: BLE001
                errors.append((sid, exc))

        threads = [threading.Thread(target=run, args=(sid,)) for sid in handles]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=120)
        assert not errors
        for sid in handles:
            path = tmp_path / "data" / "sessions" / "s2" / f"{sid}.wrsession"
            verify_replay(load_record(str(path)))
    ok("service end to end (60 s at 100 Hz verified; 8 concurrent sessions verified)")
