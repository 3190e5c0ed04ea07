import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wristgames.jsonio import SchemaError
from wristgames.levels import (
    FLAPPY,
    GAME_KINDS,
    PLANE,
    RHYTHM,
    SKIING,
    AddElement,
    DeleteElement,
    GenConstraints,
    InfeasibleConstraints,
    Level,
    MoveElement,
    RhythmNote,
    SkiGate,
    author_level,
    generate_level,
    load_level,
    save_level,
    validate_level,
)
from wristgames.profiles import PatientProfile

PROFILE = PatientProfile(patient_id="test")


def constraints_for(kind, **overrides):
    base = dict(duration=60.0, element_count=10, rom_fraction=0.8, min_spacing=2.0)
    base.update(overrides)
    return GenConstraints(**base)


class TestGenerate:
    def test_skiing_level_is_valid_and_deterministic(self):
        c = constraints_for(SKIING)
        level = generate_level(SKIING, c, PROFILE, seed=42)
        assert len(level.elements) == 10
        assert validate_level(level, PROFILE) == []
        again = generate_level(SKIING, c, PROFILE, seed=42)
        assert save_level(level) == save_level(again)

    def test_different_seed_differs(self):
        c = constraints_for(SKIING)
        a = generate_level(SKIING, c, PROFILE, seed=1)
        b = generate_level(SKIING, c, PROFILE, seed=2)
        assert save_level(a) != save_level(b)

    def test_single_element(self):
        c = constraints_for(PLANE, element_count=1)
        level = generate_level(PLANE, c, PROFILE, seed=7)
        assert len(level.elements) == 1
        assert level.elements[0].time >= 0.0

    def test_infeasible_constraints(self):
        c = constraints_for(RHYTHM, element_count=100, min_spacing=2.0, duration=60.0)
        with pytest.raises(InfeasibleConstraints):
            generate_level(RHYTHM, c, PROFILE, seed=0)

    def test_rhythm_rom_fraction_too_small_for_gesture(self):
        # default press needs a 25 degree sweep; 0.2 of an 80 degree arc is 16
        c = constraints_for(RHYTHM, rom_fraction=0.2)
        with pytest.raises(InfeasibleConstraints):
            generate_level(RHYTHM, c, PROFILE, seed=0)

    @pytest.mark.parametrize("kind", GAME_KINDS)
    def test_seed_sweep_sound_and_spaced(self, kind):
        c = constraints_for(kind, element_count=8, duration=40.0)
        for seed in range(200):
            level = generate_level(kind, c, PROFILE, seed=seed)
            assert validate_level(level, PROFILE) == [], f"seed {seed}"
            times = [e.time for e in level.elements]
            assert all(b - a >= c.min_spacing - 1e-9 for a, b in zip(times, times[1:]))
            assert times[-1] <= c.duration

    def test_rom_respected(self):
        c = constraints_for(SKIING, rom_fraction=0.5)
        for seed in range(50):
            level = generate_level(SKIING, c, PROFILE, seed=seed)
            assert all(abs(g.center) <= 0.5 + 1e-9 for g in level.elements)


class TestValidate:
    def test_close_notes_flagged_for_hand_authored(self):
        level = Level(game_kind=RHYTHM, duration=10.0, elements=(
            RhythmNote(time=1.0, lane="left"),
            RhythmNote(time=1.05, lane="right"),
        ))
        violations = validate_level(level, PROFILE)
        assert any("spacing" in v.message for v in violations)

    def test_gate_center_out_of_range(self):
        level = Level(game_kind=SKIING, duration=10.0, elements=(SkiGate(time=1.0, center=1.5, width=0.2),))
        violations = validate_level(level, PROFILE)
        assert any("out of range" in v.message for v in violations)

    def test_duration_must_cover_elements(self):
        level = Level(game_kind=RHYTHM, duration=1.0, elements=(RhythmNote(time=5.0, lane="left"),))
        violations = validate_level(level, PROFILE)
        assert any(v.field.endswith("time") or v.field == "duration" for v in violations)


class TestAuthor:
    def test_empty_edit_list(self):
        level = author_level(RHYTHM, [])
        assert level.game_kind == RHYTHM
        assert level.duration == 0.0
        assert level.elements == ()

    def test_add_then_delete(self):
        edits = [
            AddElement(RhythmNote(time=1.0, lane="left")),
            AddElement(RhythmNote(time=2.0, lane="right")),
            AddElement(RhythmNote(time=3.0, lane="left")),
            DeleteElement(1),
        ]
        level = author_level(RHYTHM, edits, duration=10.0)
        assert [e.time for e in level.elements] == [1.0, 3.0]

    def test_move_beyond_duration_returned_but_flagged(self):
        edits = [AddElement(RhythmNote(time=1.0, lane="left")), MoveElement(0, 20.0)]
        level = author_level(RHYTHM, edits, duration=10.0)
        assert level.elements[0].time == 20.0
        assert validate_level(level, PROFILE) != []

    def test_bad_index(self):
        with pytest.raises(IndexError):
            author_level(RHYTHM, [DeleteElement(0)])


class TestFiles:
    def test_round_trip_generated(self):
        level = generate_level(FLAPPY, constraints_for(FLAPPY), PROFILE, seed=3)
        text = save_level(level)
        assert load_level(text) == level
        assert save_level(load_level(text)) == text

    def test_unknown_game_kind(self):
        obj = json.loads(save_level(author_level(RHYTHM, [])))
        obj["game_kind"] = "Tennis"
        with pytest.raises(SchemaError) as err:
            load_level(json.dumps(obj))
        assert "Tennis" in str(err.value)

    def test_gen_seed_optional(self):
        level = author_level(RHYTHM, [AddElement(RhythmNote(time=1.0, lane="left"))], duration=5.0)
        obj = json.loads(save_level(level))
        assert "gen_seed" not in obj
        assert load_level(json.dumps(obj)).gen_seed is None

    def test_unknown_element_field(self):
        obj = json.loads(save_level(Level(game_kind=SKIING, duration=5.0, elements=(SkiGate(1.0, 0.0, 0.2),))))
        obj["elements"][0]["speed"] = 3
        with pytest.raises(SchemaError) as err:
            load_level(json.dumps(obj))
        assert "speed" in str(err.value)


@given(
    kind=st.sampled_from(GAME_KINDS),
    count=st.integers(1, 12),
    duration=st.floats(20.0, 120.0),
    rom_fraction=st.floats(0.35, 1.0),
    seed=st.integers(0, 2**64 - 1),
)
@settings(max_examples=60, deadline=None)
def test_generate_validate_round_trip_property(kind, count, duration, rom_fraction, seed):
    c = GenConstraints(duration=duration, element_count=count, rom_fraction=rom_fraction, min_spacing=min(1.0, duration / (count + 1)))
    level = generate_level(kind, c, PROFILE, seed=seed)
    assert validate_level(level, PROFILE) == []
    assert load_level(save_level(level)) == level
