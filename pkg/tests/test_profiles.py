import pytest
from hypothesis import given
from hypothesis import strategies as st

from wristgames.jsonio import SchemaError, parse_json
from wristgames.kinematics import GestureTuning
from wristgames.profiles import (
    AdaptPolicy,
    PatientProfile,
    load_profile,
    save_profile,
    validate_profile,
)


def test_default_profile_is_valid():
    assert validate_profile(PatientProfile()) == []


def test_zero_rom_flagged():
    p = PatientProfile(rom_extension_max=0.0)
    violations = validate_profile(p)
    assert any(v.field == "rom_extension_max" for v in violations)


def test_short_session_flagged():
    violations = validate_profile(PatientProfile(session_length=10.0))
    assert any(v.field == "session_length" for v in violations)


def test_bad_band_flagged():
    violations = validate_profile(PatientProfile(hand_distance_band=(30.0, 15.0)))
    assert any(v.field == "hand_distance_band" for v in violations)


def test_bad_policy_flagged():
    p = PatientProfile(adaptation_policy=AdaptPolicy(ease_factor=1.5))
    violations = validate_profile(p)
    assert any("ease_factor" in v.field for v in violations)


def test_round_trip_default():
    p = PatientProfile(patient_id="s2")
    assert load_profile(save_profile(p)) == p


def test_missing_required_field_named():
    obj = parse_json(save_profile(PatientProfile()))
    del obj["rom_extension_max"]
    import json

    with pytest.raises(SchemaError) as err:
        load_profile(json.dumps(obj))
    assert "rom_extension_max" in str(err.value)


def test_unknown_field_named():
    obj = parse_json(save_profile(PatientProfile()))
    obj["foo"] = 1
    import json

    with pytest.raises(SchemaError) as err:
        load_profile(json.dumps(obj))
    assert "foo" in str(err.value)


def test_schema_version_required():
    obj = parse_json(save_profile(PatientProfile()))
    del obj["schema_version"]
    import json

    with pytest.raises(SchemaError) as err:
        load_profile(json.dumps(obj))
    assert "schema_version" in str(err.value)


def test_parse_error_reports_position():
    with pytest.raises(SchemaError) as err:
        load_profile("{not json")
    assert "line" in str(err.value)


profiles = st.builds(
    PatientProfile,
    patient_id=st.text(min_size=1, max_size=12, alphabet="abcdefghij0123456789"),
    handedness=st.sampled_from(["left", "right", "both"]),
    rom_extension_max=st.floats(1.0, 90.0),
    rom_flexion_max=st.floats(1.0, 90.0),
    rom_deviation_left_max=st.floats(1.0, 90.0),
    rom_deviation_right_max=st.floats(1.0, 90.0),
    session_length=st.floats(30.0, 1800.0),
    gesture_spec=st.builds(
        GestureTuning,
        min_sweep=st.floats(5.0, 45.0),
        max_duration_ms=st.floats(100.0, 500.0),
        trigger_angle=st.floats(0.0, 30.0),
        refractory_ms=st.floats(0.0, 1000.0),
    ),
    hand_distance_band=st.tuples(st.floats(0.0, 14.0), st.floats(15.0, 60.0)),
    safety_grace=st.floats(0.0, 5000.0),
    adaptation_policy=st.builds(
        AdaptPolicy,
        miss_window=st.integers(1, 20),
        miss_threshold=st.floats(0.05, 1.0),
        ease_factor=st.floats(0.1, 0.95),
        max_adaptations=st.integers(0, 10),
        stop_after_exhausted=st.booleans(),
    ),
    rotated_flexion_sign=st.sampled_from([-1, 1]),
)


@given(profiles)
def test_round_trip_is_identity(profile):
    assert validate_profile(profile) == []
    loaded = load_profile(save_profile(profile))
    assert loaded == profile
    # serialized form is canonical: a second trip is byte-identical
    assert save_profile(loaded) == save_profile(profile)
