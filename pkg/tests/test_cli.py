import json

import pytest

from wristgames.cli import main
from wristgames.profiles import PatientProfile, save_profile


@pytest.fixture
def workdir(tmp_path):
    profile_path = tmp_path / "p.json"
    profile_path.write_text(save_profile(PatientProfile(patient_id="s2")))
    return tmp_path


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def gen_level(capsys, workdir, name="l.json", game="skiing", **extra):
    args = ["gen-level", "--game", game, "--duration", 8, "--count", 5, "--seed", 42,
            "--min-spacing", 1.0, "--out", workdir / name]
    for key, value in extra.items():
        args += [f"--{key}", value]
    code, out, _ = run_cli(capsys, *args)
    assert code == 0
    return workdir / name


class TestGenLevel:
    def test_deterministic_files(self, capsys, workdir):
        a = gen_level(capsys, workdir, "a.json")
        b = gen_level(capsys, workdir, "b.json")
        assert a.read_text() == b.read_text()

    def test_infeasible_exits_1(self, capsys, workdir):
        code, _, err = run_cli(capsys, "gen-level", "--game", "skiing", "--duration", 5,
                               "--count", 50, "--seed", 1, "--min-spacing", 2.0)
        assert code == 1
        assert "generation failed" in err


class TestValidate:
    def test_valid_pair(self, capsys, workdir):
        level = gen_level(capsys, workdir)
        code, out, _ = run_cli(capsys, "validate", "--profile", workdir / "p.json", "--level", level)
        assert code == 0
        assert json.loads(out.strip().split("\n")[-1])["ok"] is True

    def test_bad_profile_exits_1(self, capsys, workdir, tmp_path):
        bad = tmp_path / "bad.json"
        obj = json.loads((workdir / "p.json").read_text())
        obj["rom_extension_max"] = 0
        bad.write_text(json.dumps(obj))
        code, out, _ = run_cli(capsys, "validate", "--profile", bad)
        assert code == 1
        payload = json.loads(out.strip().split("\n")[-1])
        assert payload["ok"] is False
        assert any("rom_extension_max" in v for v in payload["profile"])


class TestPlayReplayStats:
    def test_full_workflow(self, capsys, workdir):
        level = gen_level(capsys, workdir, game="flappy")
        session = workdir / "s.wrsession"
        code, out, err = run_cli(
            capsys, "play", "--game", "flappy", "--mode", "continuous",
            "--profile", workdir / "p.json", "--level", level,
            "--source", "sine:25,0.5", "--out", session,
        )
        assert code == 0
        summary = json.loads(out.strip().split("\n")[-1])
        assert summary["status"] in ("Finished", "Stopped")
        assert session.exists()

        code, out, _ = run_cli(capsys, "replay", "--session", session, "--verify")
        assert code == 0
        assert json.loads(out.strip().split("\n")[-1])["verified"] is True

        code, out, _ = run_cli(capsys, "stats", "--session", session)
        assert code == 0
        stats = json.loads(out.strip().split("\n")[-1])
        assert stats["hits"] + stats["misses"] == 5

        code, out, _ = run_cli(capsys, "stats", "--session", session, "--csv", "flexion_extension_right")
        assert code == 0
        assert out.startswith("timestamp_ms,angle_deg")

    def test_play_deterministic_bodies(self, capsys, workdir):
        level = gen_level(capsys, workdir, game="skiing")
        bodies = []
        footers = []
        for name in ("s1.wrsession", "s2.wrsession"):
            path = workdir / name
            code, _, _ = run_cli(
                capsys, "play", "--game", "skiing", "--mode", "deviation",
                "--profile", workdir / "p.json", "--level", level,
                "--source", "sine:20,0.5,deviation", "--seed", 9, "--noise", 1.0,
                "--out", path,
            )
            assert code == 0
            lines = path.read_text().rstrip("\n").split("\n")
            bodies.append("\n".join(lines[1:-1]))   # header and footer carry wall clock
            footer = json.loads(lines[-1].partition(" ")[2])
            footer.pop("digest")                    # digest covers the header line
            footers.append(footer)
        assert bodies[0] == bodies[1]
        assert footers[0] == footers[1]

    def test_missing_level_exits_2(self, capsys, workdir):
        code, _, err = run_cli(
            capsys, "play", "--game", "skiing", "--mode", "deviation",
            "--profile", workdir / "p.json", "--level", workdir / "nope.json",
            "--source", "sine:20,1", "--out", workdir / "x.wrsession",
        )
        assert code == 2
        assert "nope.json" in err

    def test_corrupt_session_exits_1(self, capsys, workdir):
        level = gen_level(capsys, workdir, game="skiing")
        session = workdir / "c.wrsession"
        run_cli(capsys, "play", "--game", "skiing", "--mode", "deviation",
                "--profile", workdir / "p.json", "--level", level,
                "--source", "sine:20,0.5,deviation", "--out", session)
        data = bytearray(session.read_bytes())
        data[len(data) // 2] ^= 0x01
        session.write_bytes(bytes(data))
        code, _, err = run_cli(capsys, "replay", "--session", session, "--verify")
        assert code == 1


class TestNewProfile:
    def test_writes_valid_profile(self, capsys, tmp_path):
        out = tmp_path / "n.json"
        code, _, _ = run_cli(capsys, "new-profile", "--patient-id", "s9", "--out", out)
        assert code == 0
        code, _, _ = run_cli(capsys, "validate", "--profile", out)
        assert code == 0
