"""Headless command-line driver for every workflow.

Machine-readable output (JSON or CSV) goes to stdout; human summaries go to
stderr. Exit codes: 0 success, 1 validation/verification failure, 2 I/O or
protocol error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .engine import MODES
from .jsonio import SchemaError, canonical_dumps
from .kinematics import NeutralPose
from .levels import (
    GAME_KINDS,
    GenConstraints,
    InfeasibleConstraints,
    generate_level,
    load_level,
    save_level,
    validate_level,
)
from .profiles import PatientProfile, load_profile, save_profile, validate_profile
from .runner import make_header, run_session, verify_replay
from .session import (
    DigestMismatch,
    Recorder,
    ReplayDivergence,
    export_timeseries,
    load_record,
    statistics,
)
from .sources import BridgeSource, SyntheticSource, SyntheticSpec, TraceSource, Waveform

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class CliError(Exception):
    def __init__(self, message: str, code: int):
        self.code = code
        super().__init__(message)


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(obj) -> None:
    print(canonical_dumps(obj))


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO)


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _load_profile(path: str) -> PatientProfile:
    try:
        profile = load_profile(_read_text(path))
    except SchemaError as exc:
        raise CliError(f"profile {path}: {exc}", EXIT_VALIDATION)
    violations = validate_profile(profile)
    if violations:
        raise CliError(f"profile {path} invalid: " + "; ".join(map(str, violations)), EXIT_VALIDATION)
    return profile


def _load_level(path: str):
    try:
        return load_level(_read_text(path))
    except SchemaError as exc:
        raise CliError(f"level {path}: {exc}", EXIT_VALIDATION)


GAME_ALIASES = {k.lower(): k for k in GAME_KINDS}
MODE_ALIASES = {m.lower(): m for modes in MODES.values() for m in modes}
MODE_ALIASES["rotated-flexion"] = "RotatedFlexion"
MODE_ALIASES["one-hand"] = "OneHand"
MODE_ALIASES["two-hands"] = "TwoHands"


def _game_kind(name: str) -> str:
    kind = GAME_ALIASES.get(name.lower())
    if kind is None:
        raise CliError(f"unknown game {name!r}; expected one of {sorted(GAME_ALIASES)}", EXIT_VALIDATION)
    return kind


def _mode(kind: str, name: str | None) -> str:
    if name is None:
        return MODES[kind][0]
    mode = MODE_ALIASES.get(name.lower())
    if mode is None or mode not in MODES[kind]:
        raise CliError(f"mode {name!r} is not legal for {kind}; expected one of {MODES[kind]}", EXIT_VALIDATION)
    return mode


def parse_source(spec_text: str, args, level_duration: float):
    """Build a frame source from a --source string.

    Forms: sine:AMP,FREQ[,CHANNEL] | constant[:VALUE[,CHANNEL]] |
    sweep:FROM,TO,DURATION[,CHANNEL] | spec:FILE.json | trace:FILE |
    bridge:HOST:PORT. CHANNEL is flexion_extension (default) or deviation.
    """
    head, _, rest = spec_text.partition(":")
    duration = args.duration if args.duration is not None else level_duration + 2.0
    hands = tuple(args.hands.split(",")) if args.hands else ("right",)

    def synth(spec: SyntheticSpec):
        return SyntheticSource(spec, rate_hz=args.rate, duration_s=duration, seed=args.seed), spec.to_dict()

    try:
        if head == "sine":
            parts = rest.split(",")
            amp, freq = float(parts[0]), float(parts[1])
            channel = parts[2] if len(parts) > 2 else "flexion_extension"
            wave = Waveform(kind="sine", amplitude=amp, frequency=freq)
            return synth(_spec_for(channel, wave, args, hands))
        if head == "constant":
            parts = rest.split(",") if rest else ["0"]
            value = float(parts[0]) if parts[0] else 0.0
            channel = parts[1] if len(parts) > 1 else "flexion_extension"
            wave = Waveform(kind="constant", value=value)
            return synth(_spec_for(channel, wave, args, hands))
        if head == "sweep":
            parts = rest.split(",")
            start, end, dur = float(parts[0]), float(parts[1]), float(parts[2])
            channel = parts[3] if len(parts) > 3 else "flexion_extension"
            wave = Waveform(kind="sweep", start=start, end=end, duration=dur)
            return synth(_spec_for(channel, wave, args, hands))
        if head == "spec":
            obj = json.loads(_read_text(rest))
            return synth(SyntheticSpec.from_dict(obj))
        if head == "trace":
            return TraceSource(rest), {"trace": rest}
        if head == "bridge":
            return BridgeSource(rest), {"bridge": rest}
    except (ValueError, IndexError) as exc:
        if isinstance(exc, CliError):
            raise
        raise CliError(f"bad --source {spec_text!r}: {exc}", EXIT_VALIDATION)
    raise CliError(f"unknown source kind {head!r}", EXIT_VALIDATION)


def _spec_for(channel: str, wave: Waveform, args, hands) -> SyntheticSpec:
    if channel not in ("flexion_extension", "deviation"):
        raise CliError(f"unknown source channel {channel!r}", EXIT_VALIDATION)
    return SyntheticSpec(
        flexion_extension=wave if channel == "flexion_extension" else Waveform(),
        deviation=wave if channel == "deviation" else Waveform(),
        noise_amplitude=args.noise,
        hands=hands,
    )


# --- subcommands -------------------------------------------------------------

def cmd_play(args) -> int:
    kind = _game_kind(args.game)
    mode = _mode(kind, args.mode)
    profile = _load_profile(args.profile)
    level = _load_level(args.level)
    violations = validate_level(level, profile)
    if violations:
        raise CliError("level invalid: " + "; ".join(map(str, violations)), EXIT_VALIDATION)
    source, source_desc = parse_source(args.source, args, level.duration)
    header = make_header(kind, mode, level, profile, NeutralPose(), source=source_desc)
    recorder = Recorder(header, path=args.out)
    record, state = run_session(kind, mode, level, profile, source, recorder=recorder)
    counts: dict[str, int] = {}
    for event in record.events():
        counts[event.kind] = counts.get(event.kind, 0) + 1
    _say(f"session finished: score {state.score}, status {record.footer.status}"
         + (f" ({record.footer.status_reason})" if record.footer.status_reason else ""))
    _emit({
        "session_file": args.out,
        "final_score": record.footer.final_score,
        "status": record.footer.status,
        "status_reason": record.footer.status_reason,
        "events": dict(sorted(counts.items())),
        "entries": record.footer.entry_count,
    })
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        record = load_record(args.session)
    except OSError as exc:
        raise CliError(f"cannot read {args.session}: {exc}", EXIT_IO)
    except (SchemaError, DigestMismatch, ValueError) as exc:
        raise CliError(f"session {args.session}: {exc}", EXIT_VALIDATION)
    if args.verify:
        try:
            report = verify_replay(record)
        except ReplayDivergence as exc:
            _emit({"verified": False, "error": str(exc), "tick": exc.tick, "entry_index": exc.entry_index})
            raise CliError(f"replay divergence: {exc}", EXIT_VALIDATION)
        _say(f"replay verified: {report.ticks} ticks, {report.events} events, {report.tick_digests} digests")
        _emit({"verified": True, **report.to_dict()})
    else:
        events = [e.to_dict() for e in record.events()]
        _say(f"{len(events)} events, final score {record.footer.final_score}")
        _emit({"header": record.header.to_dict(), "events": events, "footer": record.footer.to_dict()})
    return EXIT_OK


def cmd_stats(args) -> int:
    try:
        record = load_record(args.session)
    except OSError as exc:
        raise CliError(f"cannot read {args.session}: {exc}", EXIT_IO)
    except (SchemaError, DigestMismatch, ValueError) as exc:
        raise CliError(f"session {args.session}: {exc}", EXIT_VALIDATION)
    if args.csv:
        try:
            sys.stdout.write(export_timeseries(record, args.csv))
        except ValueError as exc:
            raise CliError(str(exc), EXIT_VALIDATION)
    else:
        _emit(statistics(record).to_dict())
    return EXIT_OK


def cmd_gen_level(args) -> int:
    kind = _game_kind(args.game)
    profile = _load_profile(args.profile) if args.profile else PatientProfile()
    extras = {}
    if args.lanes:
        extras["lanes"] = tuple(args.lanes.split(","))
    if args.gap_height is not None:
        extras["gap_height"] = args.gap_height
    if args.gate_width is not None:
        extras["gate_width"] = args.gate_width
    if args.ring_radius is not None:
        extras["ring_radius"] = args.ring_radius
    constraints = GenConstraints(
        duration=args.duration,
        element_count=args.count,
        rom_fraction=args.rom_fraction,
        min_spacing=args.min_spacing,
        **extras,
    )
    try:
        level = generate_level(kind, constraints, profile, seed=args.seed)
    except (InfeasibleConstraints, ValueError) as exc:
        raise CliError(f"generation failed: {exc}", EXIT_VALIDATION)
    text = save_level(level)
    if args.out:
        _write_text(args.out, text + "\n")
        _say(f"wrote {args.out}: {len(level.elements)} elements over {level.duration} s")
        _emit({"level_file": args.out, "elements": len(level.elements), "gen_seed": level.gen_seed})
    else:
        print(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.profile and not args.level:
        raise CliError("nothing to validate: pass --profile and/or --level", EXIT_VALIDATION)
    result = {}
    ok = True
    profile = PatientProfile()
    if args.profile:
        try:
            profile = load_profile(_read_text(args.profile))
        except SchemaError as exc:
            _emit({"ok": False, "error": str(exc)})
            raise CliError(f"profile {args.profile}: {exc}", EXIT_VALIDATION)
        violations = validate_profile(profile)
        result["profile"] = [str(v) for v in violations]
        ok = ok and not violations
    if args.level:
        level = _load_level(args.level)
        violations = validate_level(level, profile)
        result["level"] = [str(v) for v in violations]
        ok = ok and not violations
    _emit({"ok": ok, **result})
    if not ok:
        raise CliError("validation failed", EXIT_VALIDATION)
    _say("valid")
    return EXIT_OK


def cmd_new_profile(args) -> int:
    profile = PatientProfile(patient_id=args.patient_id)
    text = save_profile(profile)
    if args.out:
        _write_text(args.out, text + "\n")
        _say(f"wrote {args.out}")
        _emit({"profile_file": args.out, "patient_id": args.patient_id})
    else:
        print(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.bind.rpartition(":")
    app = create_app(storage_root=args.storage_root, tick_ms=args.tick_ms, snapshot_every=args.snapshot_every)
    _say(f"serving on {host}:{port}, storage at {args.storage_root}")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wristgames", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("play", help="run a full headless session from a frame source")
    p.add_argument("--game", required=True)
    p.add_argument("--mode", default=None)
    p.add_argument("--profile", required=True)
    p.add_argument("--level", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--hands", default=None, help="comma-separated, e.g. left,right")
    p.add_argument("--duration", type=float, default=None, help="source duration s (default: level + 2)")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("replay", help="re-execute a recorded session")
    p.add_argument("--session", required=True)
    p.add_argument("--verify", action="store_true", help="recompute all tick digests; nonzero exit on divergence")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("stats", help="session statistics or CSV time series")
    p.add_argument("--session", required=True)
    p.add_argument("--csv", default=None, metavar="CHANNEL")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-level", help="seeded random level within constraints")
    p.add_argument("--game", required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--min-spacing", dest="min_spacing", type=float, default=1.0)
    p.add_argument("--rom-fraction", dest="rom_fraction", type=float, default=0.8)
    p.add_argument("--lanes", default=None)
    p.add_argument("--gap-height", dest="gap_height", type=float, default=None)
    p.add_argument("--gate-width", dest="gate_width", type=float, default=None)
    p.add_argument("--ring-radius", dest="ring_radius", type=float, default=None)
    p.add_argument("--profile", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_level)

    p = sub.add_parser("validate", help="validate a profile and/or level file")
    p.add_argument("--profile", default=None)
    p.add_argument("--level", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("new-profile", help="write a default profile for a patient")
    p.add_argument("--patient-id", dest="patient_id", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_new_profile)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--bind", default="127.0.0.1:8472")
    p.add_argument("--storage-root", dest="storage_root", default=None)
    p.add_argument("--tick-ms", dest="tick_ms", type=float, default=10.0)
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int, default=1)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _say(f"error: {exc}")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
