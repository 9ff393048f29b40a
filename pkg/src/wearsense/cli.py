"""Command-line entry point: ``wearsense <command> ...``.

Exit status: 0 success, 1 input or parse error, 2 invalid arguments,
3 scenario classification differs from its expectation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analytics, codec, formats, taxonomy
from .engine import action_record_to_dict
from .scripts import BUILTIN_SCRIPTS, builtin_script
from .sim import SimConfig, SimResult, run
from .tracker import (
    DEFAULT_EPOCH_MICRO,
    DEFAULT_GAP_MICRO,
    PresenceTracker,
    SensorMap,
    TrackerError,
    build_sessions,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2
EXIT_MISMATCH = 3

S = 1_000_000
REPORTS = ("occupancy", "dwell", "flow", "unique", "interest")


class UsageError(Exception):
    pass


def _micro(seconds: float) -> int:
    return round(seconds * S)


def _salt(args) -> bytes | None:
    if not args.hash_ids:
        if args.salt is not None:
            raise UsageError("--salt only applies together with --hash-ids")
        return None
    if args.salt is None:
        raise UsageError("--hash-ids requires --salt")
    try:
        salt = bytes.fromhex(args.salt)
    except ValueError:
        raise UsageError("--salt must be hex") from None
    if not 1 <= len(salt) <= 64:
        raise UsageError("--salt must decode to 1..64 bytes")
    return salt


def _error(exc: Exception) -> str:
    return f"error: {type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------


def cmd_parse(args) -> int:
    salt = _salt(args)
    try:
        sensors = formats.read_sensor_map(args.sensors)
        data = Path(args.input).read_bytes()
    except (OSError, formats.FormatError, ValueError) as exc:
        print(_error(exc), file=sys.stderr)
        return EXIT_INPUT
    tracker = PresenceTracker(sensors, salt=salt)
    try:
        tracker.ingest_pcap(data, args.sensor_id)
    except (codec.CodecError, TrackerError) as exc:
        print(_error(exc), file=sys.stderr)
        return EXIT_INPUT
    formats.write_sightings(Path(args.out), tracker.snapshot())
    st = tracker.stats
    print(f"frames read: {st.frames}")
    print(f"sightings emitted: {st.sightings}")
    print(f"dropped: {st.dropped}")
    return EXIT_OK


def _simulate(args) -> SimResult:
    if args.scenario not in BUILTIN_SCRIPTS:
        raise UsageError(f"unknown scenario {args.scenario!r}; choose from {', '.join(BUILTIN_SCRIPTS)}")
    config = SimConfig(seed=args.seed, drop_rate=args.drop_rate, salt=_salt(args))
    return run(config, builtin_script(args.scenario))


def cmd_simulate(args) -> int:
    result = _simulate(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for sensor, data in sorted(result.captures.items()):
        formats.atomic_write(out / f"capture-{sensor}.pcap", data)
    formats.write_sightings(out / "sightings.jsonl", result.sightings)
    formats.atomic_write(
        out / "sensors.json", formats.dumps_json(formats.sensor_map_to_list(builtin_script(args.scenario).sensors))
    )
    formats.atomic_write(out / "ground_truth.json", formats.dumps_json(result.ground_truth.to_dict()))
    formats.atomic_write(out / "trace.json", formats.dumps_json(formats.trace_to_dict(result.trace)))
    formats.atomic_write(out / "actions.jsonl", formats.dumps_jsonl(action_record_to_dict(a) for a in result.trace.actions))
    summary = {
        "scenario": args.scenario,
        "seed": args.seed,
        "drop_rate": args.drop_rate,
        "label": result.label,
        "expected_label": result.ground_truth.expected_label,
        "probes_emitted": len(result.emissions),
        "sightings": len(result.sightings),
        "sessions": len(result.sessions),
        "actions": len(result.trace.actions),
        "learned_rules": sum(len(r.rules) for r in result.trace.learning),
    }
    formats.atomic_write(out / "summary.json", formats.dumps_json(summary))
    print(result.label)
    return EXIT_OK


def cmd_run_scenario(args) -> int:
    result = _simulate(args)
    expected = args.expect or result.ground_truth.expected_label
    print(f"expected: {expected}")
    print(f"actual:   {result.label}")
    if result.label != expected:
        print("MISMATCH", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def _required(args, *names: str) -> None:
    for name in names:
        if getattr(args, name) is None:
            flag = "--" + name.replace("_", "-").removesuffix("-s")
            raise UsageError(f"--report {args.report} requires {flag}")


def cmd_analyze(args) -> int:
    if args.report in ("occupancy", "dwell"):
        _required(args, "zone")
    if args.report == "unique":
        _required(args, "from_s", "to_s")
        if args.from_s >= args.to_s:
            raise UsageError("--from must be earlier than --to")
    if args.report == "interest":
        _required(args, "booths")
    try:
        sightings = formats.read_sightings(args.input)
        if args.sensors is not None:
            sensors = formats.read_sensor_map(args.sensors)
        else:
            # without a map every sensor is its own zone
            sensors = SensorMap({s.sensor_id: s.sensor_id for s in sightings} or {"-": "-"})
        sessions = build_sessions(sightings, sensors, _micro(args.gap), _micro(args.epoch))
    except (OSError, formats.FormatError, TrackerError, ValueError) as exc:
        print(_error(exc), file=sys.stderr)
        return EXIT_INPUT

    machine = args.format == "machine"
    rows: list[dict] = []
    lines: list[str] = []
    if args.report == "occupancy":
        start = None if args.from_s is None else _micro(args.from_s)
        end = None if args.to_s is None else _micro(args.to_s)
        series = analytics.occupancy(sessions, args.zone, _micro(args.bucket), start, end)
        for bucket_start, count in series.counts:
            rows.append({"report": "occupancy", "zone": args.zone, "bucket_start_micro": bucket_start, "count": count})
            lines.append(f"{bucket_start / S:g}\t{count}")
    elif args.report == "dwell":
        st = analytics.dwell_stats(sessions, args.zone)
        rows.append({"report": "dwell", "zone": args.zone, "count": st.count, "total_micro": st.total,
                     "mean_micro": st.mean, "max_micro": st.max})
        mean = "-" if st.mean is None else f"{st.mean / S:g}"
        mx = "-" if st.max is None else f"{st.max / S:g}"
        lines.append(f"{args.zone}\tcount={st.count}\ttotal_s={st.total / S:g}\tmean_s={mean}\tmax_s={mx}")
    elif args.report == "flow":
        try:
            fm = analytics.flow_matrix(sessions, sensors.zone_ids)
        except analytics.OverlappingSessions as exc:
            print(_error(exc), file=sys.stderr)
            return EXIT_INPUT
        for i, a in enumerate(fm.zones):
            for j, b in enumerate(fm.zones):
                rows.append({"report": "flow", "from": a, "to": b, "count": fm.counts[i][j]})
                lines.append(f"{a}\t{b}\t{fm.counts[i][j]}")
    elif args.report == "unique":
        n = analytics.unique_devices(sightings, _micro(args.from_s), _micro(args.to_s))
        rows.append({"report": "unique", "from_micro": _micro(args.from_s), "to_micro": _micro(args.to_s), "count": n})
        lines.append(str(n))
    else:
        booths = [b for b in args.booths.split(",") if b]
        for device, prof in analytics.interest_profiles(sessions, booths, _micro(args.threshold)).items():
            rows.append({"report": "interest", "device_id": device, "interests": sorted(prof.interests)})
            lines.append(f"{device}\t{','.join(sorted(prof.interests))}")

    if machine:
        sys.stdout.write(formats.dumps_jsonl(rows))
    else:
        sys.stdout.write("".join(line + "\n" for line in lines))
    return EXIT_OK


def cmd_classify(args) -> int:
    try:
        spec = taxonomy.spec_from_dict(formats.read_json(args.spec))
    except (OSError, formats.FormatError, taxonomy.ParseError) as exc:
        print(_error(exc), file=sys.stderr)
        return EXIT_INPUT
    violations = taxonomy.validate(spec)
    if violations:
        for v in violations:
            print(v)
        return EXIT_INPUT
    print(taxonomy.classify(spec).label)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_hashing(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hash-ids", action="store_true", help="replace device identities by salted hash tokens")
    p.add_argument("--salt", help="hex-encoded salt for --hash-ids")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wearsense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="decode a pcap capture into a sightings file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--sensors", required=True, help="sensor map (JSON list of {sensor_id, zone_id})")
    p.add_argument("--sensor-id", required=True)
    p.add_argument("--out", required=True)
    _add_hashing(p)
    p.set_defaults(func=cmd_parse)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "run a built-in scenario and write its artifacts"),
        ("run-scenario", cmd_run_scenario, "run a built-in scenario and check its classification"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", required=True, help=", ".join(BUILTIN_SCRIPTS))
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--drop-rate", type=float, default=0.0)
        _add_hashing(p)
        if name == "simulate":
            p.add_argument("--out", required=True)
        else:
            p.add_argument("--expect", help="override the expected label")
        p.set_defaults(func=func)

    p = sub.add_parser("analyze", help="observation reports over a sightings file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--report", required=True, choices=REPORTS)
    p.add_argument("--sensors", help="sensor map; default treats each sensor as its own zone")
    p.add_argument("--zone")
    p.add_argument("--bucket", type=float, default=60.0, help="occupancy bucket, seconds")
    p.add_argument("--from", dest="from_s", type=float, help="window start, seconds")
    p.add_argument("--to", dest="to_s", type=float, help="window end (exclusive), seconds")
    p.add_argument("--booths", help="comma-separated booth zones for --report interest")
    p.add_argument("--threshold", type=float, default=analytics.DEFAULT_DWELL_THRESHOLD_MICRO / S)
    p.add_argument("--gap", type=float, default=DEFAULT_GAP_MICRO / S)
    p.add_argument("--epoch", type=float, default=DEFAULT_EPOCH_MICRO / S)
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("classify", help="validate and classify a scenario spec file")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
