"""File encodings: JSON documents for configs, JSON Lines for record streams."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

from .engine import (
    ActionRecord,
    AnalyticsRun,
    FeedbackAction,
    LearningRun,
    Rule,
    Trace,
    action_record_to_dict,
    event_from_dict,
    event_to_dict,
    rule_from_dict,
    rule_to_dict,
)
from .taxonomy import FeedbackKind
from .tracker import SensorMap, Sighting, SightingKind


class FormatError(ValueError):
    pass


def sighting_to_dict(s: Sighting) -> dict:
    return {
        "device_id": s.device_id,
        "sensor_id": s.sensor_id,
        "ts_micro": s.ts_micro,
        "rssi_dbm": s.rssi_dbm,
        "kind": s.kind.value,
        "attrs": dict(s.attrs) if s.attrs is not None else None,
    }


def sighting_from_dict(doc: dict) -> Sighting:
    try:
        return Sighting(
            device_id=str(doc["device_id"]),
            sensor_id=str(doc["sensor_id"]),
            ts_micro=int(doc["ts_micro"]),
            rssi_dbm=None if doc.get("rssi_dbm") is None else int(doc["rssi_dbm"]),
            kind=SightingKind(doc["kind"]),
            attrs=doc.get("attrs"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad sighting record {doc!r}: {exc}") from None


def dumps_jsonl(docs: Iterable[dict]) -> str:
    return "".join(json.dumps(d, sort_keys=True, ensure_ascii=False) + "\n" for d in docs)


def loads_jsonl(text: str) -> list[dict]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {n}: {exc}") from None
    return out


def write_sightings(path: Path, sightings: Iterable[Sighting]) -> None:
    atomic_write(path, dumps_jsonl(sighting_to_dict(s) for s in sightings))


def read_sightings(path: Path) -> list[Sighting]:
    return [sighting_from_dict(d) for d in loads_jsonl(Path(path).read_text(encoding="utf-8"))]


def sensor_map_to_list(sensors: SensorMap) -> list[dict]:
    return [{"sensor_id": s, "zone_id": z} for s, z in sorted(sensors.zones.items())]


def sensor_map_from_list(doc) -> SensorMap:
    try:
        return SensorMap.from_pairs((str(d["sensor_id"]), str(d["zone_id"])) for d in doc)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad sensor map: {exc!r}") from None


def read_sensor_map(path: Path) -> SensorMap:
    return sensor_map_from_list(read_json(path))


def read_rules(path: Path) -> list[Rule]:
    try:
        return [rule_from_dict(d) for d in read_json(path)]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad rules file: {exc!r}") from None


def read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def atomic_write(path: Path, content: str | bytes) -> None:
    """Write via a temporary sibling so a failure never leaves partial output."""
    path = Path(path)
    mode = "wb" if isinstance(content, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8"})) as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_to_dict(trace: Trace) -> dict:
    return {
        "events": [event_to_dict(e) for e in trace.events],
        "actions": [action_record_to_dict(a) for a in trace.actions],
        "learning": [
            {
                "ts_micro": run.ts_micro,
                "learner": run.learner,
                "log_size": run.log_size,
                "feedback_kinds": sorted(k.value for k in run.feedback_kinds),
                "rules": [rule_to_dict(r) for r in run.rules],
            }
            for run in trace.learning
        ],
        "analytics": [
            {"ts_micro": a.ts_micro, "report": a.report, "log_size": a.log_size} for a in trace.analytics
        ],
    }


def trace_from_dict(doc: dict) -> Trace:
    return Trace(
        events=[event_from_dict(e) for e in doc.get("events", [])],
        actions=[
            ActionRecord(a["ts"], FeedbackAction(FeedbackKind(a["kind"]), a["target"], a["payload"]), a["rule_id"])
            for a in doc.get("actions", [])
        ],
        learning=[
            LearningRun(
                run["ts_micro"],
                run["learner"],
                run["log_size"],
                frozenset(FeedbackKind(k) for k in run["feedback_kinds"]),
                tuple(rule_from_dict(r) for r in run["rules"]),
            )
            for run in doc.get("learning", [])
        ],
        analytics=[AnalyticsRun(a["ts_micro"], a["report"], a["log_size"]) for a in doc.get("analytics", [])],
    )
