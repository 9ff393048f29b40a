"""Deterministic agent simulator.

Agents carry wearables that emit wildcard probe requests at a fixed per-agent
interval from t=0. Sensors capture probes with a simple two-level RSSI model,
and the captured bytes run through the full codec -> tracker -> engine pipeline.
"""

from __future__ import annotations

import bisect
import heapq
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import analytics, codec
from .codec import LinkType, MacAddress, ProbeRequestFrame
from .engine import (
    Engine,
    Event,
    InterestLearner,
    Rule,
    Trace,
    TriggerLearner,
    classify_trace,
    events_from_sessions,
)
from .taxonomy import ScenarioClassification
from .tracker import (
    DEFAULT_EPOCH_MICRO,
    DEFAULT_GAP_MICRO,
    PresenceSession,
    PresenceTracker,
    SensorMap,
    Sighting,
    SightingKind,
    hash_identity,
)

SECOND = 1_000_000
MIN_PROBE_INTERVAL_S = 15.0
MAX_PROBE_INTERVAL_S = 60.0
DEFAULT_RATES = b"\x02\x04\x0b\x16"


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class Agent:
    """A person with a wearable. A ``None`` zone in the itinerary means out of range."""

    agent_id: str
    mac: MacAddress
    itinerary: tuple[tuple[int, str | None], ...]
    probe_interval_s: float | None = None
    active_announcements: tuple[tuple[int, Mapping[str, str]], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "itinerary", tuple(self.itinerary))
        object.__setattr__(self, "active_announcements", tuple(self.active_announcements))

    def zone_at(self, ts_micro: int) -> str | None:
        starts = [t for t, _ in self.itinerary]
        i = bisect.bisect_right(starts, ts_micro) - 1
        return self.itinerary[i][1] if i >= 0 else None


@dataclass(frozen=True)
class ScriptedActuation:
    """Someone flips an actuator by hand, unless it already sits in that state."""

    ts_micro: int
    actuator_id: str
    state: str
    skip_if_already: bool = True


@dataclass(frozen=True)
class LearningSchedule:
    name: str
    learner: TriggerLearner | InterestLearner
    every_micro: int


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    sensors: SensorMap
    agents: tuple[Agent, ...]
    expected_label: str
    duration_micro: int
    rules: tuple[Rule, ...] = ()
    actuations: tuple[ScriptedActuation, ...] = ()
    learning: tuple[LearningSchedule, ...] = ()
    analytics_reports: tuple[str, ...] = ()
    description: str = ""


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    drop_rate: float = 0.0
    duration_micro: int | None = None  # defaults to the script's duration
    sensors: SensorMap | None = None  # defaults to the script's sensor map
    gap_micro: int = DEFAULT_GAP_MICRO
    epoch_micro: int = DEFAULT_EPOCH_MICRO
    salt: bytes | None = None
    near_dbm: int = -50
    far_dbm: int = -85
    jitter_db: int = 5
    capture_floor_dbm: int = -80


@dataclass(frozen=True)
class ProbeEmission:
    agent_id: str
    ts_micro: int
    zone_id: str | None
    captured_by: tuple[str, ...]


@dataclass
class GroundTruth:
    intervals: dict[str, list[tuple[str, int, int]]]
    mac_to_agent: dict[str, str]
    device_to_agent: dict[str, str]
    probe_interval_micro: dict[str, int]
    expected_label: str

    def occupancy(self, zone: str, bucket_micro: int, start: int, end: int) -> list[tuple[int, int]]:
        """True distinct-agent count per bucket, same overlap rule as the tracker analytics."""
        sessions = [
            PresenceSession(agent, z, s, max(s, e - 1), 1)
            for agent, spans in self.intervals.items()
            for z, s, e in spans
            if z == zone and e > s
        ]
        return list(analytics.occupancy(sessions, zone, bucket_micro, start, end).counts)

    def to_dict(self) -> dict:
        return {
            "intervals": {a: [list(span) for span in spans] for a, spans in self.intervals.items()},
            "mac_to_agent": self.mac_to_agent,
            "device_to_agent": self.device_to_agent,
            "probe_interval_micro": self.probe_interval_micro,
            "expected_label": self.expected_label,
        }


@dataclass
class SimResult:
    captures: dict[str, bytes]
    sightings: list[Sighting]
    sessions: list[PresenceSession]
    ground_truth: GroundTruth
    trace: Trace
    classification: ScenarioClassification
    emissions: list[ProbeEmission]
    reports: dict[str, object] = field(default_factory=dict)
    skipped_actuations: list[ScriptedActuation] = field(default_factory=list)
    dropped_frames: int = 0

    @property
    def label(self) -> str:
        return self.classification.label


def _validate(config: SimConfig, script: ScenarioScript, sensors: SensorMap, duration: int) -> None:
    if not 0.0 <= config.drop_rate < 1.0:
        raise InvalidConfig(f"drop_rate must lie in [0, 1), got {config.drop_rate}")
    if duration <= 0:
        raise InvalidConfig("duration must be positive")
    if not 0 <= config.seed < 2**64:
        raise InvalidConfig("seed is a 64-bit unsigned integer")
    if config.gap_micro <= 0 or config.epoch_micro <= 0:
        raise InvalidConfig("gap and epoch must be positive")
    zones = set(sensors.zones.values())
    seen_ids = set()
    for agent in script.agents:
        if agent.agent_id in seen_ids:
            raise InvalidConfig(f"duplicate agent {agent.agent_id!r}")
        seen_ids.add(agent.agent_id)
        iv = agent.probe_interval_s
        if iv is not None and not MIN_PROBE_INTERVAL_S <= iv <= MAX_PROBE_INTERVAL_S:
            raise InvalidConfig(f"{agent.agent_id}: probe interval {iv} s outside [15, 60]")
        times = [t for t, _ in agent.itinerary]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidConfig(f"{agent.agent_id}: itinerary times must strictly increase")
        for _, zone in agent.itinerary:
            if zone is not None and zone not in zones:
                raise InvalidConfig(f"{agent.agent_id}: zone {zone!r} has no sensor")


def _truth_intervals(agent: Agent, duration: int) -> list[tuple[str, int, int]]:
    spans = []
    for i, (start, zone) in enumerate(agent.itinerary):
        if zone is None or start >= duration:
            continue
        end = agent.itinerary[i + 1][0] if i + 1 < len(agent.itinerary) else duration
        spans.append((zone, start, min(end, duration)))
    return spans


def _record_stream(pcap: bytes, sensor: str):
    for i, rec in enumerate(codec.parse_pcap(pcap)):
        yield rec.ts_micro, 0, sensor, i, rec


def run(config: SimConfig, script: ScenarioScript, seed: int | None = None) -> SimResult:
    """Simulate ``script`` and run the capture through the full pipeline."""
    sensors = config.sensors or script.sensors
    duration = config.duration_micro or script.duration_micro
    _validate(config, script, sensors, duration)
    rng = random.Random(config.seed if seed is None else seed)
    sensor_ids = sorted(sensors.zones)

    intervals: dict[str, int] = {}
    for agent in script.agents:
        iv = agent.probe_interval_s
        if iv is None:
            iv = rng.uniform(MIN_PROBE_INTERVAL_S, MAX_PROBE_INTERVAL_S)
        intervals[agent.agent_id] = round(iv * SECOND)

    # emission and capture
    frames: dict[str, list[tuple[int, bytes]]] = {s: [] for s in sensor_ids}
    emissions: list[ProbeEmission] = []
    for agent in script.agents:
        step = intervals[agent.agent_id]
        for n, ts in enumerate(range(0, duration, step)):
            zone = agent.zone_at(ts)
            dropped = rng.random() < config.drop_rate
            captured = []
            if zone is not None and not dropped:
                frame = codec.serialize_probe_request(
                    ProbeRequestFrame(sa=agent.mac, seq=n % 4096, supported_rates=DEFAULT_RATES)
                )
                for sensor in sensor_ids:
                    near = sensors.zones[sensor] == zone
                    base = config.near_dbm if near else config.far_dbm
                    rssi = base + rng.randint(-config.jitter_db, config.jitter_db)
                    if near or rssi >= config.capture_floor_dbm:
                        frames[sensor].append((ts, codec.build_radiotap(rssi) + frame))
                        captured.append(sensor)
            emissions.append(ProbeEmission(agent.agent_id, ts, zone, tuple(captured)))

    captures = {}
    for sensor in sensor_ids:
        frames[sensor].sort(key=lambda item: item[0])
        captures[sensor] = codec.write_pcap(frames[sensor], LinkType.IEEE80211_RADIOTAP)

    def device_of(agent: Agent) -> str:
        ident = str(agent.mac)
        return hash_identity(ident, config.salt) if config.salt is not None else ident

    # ingestion: every sensor stream merged in time order, announcements interleaved
    tracker = PresenceTracker(sensors, salt=config.salt, epoch_micro=config.epoch_micro)
    streams = [_record_stream(captures[sensor], sensor) for sensor in sensor_ids]
    announcements = []
    for agent in script.agents:
        for ts, attrs in agent.active_announcements:
            zone = agent.zone_at(ts)
            if zone is None or ts >= duration:
                continue
            sensor = sensors.sensors_in(zone)[0]
            announcements.append(
                (ts, 1, sensor, agent.agent_id,
                 Sighting(device_of(agent), sensor, ts, None, SightingKind.ACTIVE_ANNOUNCE, dict(attrs)))
            )
    announcements.sort(key=lambda item: item[:4])
    for ts, _, sensor, _, item in heapq.merge(*streams, announcements, key=lambda x: x[:4]):
        if isinstance(item, Sighting):
            tracker.add(item)
        else:
            tracker.ingest(item, sensor)

    sightings = list(tracker.snapshot())
    sessions = tracker.sessions(config.gap_micro)

    # engine
    info_events = [
        Event.active_info(s.ts_micro, s.device_id, s.attrs)
        for s in sightings
        if s.kind is SightingKind.ACTIVE_ANNOUNCE
    ]
    timeline: list[tuple[int, int, int, object]] = []
    for i, ev in enumerate(events_from_sessions(sessions, info_events)):
        timeline.append((ev.ts_micro, 0, i, ev))
    for i, act in enumerate(sorted(script.actuations, key=lambda a: a.ts_micro)):
        if act.ts_micro < duration:
            timeline.append((act.ts_micro, 1, i, act))
    for j, sched in enumerate(script.learning):
        for tick in range(sched.every_micro, duration + 1, sched.every_micro):
            timeline.append((tick, 2, j, sched))
    timeline.sort(key=lambda item: item[:3])

    engine = Engine(script.rules)
    skipped = []
    for ts, _, _, item in timeline:
        if isinstance(item, Event):
            engine.process(item)
        elif isinstance(item, ScriptedActuation):
            if item.skip_if_already and engine.state.actuators.get(item.actuator_id) == item.state:
                skipped.append(item)
            else:
                engine.process(Event.manual_actuation(ts, item.actuator_id, item.state))
        else:
            engine.learn(ts, item.name, item.learner)

    reports = {}
    for name in script.analytics_reports:
        reports[name] = _report(name, sessions, sightings, sensors, duration)
        engine.record_analytics(duration, name)

    truth = GroundTruth(
        intervals={a.agent_id: _truth_intervals(a, duration) for a in script.agents},
        mac_to_agent={str(a.mac): a.agent_id for a in script.agents},
        device_to_agent={device_of(a): a.agent_id for a in script.agents},
        probe_interval_micro=intervals,
        expected_label=script.expected_label,
    )
    return SimResult(
        captures=captures,
        sightings=sightings,
        sessions=sessions,
        ground_truth=truth,
        trace=engine.trace,
        classification=classify_trace(engine.trace),
        emissions=emissions,
        reports=reports,
        skipped_actuations=skipped,
        dropped_frames=tracker.stats.dropped,
    )


def _report(name: str, sessions, sightings, sensors: SensorMap, duration: int):
    zones = sensors.zone_ids
    if name == "occupancy":
        return {z: analytics.occupancy(sessions, z, 60 * SECOND, 0, duration) for z in zones}
    if name == "dwell":
        return {z: analytics.dwell_stats(sessions, z) for z in zones}
    if name == "flow":
        return analytics.flow_matrix(sessions, zones)
    if name == "unique":
        return analytics.unique_devices(sightings, 0, duration)
    raise InvalidConfig(f"unknown analytics report {name!r}")


def session_zone_sequences(sessions: Sequence[PresenceSession]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for s in sorted(sessions, key=lambda s: (s.device_id, s.start_micro)):
        out.setdefault(s.device_id, []).append(s.zone_id)
    return out
