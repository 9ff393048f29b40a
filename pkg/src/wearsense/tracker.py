"""Presence tracking: emissions to sightings, zones, sessions and device histories."""

from __future__ import annotations

import hashlib
import threading
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

from . import codec
from .codec import CaptureRecord, CodecError, LinkType

DEFAULT_GAP_MICRO = 300_000_000
DEFAULT_EPOCH_MICRO = 10_000_000


class TrackerError(ValueError):
    pass


class UnknownSensor(TrackerError):
    pass


class UnsortedInput(TrackerError):
    pass


class UnknownDevice(TrackerError):
    pass


class SightingKind(Enum):
    WIFI_PROBE = "wifi_probe"
    BLE_ADV = "ble_adv"
    ACTIVE_ANNOUNCE = "active_announce"


@dataclass(frozen=True)
class SensorMap:
    zones: Mapping[str, str]

    def __post_init__(self) -> None:
        if not self.zones:
            raise ValueError("a sensor map needs at least one sensor")
        object.__setattr__(self, "zones", dict(self.zones))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> SensorMap:
        zones: dict[str, str] = {}
        for sensor_id, zone_id in pairs:
            if sensor_id in zones and zones[sensor_id] != zone_id:
                raise ValueError(f"sensor {sensor_id!r} mapped to two zones")
            zones[sensor_id] = zone_id
        return cls(zones)

    def zone_of(self, sensor_id: str) -> str:
        try:
            return self.zones[sensor_id]
        except KeyError:
            raise UnknownSensor(f"sensor {sensor_id!r} is not in the sensor map") from None

    def __contains__(self, sensor_id: object) -> bool:
        return sensor_id in self.zones

    @property
    def zone_ids(self) -> list[str]:
        return sorted(set(self.zones.values()))

    def sensors_in(self, zone_id: str) -> list[str]:
        return sorted(s for s, z in self.zones.items() if z == zone_id)


@dataclass(frozen=True, slots=True)
class Sighting:
    device_id: str
    sensor_id: str
    ts_micro: int
    rssi_dbm: int | None = None
    kind: SightingKind = SightingKind.WIFI_PROBE
    attrs: Mapping[str, str] | None = None
    zone_id: str | None = None

    def __post_init__(self) -> None:
        if (self.kind is SightingKind.ACTIVE_ANNOUNCE) != (self.attrs is not None):
            raise ValueError("attrs are carried by ActiveAnnounce sightings and only by them")


@dataclass(frozen=True, slots=True)
class PresenceSession:
    device_id: str
    zone_id: str
    start_micro: int
    end_micro: int
    sighting_count: int

    @property
    def duration_micro(self) -> int:
        return self.end_micro - self.start_micro


@dataclass(frozen=True)
class DeviceRecord:
    device_id: str
    first_seen: int
    last_seen: int
    visit_count: int
    zones_visited: frozenset[str]


def hash_identity(identity: str, salt: bytes) -> str:
    """Salted 128-bit token for a device identity, as 32 lowercase hex chars."""
    return hashlib.blake2b(identity.encode(), digest_size=16, key=salt).hexdigest()


@dataclass
class IngestStats:
    frames: int = 0
    sightings: int = 0
    dropped: int = 0


def ingest(
    record: CaptureRecord,
    sensors: SensorMap,
    sensor_id: str,
    *,
    salt: bytes | None = None,
    stats: IngestStats | None = None,
) -> Sighting | None:
    """Turn one capture record into a sighting, or ``None`` when it carries no identity."""
    if sensor_id not in sensors.zones:
        raise UnknownSensor(f"sensor {sensor_id!r} is not in the sensor map")
    if stats is None:
        stats = IngestStats()
    stats.frames += 1
    rssi = None
    try:
        if record.link_type is LinkType.BLE_ADV:
            _, pdu = codec.parse_ble_ll_packet(record.payload)
            identity = codec.parse_ble_advertisement(pdu).identity
            kind = SightingKind.BLE_ADV
        else:
            body = record.payload
            if record.link_type is LinkType.IEEE80211_RADIOTAP:
                rssi, offset = codec.parse_radiotap(body)
                body = body[offset:]
            identity = str(codec.parse_probe_request(body).sa)
            kind = SightingKind.WIFI_PROBE
    except CodecError:
        stats.dropped += 1
        return None
    if salt is not None:
        identity = hash_identity(identity, salt)
    stats.sightings += 1
    return Sighting(identity, sensor_id, record.ts_micro, rssi, kind)


class PresenceTracker:
    """Single-writer accumulator of sightings with consistent snapshot reads."""

    def __init__(
        self,
        sensors: SensorMap,
        *,
        salt: bytes | None = None,
        epoch_micro: int = DEFAULT_EPOCH_MICRO,
    ):
        self.sensors = sensors
        self.salt = salt
        self.epoch_micro = epoch_micro
        self.stats = IngestStats()
        self._sightings: list[Sighting] = []
        self._epoch_by_sensor: dict[str, int] = {}
        self._lock = threading.Lock()

    def _append(self, sighting: Sighting) -> None:
        # reordering inside an epoch is fine; a step back across epochs is not
        epoch = sighting.ts_micro // self.epoch_micro
        latest = self._epoch_by_sensor.get(sighting.sensor_id, epoch)
        if epoch < latest:
            raise UnsortedInput(
                f"sighting at {sighting.ts_micro} from {sighting.sensor_id!r} predates epoch {latest}"
            )
        with self._lock:
            self._sightings.append(sighting)
            self._epoch_by_sensor[sighting.sensor_id] = max(epoch, latest)

    def ingest(self, record: CaptureRecord, sensor_id: str) -> Sighting | None:
        sighting = ingest(record, self.sensors, sensor_id, salt=self.salt, stats=self.stats)
        if sighting is not None:
            self._append(sighting)
        return sighting

    def ingest_pcap(self, data: bytes, sensor_id: str) -> int:
        emitted = 0
        for record in codec.parse_pcap(data):
            if self.ingest(record, sensor_id) is not None:
                emitted += 1
        return emitted

    def add(self, sighting: Sighting) -> None:
        if sighting.sensor_id not in self.sensors.zones:
            raise UnknownSensor(f"sensor {sighting.sensor_id!r} is not in the sensor map")
        self._append(sighting)

    def snapshot(self) -> tuple[Sighting, ...]:
        with self._lock:
            return tuple(self._sightings)

    def sessions(self, gap_micro: int = DEFAULT_GAP_MICRO) -> list[PresenceSession]:
        return build_sessions(self.snapshot(), self.sensors, gap_micro, self.epoch_micro)


def _signal_key(s: Sighting):
    # sightings with rssi beat those without; then strongest; then smallest sensor id
    return (s.rssi_dbm is None, -(s.rssi_dbm or 0), s.sensor_id)


def _order_key(s: Sighting):
    return (s.ts_micro, s.device_id, s.sensor_id, s.rssi_dbm is None, s.rssi_dbm or 0, s.kind.value)


def assign_zones(
    sightings: Iterable[Sighting], sensors: SensorMap, epoch_micro: int = DEFAULT_EPOCH_MICRO
) -> list[Sighting]:
    """Resolve each device's zone per epoch bucket from its strongest sensor.

    Returns the winning sensor's sightings with ``zone_id`` filled in, ordered by
    ``(ts_micro, device_id, sensor_id)``.
    """
    if epoch_micro <= 0:
        raise ValueError("epoch_micro must be positive")
    buckets: dict[tuple[str, int], list[Sighting]] = defaultdict(list)
    for s in sightings:
        buckets[(s.device_id, s.ts_micro // epoch_micro)].append(s)
    out = []
    for group in buckets.values():
        winner = min(group, key=_signal_key).sensor_id
        zone = sensors.zone_of(winner)
        out.extend(replace(s, zone_id=zone) for s in group if s.sensor_id == winner)
    out.sort(key=_order_key)
    return out


def sessionize(sightings: Sequence[Sighting], gap_micro: int = DEFAULT_GAP_MICRO) -> list[PresenceSession]:
    """Split one device+zone's time-sorted sightings wherever a gap exceeds ``gap_micro``."""
    if gap_micro <= 0:
        raise ValueError("gap_micro must be positive")
    if not sightings:
        return []
    first = sightings[0]
    device, zone = first.device_id, first.zone_id
    sessions = []
    start = prev = first.ts_micro
    count = 1
    for s in sightings[1:]:
        if s.ts_micro < prev:
            raise UnsortedInput(f"sighting at {s.ts_micro} follows {prev}")
        if s.ts_micro - prev > gap_micro:
            sessions.append(PresenceSession(device, zone, start, prev, count))
            start, count = s.ts_micro, 0
        prev = s.ts_micro
        count += 1
    sessions.append(PresenceSession(device, zone, start, prev, count))
    return sessions


def build_sessions(
    sightings: Iterable[Sighting],
    sensors: SensorMap,
    gap_micro: int = DEFAULT_GAP_MICRO,
    epoch_micro: int = DEFAULT_EPOCH_MICRO,
) -> list[PresenceSession]:
    """Full pipeline from raw sightings to sessions, sorted by ``(device_id, start)``.

    A device's zone-resolved sightings are cut into runs of one zone before gap
    splitting, so a device never holds two overlapping sessions.
    ActiveAnnounce sightings carry no radio evidence and are ignored here.
    """
    radio = [s for s in sightings if s.kind is not SightingKind.ACTIVE_ANNOUNCE]
    per_device: dict[str, list[Sighting]] = defaultdict(list)
    for s in assign_zones(radio, sensors, epoch_micro):
        per_device[s.device_id].append(s)
    sessions = []
    for device in sorted(per_device):
        run: list[Sighting] = []
        for s in per_device[device]:
            if run and s.zone_id != run[-1].zone_id:
                sessions.extend(sessionize(run, gap_micro))
                run = []
            run.append(s)
        sessions.extend(sessionize(run, gap_micro))
    return sessions


def device_summary(device_id: str, sessions: Iterable[PresenceSession]) -> DeviceRecord:
    mine = [s for s in sessions if s.device_id == device_id]
    if not mine:
        raise UnknownDevice(f"no sessions for device {device_id!r}")
    return DeviceRecord(
        device_id=device_id,
        first_seen=min(s.start_micro for s in mine),
        last_seen=max(s.end_micro for s in mine),
        visit_count=len(mine),
        zones_visited=frozenset(s.zone_id for s in mine),
    )


def device_summaries(sessions: Iterable[PresenceSession]) -> dict[str, DeviceRecord]:
    sessions = list(sessions)
    return {d: device_summary(d, sessions) for d in sorted({s.device_id for s in sessions})}
