"""Observation-only analytics over sessions and sightings.

Time windows are half-open ``[t0, t1)``; sessions are closed ``[start, end]``.
All arithmetic is in integer microseconds.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .tracker import PresenceSession, Sighting

DEFAULT_DWELL_THRESHOLD_MICRO = 120_000_000


class OverlappingSessions(ValueError):
    pass


@dataclass(frozen=True)
class OccupancySeries:
    zone_id: str
    bucket_micro: int
    counts: tuple[tuple[int, int], ...]

    @property
    def total(self) -> int:
        return sum(c for _, c in self.counts)


@dataclass(frozen=True)
class DwellStats:
    count: int
    total: int
    mean: float | None
    max: int | None


@dataclass(frozen=True)
class FlowMatrix:
    zones: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def __getitem__(self, pair: tuple[str, str]) -> int:
        a, b = pair
        return self.counts[self.zones.index(a)][self.zones.index(b)]

    @property
    def total(self) -> int:
        return sum(map(sum, self.counts))


@dataclass(frozen=True)
class InterestProfile:
    device_id: str
    interests: frozenset[str]


def occupancy(
    sessions: Iterable[PresenceSession],
    zone: str,
    bucket_micro: int,
    start: int | None = None,
    end: int | None = None,
) -> OccupancySeries:
    """Distinct devices per bucket whose session in ``zone`` overlaps the bucket.

    Buckets are aligned to multiples of ``bucket_micro`` and cover ``[start, end)``;
    the range defaults to the span of the zone's sessions.
    """
    if bucket_micro <= 0:
        raise ValueError("bucket_micro must be positive")
    mine = [s for s in sessions if s.zone_id == zone]
    if start is None:
        start = min((s.start_micro for s in mine), default=0)
    if end is None:
        end = max((s.end_micro for s in mine), default=start) + 1
    first = start // bucket_micro
    n_buckets = max(0, -(-end // bucket_micro) - first)
    devices: list[set[str]] = [set() for _ in range(n_buckets)]
    for s in mine:
        lo = max(s.start_micro // bucket_micro, first)
        hi = min(s.end_micro // bucket_micro, first + n_buckets - 1)
        for b in range(lo, hi + 1):
            devices[b - first].add(s.device_id)
    counts = tuple(((first + i) * bucket_micro, len(d)) for i, d in enumerate(devices))
    return OccupancySeries(zone, bucket_micro, counts)


def dwell_stats(sessions: Iterable[PresenceSession], zone: str) -> DwellStats:
    durations = [s.duration_micro for s in sessions if s.zone_id == zone]
    if not durations:
        return DwellStats(0, 0, None, None)
    total = sum(durations)
    return DwellStats(len(durations), total, total / len(durations), max(durations))


def _per_device(sessions: Iterable[PresenceSession]) -> dict[str, list[PresenceSession]]:
    grouped: dict[str, list[PresenceSession]] = defaultdict(list)
    for s in sessions:
        grouped[s.device_id].append(s)
    for group in grouped.values():
        group.sort(key=lambda s: (s.start_micro, s.end_micro))
    return grouped


def flow_matrix(sessions: Iterable[PresenceSession], zones: Sequence[str] | None = None) -> FlowMatrix:
    """Count zone-to-zone moves between each device's consecutive sessions."""
    sessions = list(sessions)
    zone_list = tuple(zones) if zones is not None else tuple(sorted({s.zone_id for s in sessions}))
    index = {z: i for i, z in enumerate(zone_list)}
    counts = [[0] * len(zone_list) for _ in zone_list]
    for device, group in _per_device(sessions).items():
        for prev, cur in zip(group, group[1:]):
            if cur.start_micro < prev.end_micro:
                raise OverlappingSessions(
                    f"device {device!r}: session in {cur.zone_id!r} starts before "
                    f"its session in {prev.zone_id!r} ends"
                )
            if prev.zone_id != cur.zone_id:
                counts[index[prev.zone_id]][index[cur.zone_id]] += 1
    return FlowMatrix(zone_list, tuple(tuple(row) for row in counts))


def unique_devices(sightings: Iterable[Sighting], t0: int, t1: int) -> int:
    if t0 >= t1:
        raise ValueError("window needs t0 < t1")
    return len({s.device_id for s in sightings if t0 <= s.ts_micro < t1})


def interest_profile(
    sessions: Iterable[PresenceSession],
    device_id: str,
    booths: Iterable[str],
    dwell_threshold: int = DEFAULT_DWELL_THRESHOLD_MICRO,
) -> InterestProfile:
    """Booth zones where the device's summed dwell reaches ``dwell_threshold``."""
    if dwell_threshold <= 0:
        raise ValueError("dwell_threshold must be positive")
    booths = set(booths)
    dwell: dict[str, int] = defaultdict(int)
    for s in sessions:
        if s.device_id == device_id and s.zone_id in booths:
            dwell[s.zone_id] += s.duration_micro
    return InterestProfile(device_id, frozenset(z for z, t in dwell.items() if t >= dwell_threshold))


def interest_profiles(
    sessions: Iterable[PresenceSession],
    booths: Iterable[str],
    dwell_threshold: int = DEFAULT_DWELL_THRESHOLD_MICRO,
) -> dict[str, InterestProfile]:
    sessions = list(sessions)
    booths = set(booths)
    return {
        d: interest_profile(sessions, d, booths, dwell_threshold)
        for d in sorted({s.device_id for s in sessions})
    }
