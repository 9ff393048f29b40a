import random
import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wearsense import codec
from wearsense.codec import BleAdvertisement, CaptureRecord, LinkType, MacAddress, ProbeRequestFrame
from wearsense.tracker import (
    IngestStats,
    PresenceSession,
    PresenceTracker,
    SensorMap,
    Sighting,
    SightingKind,
    UnknownDevice,
    UnknownSensor,
    UnsortedInput,
    assign_zones,
    build_sessions,
    device_summary,
    hash_identity,
    ingest,
    sessionize,
)

from oracles import sessionize as oracle_sessionize

S = 1_000_000
SENSORS = SensorMap({"s1": "A", "s2": "B", "s3": "A"})
SA = MacAddress.parse("aa:bb:cc:dd:ee:ff")


def probe_record(ts=0, sa=SA, rssi=-55):
    body = codec.serialize_probe_request(ProbeRequestFrame(sa=sa))
    return CaptureRecord(ts, LinkType.IEEE80211_RADIOTAP, codec.build_radiotap(rssi) + body)


def sight(device, sensor, ts, rssi=None):
    return Sighting(device, sensor, ts, rssi)


class TestIngest:
    def test_probe_becomes_sighting(self):
        s = ingest(probe_record(5, rssi=-61), SENSORS, "s1")
        assert (s.device_id, s.sensor_id, s.ts_micro, s.rssi_dbm, s.kind) == (
            "aa:bb:cc:dd:ee:ff", "s1", 5, -61, SightingKind.WIFI_PROBE
        )

    def test_bare_80211_has_no_rssi(self):
        body = codec.serialize_probe_request(ProbeRequestFrame(sa=SA))
        s = ingest(CaptureRecord(0, LinkType.IEEE80211_BARE, body), SENSORS, "s2")
        assert s.rssi_dbm is None and s.device_id == str(SA)

    def test_ibeacon_identity(self):
        uuid = bytes(range(16))
        md = b"\x4c\x00\x02\x15" + uuid + b"\x00\x01\x00\x02\xc5"
        adv = BleAdvertisement.build(SA, [(0xFF, md)])
        rec = CaptureRecord(0, LinkType.BLE_ADV, codec.serialize_ble_ll_packet(adv))
        s = ingest(rec, SENSORS, "s1")
        assert s.device_id == "00010203-0405-0607-0809-0a0b0c0d0e0f:1:2"
        assert s.kind is SightingKind.BLE_ADV

    def test_plain_ble_uses_adv_address(self):
        adv = BleAdvertisement.build(SA, [(0x01, b"\x06")])
        rec = CaptureRecord(0, LinkType.BLE_ADV, codec.serialize_ble_ll_packet(adv))
        assert ingest(rec, SENSORS, "s1").device_id == str(SA)

    def test_beacon_frame_dropped(self):
        body = bytearray(codec.serialize_probe_request(ProbeRequestFrame(sa=SA)))
        body[0] = 0x80
        stats = IngestStats()
        assert ingest(CaptureRecord(0, LinkType.IEEE80211_BARE, bytes(body)), SENSORS, "s1", stats=stats) is None
        assert (stats.frames, stats.sightings, stats.dropped) == (1, 0, 1)

    def test_unknown_sensor(self):
        with pytest.raises(UnknownSensor):
            ingest(probe_record(), SENSORS, "nope")

    def test_hashing(self):
        salt = b"pepper"
        s = ingest(probe_record(), SENSORS, "s1", salt=salt)
        assert s.device_id == hash_identity(str(SA), salt)
        assert len(s.device_id) == 32
        assert s.device_id != hash_identity(str(SA), b"other")


class TestAssignZones:
    def test_strongest_wins(self):
        out = assign_zones([sight("x", "s1", 0, -50), sight("x", "s2", 1, -70)], SENSORS)
        assert [(s.sensor_id, s.zone_id) for s in out] == [("s1", "A")]

    def test_tie_goes_to_smallest_sensor(self):
        out = assign_zones([sight("x", "s2", 0, -60), sight("x", "s1", 1, -60)], SENSORS)
        assert {s.zone_id for s in out} == {"A"}

    def test_single_sensor(self):
        out = assign_zones([sight("x", "s2", 0, -90)], SENSORS)
        assert out[0].zone_id == "B"

    def test_missing_rssi_loses(self):
        out = assign_zones([sight("x", "s1", 0, None), sight("x", "s2", 1, -90)], SENSORS)
        assert {s.zone_id for s in out} == {"B"}

    def test_epochs_are_independent(self):
        out = assign_zones(
            [sight("x", "s1", 0, -50), sight("x", "s2", 10 * S, -50), sight("x", "s1", 10 * S + 1, -70)],
            SENSORS,
            10 * S,
        )
        assert [s.zone_id for s in out] == ["A", "B"]

    def test_bad_epoch(self):
        with pytest.raises(ValueError):
            assign_zones([], SENSORS, 0)

    @given(st.lists(st.tuples(st.sampled_from(["s1", "s2", "s3"]), st.integers(0, 9), st.one_of(st.none(), st.integers(-90, -40))), min_size=1, max_size=20), st.randoms())
    def test_permutation_invariant(self, items, rnd):
        sightings = [sight("x", sensor, ts, rssi) for sensor, ts, rssi in items]
        shuffled = sightings[:]
        rnd.shuffle(shuffled)
        assert assign_zones(sightings, SENSORS, 10) == assign_zones(shuffled, SENSORS, 10)


class TestSessionize:
    def zoned(self, ts):
        return [Sighting("d", "s1", t, zone_id="z") for t in ts]

    def test_one_session(self):
        (s,) = sessionize(self.zoned([0, 30 * S, 60 * S]), 300 * S)
        assert (s.start_micro, s.end_micro, s.sighting_count) == (0, 60 * S, 3)

    def test_split(self):
        assert len(sessionize(self.zoned([0, 400 * S]), 300 * S)) == 2

    def test_boundary_inclusive(self):
        assert len(sessionize(self.zoned([0, 300 * S]), 300 * S)) == 1

    def test_unsorted(self):
        with pytest.raises(UnsortedInput):
            sessionize(self.zoned([10, 5]), 300 * S)

    def test_empty(self):
        assert sessionize([], 10) == []

    @given(st.lists(st.integers(0, 10_000), max_size=50), st.integers(1, 2_000))
    def test_matches_oracle(self, ts, gap):
        ts.sort()
        assert sessionize(self.zoned(ts), gap) == oracle_sessionize(ts, gap)

    @given(st.lists(st.integers(0, 10_000), min_size=1, max_size=50), st.integers(1, 2_000))
    def test_session_invariants(self, ts, gap):
        ts.sort()
        sessions = sessionize(self.zoned(ts), gap)
        assert sum(s.sighting_count for s in sessions) == len(ts)
        for a, b in zip(sessions, sessions[1:]):
            assert a.start_micro <= a.end_micro < b.start_micro
            assert b.start_micro - a.end_micro > gap


class TestBuildSessions:
    def test_zone_changes_split_runs(self):
        sightings = [sight("x", "s1", t * S, -50) for t in (0, 20, 40)] + [
            sight("x", "s2", t * S, -50) for t in (60, 80)
        ] + [sight("x", "s1", 100 * S, -50)]
        sessions = build_sessions(sightings, SENSORS)
        assert [(s.zone_id, s.start_micro // S, s.end_micro // S) for s in sessions] == [
            ("A", 0, 40), ("B", 60, 80), ("A", 100, 100)
        ]

    def test_announcements_ignored(self):
        ann = Sighting("x", "s1", 0, None, SightingKind.ACTIVE_ANNOUNCE, {"k": "v"})
        assert build_sessions([ann], SENSORS) == []

    def test_hashing_only_renames(self):
        rng = random.Random(3)
        raw = sorted(
            (sight(f"m{rng.randrange(4)}", rng.choice(["s1", "s2"]), rng.randrange(3000) * S, rng.randint(-90, -40))
             for _ in range(200)),
            key=lambda s: s.ts_micro,
        )
        salt = b"k"
        hashed = [Sighting(hash_identity(s.device_id, salt), s.sensor_id, s.ts_micro, s.rssi_dbm) for s in raw]

        def shape(sessions, rename=lambda d: d):
            return sorted((rename(s.device_id), s.zone_id, s.start_micro, s.end_micro, s.sighting_count) for s in sessions)

        assert shape(build_sessions(hashed, SENSORS)) == shape(
            build_sessions(raw, SENSORS), lambda d: hash_identity(d, salt)
        )


class TestDeviceSummary:
    def test_two_visits(self):
        sessions = [PresenceSession("x", "A", 0, 10, 2), PresenceSession("x", "A", 500, 600, 3)]
        rec = device_summary("x", sessions)
        assert (rec.visit_count, rec.zones_visited, rec.first_seen, rec.last_seen) == (2, {"A"}, 0, 600)

    def test_two_zones(self):
        sessions = [PresenceSession("x", "A", 0, 10, 2), PresenceSession("x", "B", 20, 30, 2)]
        assert device_summary("x", sessions).zones_visited == {"A", "B"}

    def test_single_sighting(self):
        rec = device_summary("x", [PresenceSession("x", "A", 7, 7, 1)])
        assert rec.first_seen == rec.last_seen == 7

    def test_unknown(self):
        with pytest.raises(UnknownDevice):
            device_summary("y", [PresenceSession("x", "A", 7, 7, 1)])


class TestPresenceTracker:
    def test_out_of_order_within_epoch(self):
        t = PresenceTracker(SENSORS, epoch_micro=10 * S)
        t.add(sight("x", "s1", 5 * S))
        t.add(sight("x", "s1", 2 * S))
        assert len(t.snapshot()) == 2

    def test_cross_epoch_regression(self):
        t = PresenceTracker(SENSORS, epoch_micro=10 * S)
        t.add(sight("x", "s1", 25 * S))
        with pytest.raises(UnsortedInput):
            t.add(sight("x", "s1", 5 * S))
        # another sensor keeps its own clock
        t.add(sight("x", "s2", 5 * S))

    def test_ingest_pcap(self):
        data = codec.write_pcap(
            [probe_record(i * 30 * S) for i in range(3)], LinkType.IEEE80211_RADIOTAP
        )
        t = PresenceTracker(SENSORS)
        assert t.ingest_pcap(data, "s1") == 3
        (session,) = t.sessions()
        assert (session.zone_id, session.sighting_count) == ("A", 3)

    def test_snapshots_are_consistent_under_writes(self):
        t = PresenceTracker(SENSORS)
        done = threading.Event()
        sizes = []

        def reader():
            while not done.is_set():
                snap = t.snapshot()
                assert all(isinstance(s, Sighting) for s in snap)
                sizes.append(len(snap))

        r = threading.Thread(target=reader)
        r.start()
        for i in range(5000):
            t.add(sight(f"d{i % 7}", "s1", i))
        done.set()
        r.join()
        assert sizes == sorted(sizes)
        assert len(t.snapshot()) == 5000


def test_sighting_attrs_only_on_announcements():
    with pytest.raises(ValueError):
        Sighting("x", "s1", 0, attrs={"a": "b"})
    with pytest.raises(ValueError):
        Sighting("x", "s1", 0, kind=SightingKind.ACTIVE_ANNOUNCE)


def test_sensor_map_rejects_conflicting_pairs():
    with pytest.raises(ValueError):
        SensorMap.from_pairs([("s1", "A"), ("s1", "B")])
    assert SENSORS.sensors_in("A") == ["s1", "s3"]
    assert SENSORS.zone_ids == ["A", "B"]
