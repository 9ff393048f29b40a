"""Wire formats: pcap capture files, radiotap, 802.11 probe requests and BLE advertisements.

Every parser is a pure function of its input bytes and either returns a value
or raises a subclass of :class:`CodecError`.
"""

from __future__ import annotations

import struct
import uuid
from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "BadMagic",
    "BadVersion",
    "BleAdvertisement",
    "CaptureRecord",
    "CodecError",
    "Empty",
    "FrameTypeMismatch",
    "IBeaconPayload",
    "LenOverrun",
    "LinkType",
    "MacAddress",
    "ProbeRequestFrame",
    "SsidTooLong",
    "Truncated",
    "UnsupportedLinkType",
    "build_radiotap",
    "parse_ble_advertisement",
    "parse_ble_ll_packet",
    "parse_pcap",
    "parse_probe_request",
    "parse_radiotap",
    "serialize_ble_advertisement",
    "serialize_ble_ll_packet",
    "serialize_probe_request",
    "write_pcap",
]


class CodecError(ValueError):
    """Base class for every declared parse failure."""


class BadMagic(CodecError):
    pass


class Truncated(CodecError):
    """Input ends before a declared length.

    For pcap input, ``records`` holds everything decoded before the cut.
    """

    def __init__(self, message: str, records: list[CaptureRecord] | None = None):
        super().__init__(message)
        self.records = records if records is not None else []


class UnsupportedLinkType(CodecError):
    pass


class BadVersion(CodecError):
    pass


class LenOverrun(CodecError):
    pass


class FrameTypeMismatch(CodecError):
    pass


class SsidTooLong(CodecError):
    pass


class Empty(CodecError):
    pass


# ---------------------------------------------------------------------------
# Addresses


@dataclass(frozen=True, order=True, slots=True)
class MacAddress:
    octets: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.octets, bytes) or len(self.octets) != 6:
            raise ValueError(f"a MAC address is exactly 6 bytes, got {self.octets!r}")

    @classmethod
    def parse(cls, text: str) -> MacAddress:
        parts = text.split(":")
        if len(parts) != 6 or any(len(p) != 2 for p in parts):
            raise ValueError(f"malformed MAC address {text!r}")
        return cls(bytes.fromhex("".join(parts)))

    def __str__(self) -> str:
        return self.octets.hex(":")

    @property
    def is_broadcast(self) -> bool:
        return self.octets == BROADCAST.octets


BROADCAST = MacAddress(b"\xff" * 6)


# ---------------------------------------------------------------------------
# pcap


class LinkType(Enum):
    IEEE80211_BARE = 105
    IEEE80211_RADIOTAP = 127
    BLE_ADV = 251


_LINK_TYPES = {lt.value: lt for lt in LinkType}

PCAP_MAGIC = 0xA1B2C3D4
_MAGIC_LE = b"\xd4\xc3\xb2\xa1"
_MAGIC_BE = b"\xa1\xb2\xc3\xd4"
_GLOBAL_HEADER_LEN = 24
_RECORD_HEADER_LEN = 16
MAX_PAYLOAD = 65535


@dataclass(frozen=True, slots=True)
class CaptureRecord:
    ts_micro: int
    link_type: LinkType
    payload: bytes

    def __post_init__(self) -> None:
        if self.ts_micro < 0:
            raise ValueError("ts_micro must be non-negative")
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError(f"payload exceeds {MAX_PAYLOAD} bytes")


def parse_pcap(data: bytes) -> list[CaptureRecord]:
    """Decode a classic (non-ng) pcap file into records in file order."""
    magic = data[:4]
    if magic == _MAGIC_LE:
        endian = "<"
    elif magic == _MAGIC_BE:
        endian = ">"
    else:
        raise BadMagic(f"not a pcap file (magic {magic.hex() or 'missing'})")
    if len(data) < _GLOBAL_HEADER_LEN:
        raise Truncated("pcap global header shorter than 24 bytes")
    network = struct.unpack_from(endian + "I", data, 20)[0]
    link_type = _LINK_TYPES.get(network)
    if link_type is None:
        raise UnsupportedLinkType(f"unsupported pcap link type {network}")

    header = struct.Struct(endian + "IIII")
    records: list[CaptureRecord] = []
    append = records.append
    pos = _GLOBAL_HEADER_LEN
    end = len(data)
    while pos < end:
        if pos + _RECORD_HEADER_LEN > end:
            raise Truncated(f"record header cut at offset {pos}", records)
        ts_sec, ts_usec, incl_len, _orig_len = header.unpack_from(data, pos)
        pos += _RECORD_HEADER_LEN
        if incl_len > MAX_PAYLOAD:
            raise Truncated(f"record at offset {pos - 16} declares {incl_len} bytes", records)
        if pos + incl_len > end:
            raise Truncated(f"record payload cut at offset {pos}", records)
        append(CaptureRecord(ts_sec * 1_000_000 + ts_usec, link_type, data[pos:pos + incl_len]))
        pos += incl_len
    return records


def write_pcap(records, link_type: LinkType, snaplen: int = MAX_PAYLOAD) -> bytes:
    """Encode ``records`` as a little-endian pcap file.

    ``records`` may hold :class:`CaptureRecord` values or ``(ts_micro, payload)`` pairs.
    """
    out = bytearray(struct.pack("<IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, snaplen, link_type.value))
    pack = struct.Struct("<IIII").pack
    for rec in records:
        if isinstance(rec, CaptureRecord):
            ts, payload = rec.ts_micro, rec.payload
        else:
            ts, payload = rec
        sec, usec = divmod(ts, 1_000_000)
        out += pack(sec, usec, len(payload), len(payload))
        out += payload
    return bytes(out)


# ---------------------------------------------------------------------------
# radiotap

# (bit, size, alignment) for the fields walked before the antenna signal
_RADIOTAP_FIELDS = ((0, 8, 8), (1, 1, 1), (2, 1, 1), (3, 4, 2), (4, 2, 2))
_RT_ANTSIGNAL = 5


def parse_radiotap(data: bytes) -> tuple[int | None, int]:
    """Return ``(rssi_dbm, body_offset)`` for a radiotap-prefixed frame."""
    if len(data) < 8:
        raise Truncated("radiotap header needs at least 8 bytes")
    if data[0] != 0:
        raise BadVersion(f"radiotap version {data[0]}")
    hdr_len = data[2] | (data[3] << 8)
    if hdr_len > len(data):
        raise LenOverrun(f"radiotap length {hdr_len} exceeds buffer of {len(data)}")
    if hdr_len < 8:
        raise LenOverrun(f"radiotap length {hdr_len} shorter than its fixed header")

    present = int.from_bytes(data[4:8], "little")
    pos = 8
    word = present
    while word & 0x80000000:
        if pos + 4 > hdr_len:
            raise LenOverrun("present bitmap runs past the declared header length")
        word = int.from_bytes(data[pos:pos + 4], "little")
        pos += 4

    for bit, size, align in _RADIOTAP_FIELDS:
        if present & (1 << bit):
            pos += -pos % align
            pos += size
    rssi = None
    if present & (1 << _RT_ANTSIGNAL):
        if pos + 1 > hdr_len:
            raise LenOverrun("antenna signal field runs past the declared header length")
        rssi = data[pos] - 256 if data[pos] > 127 else data[pos]
    # fields after bit 5 are skipped via hdr_len
    return rssi, hdr_len


def build_radiotap(rssi_dbm: int | None) -> bytes:
    """Minimal radiotap header carrying only the dBm antenna signal."""
    if rssi_dbm is None:
        return b"\x00\x00\x08\x00\x00\x00\x00\x00"
    return struct.pack("<BBHIb", 0, 0, 9, 1 << _RT_ANTSIGNAL, rssi_dbm)


# ---------------------------------------------------------------------------
# 802.11 probe requests

PROBE_REQUEST_FC = 0x40
_EID_SSID = 0
_EID_RATES = 1
MAX_SSID = 32


@dataclass(frozen=True, slots=True)
class ProbeRequestFrame:
    """A probe request. ``ssid=None`` is the wildcard SSID."""

    sa: MacAddress
    da: MacAddress = BROADCAST
    bssid: MacAddress = BROADCAST
    seq: int = 0
    frag: int = 0
    ssid: str | None = None
    supported_rates: bytes = b""
    rssi_dbm: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not 0 <= self.seq < 4096:
            raise ValueError(f"seq {self.seq} outside 0..4095")
        if not 0 <= self.frag < 16:
            raise ValueError(f"frag {self.frag} outside 0..15")
        if self.ssid == "":
            object.__setattr__(self, "ssid", None)
        elif self.ssid is not None and len(_ssid_bytes(self.ssid)) > MAX_SSID:
            raise SsidTooLong(f"SSID longer than {MAX_SSID} bytes")
        if len(self.supported_rates) > 255:
            raise ValueError("supported rates element holds at most 255 bytes")

    @property
    def is_wildcard(self) -> bool:
        return self.ssid is None


def _ssid_bytes(ssid: str) -> bytes:
    return ssid.encode("utf-8", "surrogateescape")


def parse_probe_request(data: bytes) -> ProbeRequestFrame:
    """Parse a bare 802.11 probe request (radiotap already stripped)."""
    if len(data) < 24:
        if data and data[0] != PROBE_REQUEST_FC:
            raise FrameTypeMismatch(f"frame control 0x{data[0]:02x} is not a probe request")
        raise Truncated(f"management header needs 24 bytes, got {len(data)}")
    if data[0] != PROBE_REQUEST_FC:
        raise FrameTypeMismatch(f"frame control 0x{data[0]:02x} is not a probe request")
    seq_ctl = data[22] | (data[23] << 8)

    ssid_raw: bytes | None = None
    rates: bytes | None = None
    pos = 24
    end = len(data)
    while pos < end:
        if pos + 2 > end:
            raise Truncated(f"element header cut at offset {pos}")
        eid = data[pos]
        length = data[pos + 1]
        body_end = pos + 2 + length
        if body_end > end:
            raise Truncated(f"element {eid} overruns the frame")
        if eid == _EID_SSID and ssid_raw is None:
            if length > MAX_SSID:
                raise SsidTooLong(f"SSID element of {length} bytes")
            ssid_raw = data[pos + 2:body_end]
        elif eid == _EID_RATES and rates is None:
            rates = data[pos + 2:body_end]
        pos = body_end

    ssid = ssid_raw.decode("utf-8", "surrogateescape") if ssid_raw else None
    return ProbeRequestFrame(
        sa=MacAddress(data[10:16]),
        da=MacAddress(data[4:10]),
        bssid=MacAddress(data[16:22]),
        seq=seq_ctl >> 4,
        frag=seq_ctl & 0xF,
        ssid=ssid,
        supported_rates=rates or b"",
    )


def serialize_probe_request(frame: ProbeRequestFrame) -> bytes:
    ssid = b"" if frame.ssid is None else _ssid_bytes(frame.ssid)
    out = bytearray(b"\x40\x00\x00\x00")
    out += frame.da.octets
    out += frame.sa.octets
    out += frame.bssid.octets
    out += ((frame.seq << 4) | frame.frag).to_bytes(2, "little")
    out += bytes((_EID_SSID, len(ssid))) + ssid
    if frame.supported_rates:
        out += bytes((_EID_RATES, len(frame.supported_rates))) + frame.supported_rates
    return bytes(out)


# ---------------------------------------------------------------------------
# BLE advertising

IBEACON_PREFIX = b"\x4c\x00\x02\x15"
IBEACON_LEN = 25
AD_MANUFACTURER = 0xFF


@dataclass(frozen=True, slots=True)
class IBeaconPayload:
    uuid: bytes
    major: int
    minor: int
    tx_power_dbm: int

    def __post_init__(self) -> None:
        if len(self.uuid) != 16:
            raise ValueError("iBeacon uuid is 16 bytes")
        if not (0 <= self.major <= 0xFFFF and 0 <= self.minor <= 0xFFFF):
            raise ValueError("major/minor are unsigned 16-bit")
        if not -128 <= self.tx_power_dbm <= 127:
            raise ValueError("tx power is a signed byte")

    @property
    def identity(self) -> str:
        return f"{uuid.UUID(bytes=self.uuid)}:{self.major}:{self.minor}"

    def manufacturer_data(self) -> bytes:
        return IBEACON_PREFIX + self.uuid + struct.pack(">HHb", self.major, self.minor, self.tx_power_dbm)

    @classmethod
    def from_manufacturer_data(cls, data: bytes) -> IBeaconPayload | None:
        if len(data) != IBEACON_LEN or not data.startswith(IBEACON_PREFIX):
            return None
        major, minor, tx = struct.unpack_from(">HHb", data, 20)
        return cls(data[4:20], major, minor, tx)


@dataclass(frozen=True, slots=True)
class BleAdvertisement:
    adv_addr: MacAddress
    ad_structures: tuple[tuple[int, bytes], ...] = ()
    ibeacon: IBeaconPayload | None = None

    @classmethod
    def build(cls, adv_addr: MacAddress, ad_structures=()) -> BleAdvertisement:
        """Construct with ``ibeacon`` derived from the AD structures."""
        structs = tuple((t, bytes(d)) for t, d in ad_structures)
        return cls(adv_addr, structs, _find_ibeacon(structs))

    @property
    def identity(self) -> str:
        return self.ibeacon.identity if self.ibeacon else str(self.adv_addr)


def _find_ibeacon(structs) -> IBeaconPayload | None:
    for ad_type, ad_data in structs:
        if ad_type == AD_MANUFACTURER:
            beacon = IBeaconPayload.from_manufacturer_data(ad_data)
            if beacon is not None:
                return beacon
    return None


def parse_ble_advertisement(data: bytes) -> BleAdvertisement:
    """Parse an advertising PDU payload: AdvA (on-air byte order) then AD structures."""
    if len(data) < 6:
        raise Empty(f"advertisement needs a 6-byte AdvA, got {len(data)} bytes")
    addr = MacAddress(data[5::-1])
    structs = []
    pos = 6
    end = len(data)
    while pos < end:
        length = data[pos]
        if length == 0:
            # zero length marks the end of significant data
            break
        if pos + 1 + length > end:
            raise Truncated(f"AD structure at offset {pos} declares {length} bytes")
        structs.append((data[pos + 1], data[pos + 2:pos + 1 + length]))
        pos += 1 + length
    structs = tuple(structs)
    return BleAdvertisement(addr, structs, _find_ibeacon(structs))


def serialize_ble_advertisement(adv: BleAdvertisement) -> bytes:
    out = bytearray(adv.adv_addr.octets[::-1])
    for ad_type, ad_data in adv.ad_structures:
        if len(ad_data) > 254:
            raise ValueError("AD structure data holds at most 254 bytes")
        out += bytes((1 + len(ad_data), ad_type)) + ad_data
    return bytes(out)


# Link-layer framing for pcap link type 251: access address, 2-byte PDU
# header, PDU payload, CRC. The CRC is not verified on read and written as zeros.
ADV_ACCESS_ADDRESS = 0x8E89BED6
_ADV_PDU_TYPES = {0x0: "ADV_IND", 0x2: "ADV_NONCONN_IND", 0x6: "ADV_SCAN_IND"}


def parse_ble_ll_packet(data: bytes) -> tuple[int, bytes]:
    """Split a link-layer advertising packet into ``(pdu_type, pdu_payload)``."""
    if len(data) < 6:
        raise Truncated("link-layer packet shorter than access address + header")
    pdu_type = data[4] & 0x0F
    length = data[5]
    if 6 + length > len(data):
        raise Truncated(f"PDU declares {length} bytes")
    if pdu_type not in _ADV_PDU_TYPES:
        raise FrameTypeMismatch(f"PDU type {pdu_type} is not an advertising PDU")
    return pdu_type, data[6:6 + length]


def serialize_ble_ll_packet(adv: BleAdvertisement, pdu_type: int = 0x0) -> bytes:
    payload = serialize_ble_advertisement(adv)
    if len(payload) > 255:
        raise ValueError("advertising payload too long")
    return struct.pack("<IBB", ADV_ACCESS_ADDRESS, pdu_type, len(payload)) + payload + b"\x00\x00\x00"
