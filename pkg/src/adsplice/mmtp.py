"""MMT-inspired packetized transport.

Every packet starts with a 19-octet big-endian header:

    offset size field
    0      1    version (= 1)
    1      1    payload_type: 0 = asset-map metadata, 1 = media fragment
    2      2    packet_id (one value per asset)
    4      4    packet_sequence_number (per packet_id, from 0)
    8      4    timestamp_ms (u64 presentation time truncated to u32)
    12     4    mpu_sequence_number (per packet_id, from 0)
    16     1    flags: bits 7-6 fragmentation indicator, bits 5-0 reserved 0
    17     2    payload_length
    19     -    payload

A media processing unit (MPU) that fits one packet ships with indicator 0;
otherwise the first fragment is 1, middle fragments 2 and the last 3.
Video MPUs carry a segment's complete container bytes; audio MPUs carry the
segment's raw s16le PCM.

The depacketizer tolerates reordering inside a 64-packet window per
packet_id: an incomplete group goes stale and is dropped as a loss when the
highest sequence number seen for the asset runs 64 past the group's newest
fragment (an MPU still actively receiving fragments never expires, however
many packets it spans).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

MMTP_VERSION = 1
HEADER = struct.Struct(">BBHIIIBH")
HEADER_SIZE = HEADER.size  # 19 octets
MAX_PAYLOAD = 1400

PT_METADATA = 0
PT_MFU = 1

FI_COMPLETE = 0
FI_FIRST = 1
FI_MIDDLE = 2
FI_LAST = 3


class MmtpError(ValueError):
    def __init__(self, message: str, field_name: str | None = None):
        super().__init__(message)
        self.field = field_name


@dataclass(frozen=True)
class MmtpPacket:
    payload_type: int
    packet_id: int
    packet_seq: int
    timestamp_ms: int
    mpu_seq: int
    frag_indicator: int
    payload: bytes
    version: int = MMTP_VERSION


def pack_packet(p: MmtpPacket) -> bytes:
    if not 0 <= p.frag_indicator <= 3:
        raise MmtpError(f"fragmentation indicator {p.frag_indicator} out of range", "flags")
    if len(p.payload) > 0xFFFF:
        raise MmtpError(f"payload of {len(p.payload)} bytes exceeds u16", "payload_length")
    header = HEADER.pack(
        p.version,
        p.payload_type,
        p.packet_id,
        p.packet_seq,
        p.timestamp_ms & 0xFFFFFFFF,
        p.mpu_seq,
        p.frag_indicator << 6,
        len(p.payload),
    )
    return header + p.payload


def parse_packet(data: bytes, offset: int = 0) -> tuple[MmtpPacket, int]:
    """Parse one packet starting at offset; returns it and the next offset."""
    if len(data) - offset < HEADER_SIZE:
        raise MmtpError(
            f"need {HEADER_SIZE} header octets, have {len(data) - offset}", "header"
        )
    version, ptype, pid, pseq, ts, mseq, flags, plen = HEADER.unpack_from(data, offset)
    if version != MMTP_VERSION:
        raise MmtpError(f"unsupported version {version}", "version")
    if ptype not in (PT_METADATA, PT_MFU):
        raise MmtpError(f"unknown payload type {ptype}", "payload_type")
    if flags & 0x3F:
        raise MmtpError(f"reserved flag bits set: {flags:#04x}", "flags")
    start = offset + HEADER_SIZE
    if len(data) - start < plen:
        raise MmtpError(f"payload truncated: need {plen} bytes", "payload_length")
    return (
        MmtpPacket(
            payload_type=ptype,
            packet_id=pid,
            packet_seq=pseq,
            timestamp_ms=ts,
            mpu_seq=mseq,
            frag_indicator=flags >> 6,
            payload=data[start : start + plen],
            version=version,
        ),
        start + plen,
    )


def parse_one(data: bytes) -> MmtpPacket:
    """Parse a message that must contain exactly one packet."""
    packet, end = parse_packet(data)
    if end != len(data):
        raise MmtpError(f"{len(data) - end} trailing bytes after packet", "payload_length")
    return packet


# ---------------------------------------------------------------------------
# asset configuration


@dataclass(frozen=True)
class AssetConfig:
    asset_id: str
    packet_id: int
    source: str  # "video" or "audio"


@dataclass(frozen=True)
class PacketizerConfig:
    assets: tuple[AssetConfig, ...]
    max_payload: int = MAX_PAYLOAD

    def __post_init__(self):
        ids = [a.packet_id for a in self.assets]
        if len(set(ids)) != len(ids):
            raise MmtpError("packet ids must be unique", "packet_id")
        if not 1 <= self.max_payload <= 0xFFFF:
            raise MmtpError(f"max_payload {self.max_payload} out of range", "max_payload")

    def to_json(self) -> str:
        return json.dumps(
            {
                "assets": [
                    {"asset_id": a.asset_id, "packet_id": a.packet_id, "source": a.source}
                    for a in self.assets
                ],
                "max_payload": self.max_payload,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "PacketizerConfig":
        raw = json.loads(text)
        return cls(
            assets=tuple(
                AssetConfig(a["asset_id"], a["packet_id"], a["source"])
                for a in raw["assets"]
            ),
            max_payload=raw.get("max_payload", MAX_PAYLOAD),
        )


def default_config(video_packet_id: int = 1, audio_packet_id: int = 2) -> PacketizerConfig:
    return PacketizerConfig(
        assets=(
            AssetConfig("video", video_packet_id, "video"),
            AssetConfig("audio", audio_packet_id, "audio"),
        )
    )


# ---------------------------------------------------------------------------
# packetizer


class Packetizer:
    """Fragments MPUs into packets for one packet_id, numbering them."""

    def __init__(self, packet_id: int, max_payload: int = MAX_PAYLOAD):
        self.packet_id = packet_id
        self.max_payload = max_payload
        self.packet_seq = 0
        self.mpu_seq = 0

    def packetize_mpu(
        self, payload: bytes, timestamp_ms: int, payload_type: int = PT_MFU
    ) -> list[MmtpPacket]:
        if not payload:
            raise MmtpError("an MPU must carry at least one byte", "payload_length")
        chunks = [
            payload[i : i + self.max_payload]
            for i in range(0, len(payload), self.max_payload)
        ]
        packets = []
        for i, chunk in enumerate(chunks):
            if len(chunks) == 1:
                fi = FI_COMPLETE
            elif i == 0:
                fi = FI_FIRST
            elif i == len(chunks) - 1:
                fi = FI_LAST
            else:
                fi = FI_MIDDLE
            packets.append(
                MmtpPacket(
                    payload_type=payload_type,
                    packet_id=self.packet_id,
                    packet_seq=self.packet_seq,
                    timestamp_ms=timestamp_ms & 0xFFFFFFFF,
                    mpu_seq=self.mpu_seq,
                    frag_indicator=fi,
                    payload=chunk,
                )
            )
            self.packet_seq += 1
        self.mpu_seq += 1
        return packets


def mux(*packet_lists: Sequence[MmtpPacket]) -> list[MmtpPacket]:
    """Merge per-asset packet lists by timestamp; ties favor earlier lists
    (video first under the default asset ordering). Order within each list
    is preserved."""
    pointers = [0] * len(packet_lists)
    out: list[MmtpPacket] = []
    while True:
        best = -1
        for i, (lst, ptr) in enumerate(zip(packet_lists, pointers)):
            if ptr >= len(lst):
                continue
            if best < 0 or lst[ptr].timestamp_ms < packet_lists[best][pointers[best]].timestamp_ms:
                best = i
        if best < 0:
            return out
        out.append(packet_lists[best][pointers[best]])
        pointers[best] += 1


# ---------------------------------------------------------------------------
# depacketizer


@dataclass(frozen=True)
class Mpu:
    packet_id: int
    mpu_seq: int
    timestamp_ms: int
    payload_type: int
    payload: bytes


@dataclass
class _Group:
    newest_seq: int
    timestamp_ms: int = 0
    payload_type: int = PT_MFU
    fragments: dict[int, tuple[int, bytes]] = field(default_factory=dict)  # seq -> (fi, payload)

    def add(self, p: MmtpPacket) -> None:
        self.fragments[p.packet_seq] = (p.frag_indicator, p.payload)
        self.newest_seq = max(self.newest_seq, p.packet_seq)
        self.timestamp_ms = p.timestamp_ms
        self.payload_type = p.payload_type

    def assemble(self) -> bytes | None:
        seqs = sorted(self.fragments)
        fis = [self.fragments[s][0] for s in seqs]
        if fis == [FI_COMPLETE]:
            return self.fragments[seqs[0]][1]
        if len(seqs) < 2 or fis[0] != FI_FIRST or fis[-1] != FI_LAST:
            return None
        if seqs[-1] - seqs[0] + 1 != len(seqs):
            return None
        if any(fi != FI_MIDDLE for fi in fis[1:-1]):
            return None
        return b"".join(self.fragments[s][1] for s in seqs)


class Depacketizer:
    """Reassembles MPUs from possibly reordered packets.

    push() returns the MPUs completed by that packet. Groups that stall
    (no new fragment while the asset's sequence numbers advance a full
    reorder window past them) are recorded in ``losses``; close() expires
    everything still pending."""

    def __init__(self, reorder_window: int = 64):
        self.reorder_window = reorder_window
        self._groups: dict[tuple[int, int], _Group] = {}
        self._highest_seq: dict[int, int] = {}
        self.losses: list[tuple[int, int]] = []

    def push(self, data: bytes | MmtpPacket) -> list[Mpu]:
        p = parse_one(data) if isinstance(data, (bytes, bytearray)) else data
        key = (p.packet_id, p.mpu_seq)
        group = self._groups.get(key)
        if group is None:
            group = self._groups[key] = _Group(newest_seq=p.packet_seq)
        group.add(p)
        prev = self._highest_seq.get(p.packet_id, -1)
        self._highest_seq[p.packet_id] = max(prev, p.packet_seq)

        done: list[Mpu] = []
        payload = group.assemble()
        if payload is not None:
            done.append(
                Mpu(p.packet_id, p.mpu_seq, group.timestamp_ms, group.payload_type, payload)
            )
            del self._groups[key]
        self._expire(p.packet_id)
        return done

    def _expire(self, packet_id: int) -> None:
        horizon = self._highest_seq[packet_id]
        stale = [
            key
            for key, g in self._groups.items()
            if key[0] == packet_id and horizon - g.newest_seq >= self.reorder_window
        ]
        for key in stale:
            del self._groups[key]
            self.losses.append(key)

    def close(self) -> None:
        """Expire every group still incomplete."""
        for key in sorted(self._groups):
            self.losses.append(key)
        self._groups.clear()

    @property
    def pending(self) -> int:
        return len(self._groups)


# ---------------------------------------------------------------------------
# segment-level helpers


def packetize_segments(
    segments,
    config: PacketizerConfig = default_config(),
) -> list[MmtpPacket]:
    """Packetize a stream: per segment, one video MPU (full container bytes)
    and one audio MPU (raw PCM), muxed by timestamp with video first."""
    from .media import write_segment  # local import to keep layering one-way

    video_cfg = next(a for a in config.assets if a.source == "video")
    audio_cfg = next(a for a in config.assets if a.source == "audio")
    video = Packetizer(video_cfg.packet_id, config.max_payload)
    audio = Packetizer(audio_cfg.packet_id, config.max_payload)
    vpackets: list[MmtpPacket] = []
    apackets: list[MmtpPacket] = []
    for seg in segments:
        ts = seg.start_time_ms
        vpackets.extend(video.packetize_mpu(write_segment(seg), ts))
        apackets.extend(audio.packetize_mpu(seg.audio.samples.astype("<i2").tobytes(), ts))
    return mux(vpackets, apackets)
