"""WebSocket transmission server for the packet multiplex.

Clients connect to ws://host:port/stream, register with a text frame
naming a job, and then receive the job's packet sequence as binary
frames, one packet per frame, in mux order.

Session rules:
- registration must arrive within 5 s or the connection is closed
  (RegistrationTimeout); a malformed registration or an unknown job id
  closes with MalformedRegistration
- the first binary frame is an asset-map metadata packet carrying the
  packetizer config JSON, so a client can map packet ids to assets
- VoD sessions start at stream start and send as fast as the socket
  drains; every VoD client of a job sees identical bytes because the
  packet sequence is re-derived deterministically from the stored stream
- live sessions start at the current live position; a packet departs no
  earlier than (timestamp_ms - send_ahead_ms) relative to the feed's
  wall-clock start, and a client whose queue backs up past the limit is
  disconnected (SlowConsumer)
- after the last packet the server sends {"type":"end"} and closes 1000
- a {"type":"stats_request"} text frame at any time is answered with
  {"type":"stats", "server_specs": ..., "processing_ms": ...}
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import AsyncIterator, Callable, Iterator, Sequence

from websockets.asyncio.server import ServerConnection, serve
from websockets.exceptions import ConnectionClosed

from .media import MANIFEST_NAME, Segment, iter_stream, write_segment
from .mmtp import (
    FI_COMPLETE,
    MAX_PAYLOAD,
    MmtpPacket,
    PT_METADATA,
    Packetizer,
    PacketizerConfig,
    default_config,
    mux,
    pack_packet,
)

CLOSE_MALFORMED = 4400
CLOSE_TIMEOUT = 4401
CLOSE_SLOW_CONSUMER = 4413

REGISTRATION_TIMEOUT_S = 5.0
QUEUE_LIMIT = 2048
SEND_AHEAD_MS = 2000

_END = None  # queue sentinel


def asset_map_packet(config: PacketizerConfig) -> bytes:
    """The session-opening metadata packet describing the asset map."""
    return pack_packet(
        MmtpPacket(
            payload_type=PT_METADATA,
            packet_id=0,
            packet_seq=0,
            timestamp_ms=0,
            mpu_seq=0,
            frag_indicator=FI_COMPLETE,
            payload=config.to_json().encode(),
        )
    )


def segment_packets(
    segments: Sequence[Segment] | Iterator[Segment],
    config: PacketizerConfig | None = None,
) -> Iterator[tuple[int, bytes]]:
    """(timestamp_ms, wire bytes) for a segment sequence, in mux order,
    with packet sequence numbers continuous across segments."""
    config = config or default_config()
    video_cfg, audio_cfg = config.assets
    vp = Packetizer(video_cfg.packet_id, config.max_payload)
    ap = Packetizer(audio_cfg.packet_id, config.max_payload)
    for seg in segments:
        ts = seg.start_time_ms
        vpk = vp.packetize_mpu(write_segment(seg), ts)
        apk = ap.packetize_mpu(seg.audio.samples.astype("<i2").tobytes(), ts)
        for p in mux(vpk, apk):
            yield ts, pack_packet(p)


async def paced_segments(
    stream_dir: Path | str, speed: float = 1.0
) -> AsyncIterator[Segment]:
    """Replay a stored stream at wall-clock rate: segment k becomes
    available once its own duration has elapsed, scaled by speed.

    A directory with no manifest is an empty feed and completes at once."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    if not (Path(stream_dir) / MANIFEST_NAME).is_file():
        return
    t0 = time.monotonic()
    elapsed_s = 0.0
    for seg in iter_stream(stream_dir):
        elapsed_s += seg.frame_count / float(seg.fps)
        delay = t0 + elapsed_s / speed - time.monotonic()
        if delay > 0:
            await asyncio.sleep(delay)
        yield seg


class LiveFeed:
    """Fan-out of a growing packet sequence to live sessions.

    Subscribers joining mid-feed start at the current position. A
    subscriber whose queue overflows is marked and dropped from fan-out;
    its session closes it as a slow consumer.
    """

    def __init__(self, queue_limit: int = QUEUE_LIMIT):
        self.queue_limit = queue_limit
        self.start_monotonic = time.monotonic()
        self.finished = False
        self._subs: list[_Subscriber] = []

    def subscribe(self) -> "_Subscriber":
        sub = _Subscriber(asyncio.Queue(self.queue_limit))
        if self.finished:
            sub.queue.put_nowait(_END)
        else:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: "_Subscriber") -> None:
        if sub in self._subs:
            self._subs.remove(sub)

    def publish(self, timestamp_ms: int, data: bytes) -> None:
        for sub in list(self._subs):
            try:
                sub.queue.put_nowait((timestamp_ms, data))
            except asyncio.QueueFull:
                sub.overflowed = True
                self._subs.remove(sub)

    def finish(self) -> None:
        self.finished = True
        for sub in list(self._subs):
            try:
                sub.queue.put_nowait(_END)
            except asyncio.QueueFull:
                sub.overflowed = True
            self._subs.remove(sub)


@dataclass
class _Subscriber:
    queue: asyncio.Queue
    overflowed: bool = False


@dataclass
class JobBinding:
    """Everything delivery needs to know about one streamable job."""

    job_id: str
    mode: str  # "vod" | "live_sim"
    packet_config: PacketizerConfig = field(default_factory=default_config)
    vod_stream_dir: Path | None = None
    live_feed: LiveFeed | None = None
    stats: Callable[[], dict] = lambda: {}


class DeliveryServer:
    def __init__(
        self,
        resolve: Callable[[str], JobBinding | None],
        host: str = "127.0.0.1",
        port: int = 0,
        registration_timeout_s: float = REGISTRATION_TIMEOUT_S,
        queue_limit: int = QUEUE_LIMIT,
        send_ahead_ms: int = SEND_AHEAD_MS,
    ):
        self.resolve = resolve
        self.host = host
        self.port = port
        self.registration_timeout_s = registration_timeout_s
        self.queue_limit = queue_limit
        self.send_ahead_ms = send_ahead_ms
        self._server = None

    async def start(self) -> None:
        self._server = await serve(self._handler, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    @property
    def ws_url(self) -> str:
        return f"ws://{self.host}:{self.port}/stream"

    async def __aenter__(self) -> "DeliveryServer":
        await self.start()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.stop()

    # -- session ------------------------------------------------------

    async def _handler(self, conn: ServerConnection) -> None:
        try:
            raw = await asyncio.wait_for(conn.recv(), self.registration_timeout_s)
        except asyncio.TimeoutError:
            await conn.close(CLOSE_TIMEOUT, "RegistrationTimeout")
            return
        except ConnectionClosed:
            return

        binding = self._parse_registration(raw)
        if binding is None:
            await conn.close(CLOSE_MALFORMED, "MalformedRegistration")
            return

        await conn.send(json.dumps({"type": "ack"}))
        reader = asyncio.create_task(self._reader(conn, binding))
        try:
            if binding.mode == "vod":
                await self._send_vod(conn, binding)
            else:
                await self._send_live(conn, binding)
        except ConnectionClosed:
            pass
        finally:
            reader.cancel()

    def _parse_registration(self, raw) -> JobBinding | None:
        if isinstance(raw, bytes):
            return None
        try:
            msg = json.loads(raw)
        except ValueError:
            return None
        if not isinstance(msg, dict) or msg.get("type") != "register":
            return None
        if not isinstance(msg.get("client_id"), str) or not isinstance(
            msg.get("job_id"), str
        ):
            return None
        return self.resolve(msg["job_id"])

    async def _reader(self, conn: ServerConnection, binding: JobBinding) -> None:
        """Answer stats requests while the sender pushes packets."""
        try:
            async for raw in conn:
                if isinstance(raw, bytes):
                    continue
                try:
                    msg = json.loads(raw)
                except ValueError:
                    continue
                if isinstance(msg, dict) and msg.get("type") == "stats_request":
                    await conn.send(json.dumps({"type": "stats", **binding.stats()}))
        except ConnectionClosed:
            pass

    async def _send_vod(self, conn: ServerConnection, binding: JobBinding) -> None:
        await conn.send(asset_map_packet(binding.packet_config))
        batches = segment_packets(
            iter_stream(binding.vod_stream_dir), binding.packet_config
        )
        sentinel = object()
        while True:
            item = await asyncio.to_thread(next, batches, sentinel)
            if item is sentinel:
                break
            await conn.send(item[1])
        await self._finish(conn)

    async def _send_live(self, conn: ServerConnection, binding: JobBinding) -> None:
        feed = binding.live_feed
        sub = feed.subscribe()
        try:
            await conn.send(asset_map_packet(binding.packet_config))
            while not sub.overflowed:
                item = await sub.queue.get()
                if item is _END:
                    await self._finish(conn)
                    return
                ts, data = item
                depart = feed.start_monotonic + (ts - self.send_ahead_ms) / 1000.0
                delay = depart - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                await conn.send(data)
        finally:
            feed.unsubscribe(sub)
        # a gap already exists for this session; drop it rather than resume
        await conn.close(CLOSE_SLOW_CONSUMER, "SlowConsumer")

    async def _finish(self, conn: ServerConnection) -> None:
        await conn.send(json.dumps({"type": "end"}))
        await conn.close(1000, "end")
