/**
 * Transport-agnostic playback session.
 *
 * The session consumes raw WebSocket messages via handleMessage(): text
 * frames are session control (ack / end / stats), binary frames are packets.
 * Packets run through the depacketizer; video MPUs decode to LVS frames on a
 * presentation-time queue. advance(dt) is the render tick: it paints every
 * frame due under a media clock that stalls on underrun instead of skipping.
 *
 * A malformed packet or an undecodable MPU is counted and skipped; the
 * session keeps playing.
 */

import { frameDurationMs, parseSegment } from "./lvs.js";
import {
  Depacketizer,
  Mpu,
  PT_METADATA,
  PacketizerConfig,
  parseAssetMap,
  parseOne,
} from "./protocol.js";
import { PlaybackStats } from "./stats.js";

export interface RenderSink {
  paintFrame(width: number, height: number, luma: Uint8Array): void;
  streamEnded(): void;
}

export interface DecodedFrame {
  ptsMs: number;
  durationMs: number;
  width: number;
  height: number;
  pixels: Uint8Array;
}

export type SessionState = "registering" | "streaming" | "ended";

export function registrationMessage(clientId: string, jobId: string): string {
  return JSON.stringify({ type: "register", client_id: clientId, job_id: jobId });
}

export const STATS_REQUEST = JSON.stringify({ type: "stats_request" });

export class PlayerSession {
  readonly stats = new PlaybackStats();
  readonly sink: RenderSink;
  state: SessionState = "registering";
  assetMap: PacketizerConfig | null = null;
  framesPainted = 0;
  /** Last {"type":"stats"} answer from the server, for the console. */
  serverStats: Record<string, unknown> | null = null;

  private depacketizer: Depacketizer;
  private queue: DecodedFrame[] = [];
  private credit = 0;

  constructor(sink: RenderSink, reorderWindow = 64) {
    this.sink = sink;
    this.depacketizer = new Depacketizer(reorderWindow);
  }

  get ended(): boolean {
    return this.state === "ended";
  }

  /** True once the stream ended and every buffered frame was painted. */
  get drained(): boolean {
    return this.ended && this.queue.length === 0;
  }

  get buffered(): number {
    return this.queue.length;
  }

  handleMessage(data: Uint8Array | string): void {
    if (typeof data === "string") {
      this.handleControl(data);
      return;
    }
    this.stats.onPacket(data.length);
    let mpus: Mpu[];
    try {
      mpus = this.depacketizer.push(parseOne(data));
    } catch {
      this.stats.malformedPackets += 1;
      return;
    }
    this.stats.lostMpus = this.depacketizer.losses.length;
    for (const mpu of mpus) {
      this.handleMpu(mpu);
    }
  }

  private handleControl(text: string): void {
    let msg: unknown;
    try {
      msg = JSON.parse(text);
    } catch {
      return;
    }
    if (typeof msg !== "object" || msg === null) {
      return;
    }
    const type = (msg as { type?: unknown }).type;
    if (type === "ack") {
      this.state = "streaming";
    } else if (type === "end") {
      this.state = "ended";
      this.depacketizer.close();
      this.stats.lostMpus = this.depacketizer.losses.length;
      this.sink.streamEnded();
    } else if (type === "stats") {
      this.serverStats = msg as Record<string, unknown>;
    }
  }

  private handleMpu(mpu: Mpu): void {
    if (mpu.payloadType === PT_METADATA) {
      try {
        this.assetMap = parseAssetMap(mpu.payload);
      } catch {
        this.stats.decodeErrors += 1;
      }
      return;
    }
    if (!this.isVideo(mpu.packetId)) {
      return; // audio is reassembled but not played; stats track video time
    }
    try {
      this.enqueueSegment(mpu.payload);
    } catch {
      this.stats.decodeErrors += 1;
    }
  }

  private isVideo(packetId: number): boolean {
    if (this.assetMap === null) {
      return true; // no asset map yet: probe; a PCM payload fails LVS decode
    }
    const asset = this.assetMap.assets.find((a) => a.packet_id === packetId);
    return asset !== undefined && asset.source === "video";
  }

  private enqueueSegment(payload: Uint8Array): void {
    const seg = parseSegment(payload);
    const dur = frameDurationMs(seg);
    const frames: DecodedFrame[] = seg.frames.map((pixels, i) => ({
      ptsMs: seg.startTimeMs + i * dur,
      durationMs: dur,
      width: seg.width,
      height: seg.height,
      pixels,
    }));
    const last = this.queue[this.queue.length - 1];
    if (last !== undefined && frames[0].ptsMs < last.ptsMs) {
      // late MPU completed out of order: splice by presentation time
      let at = this.queue.findIndex((f) => f.ptsMs > frames[0].ptsMs);
      at = at < 0 ? this.queue.length : at;
      this.queue.splice(at, 0, ...frames);
    } else {
      this.queue.push(...frames);
    }
    for (const f of frames) {
      this.stats.onReceived(f.durationMs);
    }
  }

  /**
   * Render tick: advance the playback clock by dtMs and paint every frame
   * that came due. The clock is a media clock: it stalls while the queue is
   * empty (no credit banks up across an underrun) so late media resumes at
   * normal speed instead of being skipped.
   */
  advance(dtMs: number): number {
    if (this.queue.length === 0) {
      this.credit = 0;
      return 0;
    }
    this.credit += dtMs;
    let painted = 0;
    while (this.queue.length > 0 && this.credit >= this.queue[0].durationMs) {
      const frame = this.queue.shift()!;
      this.credit -= frame.durationMs;
      this.sink.paintFrame(frame.width, frame.height, frame.pixels);
      this.stats.onPlayed(frame.durationMs);
      this.framesPainted += 1;
      painted += 1;
    }
    if (this.queue.length === 0) {
      this.credit = 0;
    }
    return painted;
  }
}
