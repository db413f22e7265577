/** Shared test helpers: hex codecs, golden-vector loading, a test-side
 * packetizer/LVS writer so the client's parsers face server-shaped bytes. */

import { readFileSync } from "node:fs";
import {
  FI_COMPLETE,
  FI_FIRST,
  FI_LAST,
  FI_MIDDLE,
  MAX_PAYLOAD,
  MmtpPacket,
  PT_MFU,
  packPacket,
} from "../src/protocol.js";

// the golden vectors live with the service test suite; both suites pin the
// same bytes so the two implementations stay wire-compatible
const VECTOR_DIR = new URL("../../tests/vectors/", import.meta.url);

export function hexToBytes(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}

export function concatBytes(...parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}

export function bytesEqual(a: Uint8Array, b: Uint8Array): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

export interface GoldenPacket {
  name: string;
  fields: {
    version: number;
    payload_type: number;
    packet_id: number;
    packet_seq: number;
    timestamp_ms: number;
    stored_timestamp_ms?: number;
    mpu_seq: number;
    frag_indicator: number;
  };
  header_parts: string[];
  payload_hex?: string;
  payload_repeat?: { byte: string; count: number };
}

export function loadMmtpVectors(): GoldenPacket[] {
  const raw = JSON.parse(
    readFileSync(new URL("mmtp_golden.json", VECTOR_DIR), "utf-8"),
  ) as { packets: GoldenPacket[] };
  return raw.packets;
}

export function loadLvsVector(): {
  fields: {
    width: number;
    height: number;
    fps: [number, number];
    frame_count: number;
    sample_rate: number;
    audio_sample_count: number;
    start_time_ms: number;
  };
  header_parts: string[];
  frame_pattern: string;
  audio_sample_hex_le: string;
} {
  const raw = JSON.parse(
    readFileSync(new URL("lvs_golden.json", VECTOR_DIR), "utf-8"),
  ) as { segment: ReturnType<typeof loadLvsVector> };
  return raw.segment;
}

export function vectorPayload(vec: GoldenPacket): Uint8Array {
  if (vec.payload_hex !== undefined) {
    return hexToBytes(vec.payload_hex);
  }
  const rep = vec.payload_repeat!;
  const out = new Uint8Array(rep.count);
  out.fill(parseInt(rep.byte, 16));
  return out;
}

export function vectorWire(vec: GoldenPacket): Uint8Array {
  return concatBytes(hexToBytes(vec.header_parts.join("")), vectorPayload(vec));
}

/** Fragment one MPU into wire packets exactly the way the server does. */
export function fragmentMpu(
  payload: Uint8Array,
  opts: {
    packetId: number;
    firstSeq: number;
    mpuSeq: number;
    timestampMs: number;
    maxPayload?: number;
    payloadType?: number;
  },
): Uint8Array[] {
  const maxPayload = opts.maxPayload ?? MAX_PAYLOAD;
  const chunks: Uint8Array[] = [];
  for (let at = 0; at < payload.length; at += maxPayload) {
    chunks.push(payload.subarray(at, at + maxPayload));
  }
  return chunks.map((chunk, i) => {
    let fi = FI_MIDDLE;
    if (chunks.length === 1) {
      fi = FI_COMPLETE;
    } else if (i === 0) {
      fi = FI_FIRST;
    } else if (i === chunks.length - 1) {
      fi = FI_LAST;
    }
    const packet: MmtpPacket = {
      version: 1,
      payloadType: opts.payloadType ?? PT_MFU,
      packetId: opts.packetId,
      packetSeq: opts.firstSeq + i,
      timestampMs: opts.timestampMs,
      mpuSeq: opts.mpuSeq,
      fragIndicator: fi,
      payload: chunk,
    };
    return packPacket(packet);
  });
}

/** Half-up rounding used by the container for frame-to-sample alignment. */
export function nominalSamples(
  frameCount: number,
  fpsNum: number,
  fpsDen: number,
  sampleRate: number,
): number {
  return Math.floor((2 * frameCount * sampleRate * fpsDen + fpsNum) / (2 * fpsNum));
}

/** Serialize an LVS segment (writer lives only in the test suite; the
 * client itself never produces container bytes). */
export function buildSegment(opts: {
  width: number;
  height: number;
  fpsNum: number;
  fpsDen: number;
  frames: Uint8Array[];
  sampleRate?: number;
  audio?: Int16Array;
  startTimeMs?: number;
}): Uint8Array {
  const sampleRate = opts.sampleRate ?? 16000;
  const audio =
    opts.audio ??
    new Int16Array(nominalSamples(opts.frames.length, opts.fpsNum, opts.fpsDen, sampleRate));
  const frameSize = opts.width * opts.height;
  const out = new Uint8Array(34 + opts.frames.length * frameSize + audio.length * 2);
  const view = new DataView(out.buffer);
  out.set(new TextEncoder().encode("LVS1"), 0);
  view.setUint8(4, 1);
  view.setUint8(5, 0);
  view.setUint16(6, opts.width, true);
  view.setUint16(8, opts.height, true);
  view.setUint16(10, opts.fpsNum, true);
  view.setUint16(12, opts.fpsDen, true);
  view.setUint32(14, opts.frames.length, true);
  view.setUint32(18, sampleRate, true);
  view.setUint32(22, audio.length, true);
  view.setBigUint64(26, BigInt(opts.startTimeMs ?? 0), true);
  let at = 34;
  for (const frame of opts.frames) {
    if (frame.length !== frameSize) {
      throw new Error(`frame has ${frame.length} bytes, expected ${frameSize}`);
    }
    out.set(frame, at);
    at += frameSize;
  }
  for (let i = 0; i < audio.length; i++) {
    view.setInt16(at + i * 2, audio[i], true);
  }
  return out;
}
