/**
 * Packet transport: the client half of the MMT-inspired wire format.
 *
 * Every packet starts with a 19-octet big-endian header:
 *
 *     offset size field
 *     0      1    version (= 1)
 *     1      1    payload_type: 0 = asset-map metadata, 1 = media fragment
 *     2      2    packet_id (one value per asset)
 *     4      4    packet_sequence_number (per packet_id, from 0)
 *     8      4    timestamp_ms (u64 presentation time truncated to u32)
 *     12     4    mpu_sequence_number (per packet_id, from 0)
 *     16     1    flags: bits 7-6 fragmentation indicator, bits 5-0 reserved 0
 *     17     2    payload_length
 *     19     -    payload
 *
 * The depacketizer mirrors the server's contract: reordering is tolerated
 * inside a 64-packet window per packet_id, and an incomplete MPU becomes a
 * loss once the asset's sequence numbers run a full window past its newest
 * fragment. An MPU still receiving fragments never expires.
 */

export const MMTP_VERSION = 1;
export const HEADER_SIZE = 19;
export const MAX_PAYLOAD = 1400;

export const PT_METADATA = 0;
export const PT_MFU = 1;

export const FI_COMPLETE = 0;
export const FI_FIRST = 1;
export const FI_MIDDLE = 2;
export const FI_LAST = 3;

export class MmtpError extends Error {
  readonly field: string | null;

  constructor(message: string, field: string | null = null) {
    super(message);
    this.name = "MmtpError";
    this.field = field;
  }
}

export interface MmtpPacket {
  version: number;
  payloadType: number;
  packetId: number;
  packetSeq: number;
  timestampMs: number;
  mpuSeq: number;
  fragIndicator: number;
  payload: Uint8Array;
}

export function packPacket(p: MmtpPacket): Uint8Array {
  if (p.fragIndicator < 0 || p.fragIndicator > 3) {
    throw new MmtpError(`fragmentation indicator ${p.fragIndicator} out of range`, "flags");
  }
  if (p.payload.length > 0xffff) {
    throw new MmtpError(`payload of ${p.payload.length} bytes exceeds u16`, "payload_length");
  }
  const out = new Uint8Array(HEADER_SIZE + p.payload.length);
  const view = new DataView(out.buffer);
  view.setUint8(0, p.version);
  view.setUint8(1, p.payloadType);
  view.setUint16(2, p.packetId, false);
  view.setUint32(4, p.packetSeq, false);
  // the wire carries u32 timestamps; wider inputs wrap on pack
  view.setUint32(8, p.timestampMs % 0x100000000, false);
  view.setUint32(12, p.mpuSeq, false);
  view.setUint8(16, p.fragIndicator << 6);
  view.setUint16(17, p.payload.length, false);
  out.set(p.payload, HEADER_SIZE);
  return out;
}

/** Parse one packet starting at offset; returns it and the next offset. */
export function parsePacket(data: Uint8Array, offset = 0): [MmtpPacket, number] {
  if (data.length - offset < HEADER_SIZE) {
    throw new MmtpError(
      `need ${HEADER_SIZE} header octets, have ${data.length - offset}`,
      "header",
    );
  }
  const view = new DataView(data.buffer, data.byteOffset + offset, HEADER_SIZE);
  const version = view.getUint8(0);
  const payloadType = view.getUint8(1);
  const packetId = view.getUint16(2, false);
  const packetSeq = view.getUint32(4, false);
  const timestampMs = view.getUint32(8, false);
  const mpuSeq = view.getUint32(12, false);
  const flags = view.getUint8(16);
  const payloadLength = view.getUint16(17, false);
  if (version !== MMTP_VERSION) {
    throw new MmtpError(`unsupported version ${version}`, "version");
  }
  if (payloadType !== PT_METADATA && payloadType !== PT_MFU) {
    throw new MmtpError(`unknown payload type ${payloadType}`, "payload_type");
  }
  if ((flags & 0x3f) !== 0) {
    throw new MmtpError(`reserved flag bits set: 0x${flags.toString(16)}`, "flags");
  }
  const start = offset + HEADER_SIZE;
  if (data.length - start < payloadLength) {
    throw new MmtpError(`payload truncated: need ${payloadLength} bytes`, "payload_length");
  }
  return [
    {
      version,
      payloadType,
      packetId,
      packetSeq,
      timestampMs,
      mpuSeq,
      fragIndicator: flags >> 6,
      payload: data.slice(start, start + payloadLength),
    },
    start + payloadLength,
  ];
}

/** Parse a message that must contain exactly one packet. */
export function parseOne(data: Uint8Array): MmtpPacket {
  const [packet, end] = parsePacket(data);
  if (end !== data.length) {
    throw new MmtpError(`${data.length - end} trailing bytes after packet`, "payload_length");
  }
  return packet;
}

// ---------------------------------------------------------------------------
// asset map (session-opening metadata payload)

export interface AssetConfig {
  asset_id: string;
  packet_id: number;
  source: string; // "video" or "audio"
}

export interface PacketizerConfig {
  assets: AssetConfig[];
  max_payload: number;
}

export function parseAssetMap(payload: Uint8Array): PacketizerConfig {
  let raw: unknown;
  try {
    raw = JSON.parse(new TextDecoder().decode(payload));
  } catch {
    throw new MmtpError("asset map payload is not valid JSON", "payload");
  }
  const obj = raw as { assets?: unknown; max_payload?: unknown };
  if (typeof raw !== "object" || raw === null || !Array.isArray(obj.assets)) {
    throw new MmtpError("asset map must list assets", "assets");
  }
  const assets = obj.assets.map((a: unknown) => {
    const entry = a as Record<string, unknown>;
    if (
      typeof entry.asset_id !== "string" ||
      typeof entry.packet_id !== "number" ||
      typeof entry.source !== "string"
    ) {
      throw new MmtpError("malformed asset entry", "assets");
    }
    return { asset_id: entry.asset_id, packet_id: entry.packet_id, source: entry.source };
  });
  const maxPayload = typeof obj.max_payload === "number" ? obj.max_payload : MAX_PAYLOAD;
  return { assets, max_payload: maxPayload };
}

// ---------------------------------------------------------------------------
// depacketizer

export interface Mpu {
  packetId: number;
  mpuSeq: number;
  timestampMs: number;
  payloadType: number;
  payload: Uint8Array;
}

interface Group {
  newestSeq: number;
  timestampMs: number;
  payloadType: number;
  fragments: Map<number, [number, Uint8Array]>; // seq -> (fi, payload)
}

function assemble(group: Group): Uint8Array | null {
  const seqs = [...group.fragments.keys()].sort((a, b) => a - b);
  const fis = seqs.map((s) => group.fragments.get(s)![0]);
  if (fis.length === 1 && fis[0] === FI_COMPLETE) {
    return group.fragments.get(seqs[0])![1];
  }
  if (seqs.length < 2 || fis[0] !== FI_FIRST || fis[fis.length - 1] !== FI_LAST) {
    return null;
  }
  if (seqs[seqs.length - 1] - seqs[0] + 1 !== seqs.length) {
    return null;
  }
  if (fis.slice(1, -1).some((fi) => fi !== FI_MIDDLE)) {
    return null;
  }
  const parts = seqs.map((s) => group.fragments.get(s)![1]);
  const total = parts.reduce((n, part) => n + part.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}

/**
 * Reassembles MPUs from possibly reordered packets.
 *
 * push() returns the MPUs completed by that packet. Groups that stall (no
 * new fragment while the asset's sequence numbers advance a full reorder
 * window past them) are recorded in `losses`; close() expires everything
 * still pending.
 */
export class Depacketizer {
  readonly reorderWindow: number;
  readonly losses: Array<[number, number]> = []; // (packet_id, mpu_seq)
  private groups = new Map<string, Group>();
  private highestSeq = new Map<number, number>();

  constructor(reorderWindow = 64) {
    this.reorderWindow = reorderWindow;
  }

  push(data: Uint8Array | MmtpPacket): Mpu[] {
    const p = data instanceof Uint8Array ? parseOne(data) : data;
    const key = `${p.packetId}:${p.mpuSeq}`;
    let group = this.groups.get(key);
    if (group === undefined) {
      group = {
        newestSeq: p.packetSeq,
        timestampMs: p.timestampMs,
        payloadType: p.payloadType,
        fragments: new Map(),
      };
      this.groups.set(key, group);
    }
    group.fragments.set(p.packetSeq, [p.fragIndicator, p.payload]);
    group.newestSeq = Math.max(group.newestSeq, p.packetSeq);
    group.timestampMs = p.timestampMs;
    group.payloadType = p.payloadType;
    const prev = this.highestSeq.get(p.packetId) ?? -1;
    this.highestSeq.set(p.packetId, Math.max(prev, p.packetSeq));

    const done: Mpu[] = [];
    const payload = assemble(group);
    if (payload !== null) {
      done.push({
        packetId: p.packetId,
        mpuSeq: p.mpuSeq,
        timestampMs: group.timestampMs,
        payloadType: group.payloadType,
        payload,
      });
      this.groups.delete(key);
    }
    this.expire(p.packetId);
    return done;
  }

  private expire(packetId: number): void {
    const horizon = this.highestSeq.get(packetId)!;
    for (const [key, group] of [...this.groups]) {
      const [pid, mpuSeq] = key.split(":").map(Number);
      if (pid === packetId && horizon - group.newestSeq >= this.reorderWindow) {
        this.groups.delete(key);
        this.losses.push([pid, mpuSeq]);
      }
    }
  }

  /** Expire every group still incomplete. */
  close(): void {
    const keys = [...this.groups.keys()]
      .map((key) => key.split(":").map(Number) as [number, number])
      .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
    this.losses.push(...keys);
    this.groups.clear();
  }

  get pending(): number {
    return this.groups.size;
  }
}
