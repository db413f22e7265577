/**
 * Reader for the LVS (linear video segment) container: uncompressed 8-bit
 * luma frames plus s16le PCM, the payload of every video MPU.
 *
 * Layout, little-endian:
 *
 *     offset  size  field
 *     0       4     magic "LVS1"
 *     4       1     version (= 1)
 *     5       1     reserved (= 0)
 *     6       2     width (u16)
 *     8       2     height (u16)
 *     10      2     fps_num (u16)
 *     12      2     fps_den (u16)
 *     14      4     frame_count (u32)
 *     18      4     sample_rate (u32)
 *     22      4     audio_sample_count (u32)
 *     26      8     start_time_ms (u64)
 *     34      -     frame_count * width * height luma bytes
 *     ...     -     audio_sample_count * 2 bytes PCM s16le
 */

export const LVS_MAGIC = "LVS1";
export const LVS_VERSION = 1;
export const LVS_HEADER_SIZE = 34;
export const ALLOWED_SAMPLE_RATES = [16000, 44100, 48000];
export const MIN_FRAME_DIM = 8;

export class LvsError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "LvsError";
  }
}

export interface LvsSegment {
  width: number;
  height: number;
  fpsNum: number;
  fpsDen: number;
  frameCount: number;
  sampleRate: number;
  startTimeMs: number;
  frames: Uint8Array[]; // each width*height luma bytes, row-major
  audio: Int16Array;
}

/** Exact per-frame duration in (possibly fractional) milliseconds. */
export function frameDurationMs(seg: Pick<LvsSegment, "fpsNum" | "fpsDen">): number {
  return (1000 * seg.fpsDen) / seg.fpsNum;
}

export function segmentDurationMs(seg: LvsSegment): number {
  return seg.frameCount * frameDurationMs(seg);
}

export function parseSegment(data: Uint8Array): LvsSegment {
  if (data.length < LVS_HEADER_SIZE) {
    throw new LvsError(`need ${LVS_HEADER_SIZE} header bytes, have ${data.length}`);
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const magic = new TextDecoder().decode(data.subarray(0, 4));
  if (magic !== LVS_MAGIC) {
    throw new LvsError(`bad magic at offset 0: ${magic}`);
  }
  const version = view.getUint8(4);
  if (version !== LVS_VERSION) {
    throw new LvsError(`unsupported version ${version}`);
  }
  if (view.getUint8(5) !== 0) {
    throw new LvsError("reserved byte must be 0");
  }
  const width = view.getUint16(6, true);
  const height = view.getUint16(8, true);
  const fpsNum = view.getUint16(10, true);
  const fpsDen = view.getUint16(12, true);
  const frameCount = view.getUint32(14, true);
  const sampleRate = view.getUint32(18, true);
  const audioSampleCount = view.getUint32(22, true);
  const startTimeMs = Number(view.getBigUint64(26, true));
  if (width < MIN_FRAME_DIM || height < MIN_FRAME_DIM) {
    throw new LvsError(`frame dimensions ${width}x${height} below minimum ${MIN_FRAME_DIM}`);
  }
  if (fpsNum === 0 || fpsDen === 0) {
    throw new LvsError(`fps ${fpsNum}/${fpsDen} out of range`);
  }
  if (frameCount === 0) {
    throw new LvsError("frame_count must be >= 1");
  }
  if (!ALLOWED_SAMPLE_RATES.includes(sampleRate)) {
    throw new LvsError(`sample_rate ${sampleRate} not in ${ALLOWED_SAMPLE_RATES}`);
  }

  const frameSize = width * height;
  const framesEnd = LVS_HEADER_SIZE + frameCount * frameSize;
  const audioEnd = framesEnd + audioSampleCount * 2;
  if (data.length < audioEnd) {
    throw new LvsError(`payload truncated: need ${audioEnd} bytes, have ${data.length}`);
  }
  if (data.length > audioEnd) {
    throw new LvsError(`${data.length - audioEnd} trailing bytes after segment`);
  }

  const frames: Uint8Array[] = [];
  for (let i = 0; i < frameCount; i++) {
    const at = LVS_HEADER_SIZE + i * frameSize;
    frames.push(data.slice(at, at + frameSize));
  }
  // explicit little-endian reads: a typed-array view would inherit platform
  // endianness and may land on an odd byte offset
  const audio = new Int16Array(audioSampleCount);
  for (let i = 0; i < audioSampleCount; i++) {
    audio[i] = view.getInt16(framesEnd + i * 2, true);
  }
  return {
    width,
    height,
    fpsNum,
    fpsDen,
    frameCount,
    sampleRate,
    startTimeMs,
    frames,
    audio,
  };
}
