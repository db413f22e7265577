/**
 * Player statistics model behind the stats panel.
 *
 * Two plotted counters, both in milliseconds of media time:
 * - playback elapsed: total duration painted so far, monotone non-decreasing
 * - buffered media: reconstructed but not yet played, never negative, and
 *   exactly 0 once a finished stream has drained
 *
 * Receiving and playing report the same per-frame durations in the same
 * order, so `buffered = received - played` cancels exactly at drain instead
 * of leaving float residue.
 */

export interface StatsSample {
  atMs: number; // sampling clock, caller-supplied
  playedMs: number;
  bufferedMs: number;
}

export class PlaybackStats {
  receivedMs = 0; // media duration reconstructed
  playedMs = 0; // media duration painted
  packets = 0;
  bytes = 0;
  malformedPackets = 0;
  lostMpus = 0;
  decodeErrors = 0;
  readonly history: StatsSample[] = [];

  get bufferedMs(): number {
    return this.receivedMs - this.playedMs;
  }

  onPacket(byteLength: number): void {
    this.packets += 1;
    this.bytes += byteLength;
  }

  onReceived(durationMs: number): void {
    if (durationMs < 0) {
      throw new RangeError("received duration must be >= 0");
    }
    this.receivedMs += durationMs;
  }

  /** Advance playback; clamped so played never outruns received. */
  onPlayed(durationMs: number): void {
    if (durationMs < 0) {
      throw new RangeError("played duration must be >= 0");
    }
    this.playedMs = Math.min(this.playedMs + durationMs, this.receivedMs);
  }

  /** Record one plot point at the caller's clock. */
  sample(atMs: number): StatsSample {
    const point = { atMs, playedMs: this.playedMs, bufferedMs: this.bufferedMs };
    this.history.push(point);
    return point;
  }
}
