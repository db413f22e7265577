/** Stats panel invariants: playback elapsed monotone, buffered media never
 * negative, exact drain at end of stream. */

import { describe, expect, it } from "vitest";
import { PlaybackStats } from "../src/stats.js";

describe("counters", () => {
  it("starts at zero on a fresh session", () => {
    const stats = new PlaybackStats();
    expect(stats.playedMs).toBe(0);
    expect(stats.bufferedMs).toBe(0);
    expect(stats.receivedMs).toBe(0);
    expect(stats.packets).toBe(0);
  });

  it("buffered strictly increases while receiving with playback paused", () => {
    const stats = new PlaybackStats();
    let previous = stats.bufferedMs;
    for (let i = 0; i < 10; i++) {
      stats.onReceived(100);
      expect(stats.bufferedMs).toBeGreaterThan(previous);
      previous = stats.bufferedMs;
      expect(stats.playedMs).toBe(0);
    }
  });

  it("clamps playback to the received duration", () => {
    const stats = new PlaybackStats();
    stats.onReceived(250);
    stats.onPlayed(1000);
    expect(stats.playedMs).toBe(250);
    expect(stats.bufferedMs).toBe(0);
  });

  it("drains to exactly 0 when played durations mirror received ones", () => {
    const stats = new PlaybackStats();
    const dur = 1000 / 30; // not representable exactly in binary
    for (let i = 0; i < 300; i++) {
      stats.onReceived(dur);
    }
    for (let i = 0; i < 300; i++) {
      stats.onPlayed(dur);
    }
    expect(stats.bufferedMs).toBe(0);
  });

  it("rejects negative durations", () => {
    const stats = new PlaybackStats();
    expect(() => stats.onReceived(-1)).toThrow(RangeError);
    expect(() => stats.onPlayed(-1)).toThrow(RangeError);
  });
});

describe("invariants under random interleavings", () => {
  it("playback elapsed is monotone and buffered never negative", () => {
    // deterministic LCG so a failure replays
    let state = 20260814;
    const rand = () => {
      state = (state * 1103515245 + 12345) % 2147483648;
      return state / 2147483648;
    };
    const stats = new PlaybackStats();
    let lastPlayed = 0;
    for (let i = 0; i < 5000; i++) {
      const dt = rand() * 40;
      if (rand() < 0.5) {
        stats.onReceived(dt);
      } else {
        stats.onPlayed(dt);
      }
      expect(stats.playedMs).toBeGreaterThanOrEqual(lastPlayed);
      expect(stats.bufferedMs).toBeGreaterThanOrEqual(0);
      lastPlayed = stats.playedMs;
    }
  });
});

describe("history", () => {
  it("records plot points at the caller's clock", () => {
    const stats = new PlaybackStats();
    stats.onReceived(500);
    stats.sample(16);
    stats.onPlayed(100);
    stats.sample(32);
    expect(stats.history).toEqual([
      { atMs: 16, playedMs: 0, bufferedMs: 500 },
      { atMs: 32, playedMs: 100, bufferedMs: 400 },
    ]);
  });
});
