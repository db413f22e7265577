"""Builders shared across the test suite."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from adsplice.media import AudioBlock, Frame, Segment, expected_samples

FPS30 = Fraction(30, 1)


def flat_frame(width: int, height: int, luma: int) -> Frame:
    return Frame(np.full((height, width), luma, dtype=np.uint8))


def noise_frame(rng: np.random.Generator, width: int, height: int) -> Frame:
    return Frame(rng.integers(0, 256, size=(height, width), dtype=np.uint8))


def silence(sample_count: int, sample_rate: int = 16000) -> AudioBlock:
    return AudioBlock(sample_rate, np.zeros(sample_count, dtype=np.int16))


def tone(freq_hz: float, sample_count: int, sample_rate: int = 16000,
         amplitude: int = 8000) -> AudioBlock:
    t = np.arange(sample_count) / sample_rate
    return AudioBlock(
        sample_rate,
        np.round(amplitude * np.sin(2 * np.pi * freq_hz * t)).astype(np.int16),
    )


def make_segment(
    frames,
    fps: Fraction = FPS30,
    sample_rate: int = 16000,
    segment_id: str = "seg",
    start_time_ms: int = 0,
    audio: AudioBlock | None = None,
) -> Segment:
    frames = tuple(frames)
    if audio is None:
        audio = silence(expected_samples(len(frames), fps, sample_rate), sample_rate)
    return Segment(
        segment_id=segment_id,
        fps=fps,
        frames=frames,
        audio=audio,
        start_time_ms=start_time_ms,
    )


def flat_segment(
    frame_count: int,
    luma: int,
    width: int = 32,
    height: int = 24,
    **kwargs,
) -> Segment:
    return make_segment(
        [flat_frame(width, height, luma) for _ in range(frame_count)], **kwargs
    )
