"""Shot boundary detection over luma frame differences.

Each candidate position compares its frame difference against the trailing
window of previous differences: z = (d - mean) / max(std, floor), mapped to a
cut probability through a logistic centered 3 standard deviations above the
running mean. A difference with no history scores 0. Boundaries closer than
the minimum shot length to the previously accepted boundary are suppressed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .media import Frame, frame_abs_diff


@dataclass(frozen=True)
class ShotConfig:
    window: int = 12          # trailing differences forming the history
    z_offset: float = 3.0     # logistic midpoint, in standard deviations
    std_floor: float = 1e-6   # keeps z finite on constant history
    threshold: float = 0.5    # minimum cut probability for a boundary
    min_shot_frames: int = 8  # boundaries closer than this are suppressed

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.min_shot_frames < 1:
            raise ValueError("min_shot_frames must be >= 1")


@dataclass(frozen=True, order=True)
class Shot:
    """Frame interval [start_frame, end_frame], both inclusive."""

    start_frame: int
    end_frame: int

    def __post_init__(self):
        if self.start_frame < 0 or self.end_frame < self.start_frame:
            raise ValueError(f"invalid shot bounds [{self.start_frame}, {self.end_frame}]")

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame + 1


def frame_diffs(frames: Sequence[Frame]) -> np.ndarray:
    """d[i] = mean absolute luma difference between frames i and i+1."""
    return np.array(
        [frame_abs_diff(frames[i], frames[i + 1]) for i in range(len(frames) - 1)],
        dtype=np.float64,
    )


def cut_probabilities(diffs: Sequence[float], config: ShotConfig = ShotConfig()) -> np.ndarray:
    """Cut probability for each difference, given its trailing history.

    probs[i] refers to a potential boundary between frames i and i+1."""
    d = np.asarray(diffs, dtype=np.float64)
    n = d.size
    probs = np.zeros(n)
    if n == 0:
        return probs
    w = config.window
    for i in range(1, min(w, n)):
        hist = d[:i]
        sd = max(float(hist.std()), config.std_floor)
        z = (d[i] - float(hist.mean())) / sd
        probs[i] = float(expit(z - config.z_offset))
    if n > w:
        hists = sliding_window_view(d, w)[: n - w]  # history for positions w..n-1
        mu = hists.mean(axis=1)
        sd = np.maximum(hists.std(axis=1), config.std_floor)
        probs[w:] = expit((d[w:] - mu) / sd - config.z_offset)
    return probs


def shot_boundaries(probs: Sequence[float], config: ShotConfig = ShotConfig()) -> list[int]:
    """Frame indices that start a new shot, in increasing order."""
    bounds: list[int] = []
    last = 0
    for i, p in enumerate(probs):
        b = i + 1
        if p >= config.threshold and b - last >= config.min_shot_frames:
            bounds.append(b)
            last = b
    return bounds


def shots_from_boundaries(bounds: Sequence[int], frame_count: int) -> list[Shot]:
    edges = [0, *bounds, frame_count]
    return [Shot(a, b - 1) for a, b in zip(edges, edges[1:])]


def detect_shots(frames: Sequence[Frame], config: ShotConfig = ShotConfig()) -> list[Shot]:
    """Partition frames into shots; shots tile [0, len(frames)) exactly."""
    if not frames:
        return []
    probs = cut_probabilities(frame_diffs(frames), config)
    return shots_from_boundaries(shot_boundaries(probs, config), len(frames))
