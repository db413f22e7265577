"""Logo detection by zero-normalized cross-correlation.

The correlation surface over all valid template placements is computed in
two exact halves: the numerator correlates the image against the zero-mean
template with an FFT, and the per-window variance terms in the denominator
come from int64 integral images, so windows that are exactly constant are
recognized exactly (N*S2 - S1^2 == 0) rather than through float rounding.
Constant windows score 0 by convention: a flat region carries no evidence
for or against the logo.

A segment is classified as an ad when the logo is absent from most of its
sampled frames: broadcasters overlay their station logo on program content
and drop it during commercial breaks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .media import DimensionMismatch, Segment


@dataclass(frozen=True)
class XcorrConfig:
    threshold: float = 0.7      # minimum peak score counting as logo present
    var_eps: float = 1e-9       # windows with variance below this score 0
    sample_stride: int = 15     # classify from every 15th frame
    presence_ratio: float = 0.5 # ad iff logo present on fewer than this share


@dataclass(frozen=True)
class Region:
    """Half-open placement rectangle: x0 <= x < x1, y0 <= y < y1."""

    x0: int
    y0: int
    x1: int
    y1: int


def top_right_quadrant(width: int, height: int) -> Region:
    """Placements whose top-left corner lies in the image's top-right quadrant."""
    return Region(width // 2, 0, width, (height + 1) // 2)


@dataclass(frozen=True)
class MatchResult:
    score: float
    x: int
    y: int


@dataclass(frozen=True)
class XcorrDecision:
    is_ad: bool
    presence_ratio: float
    samples: int
    hits: int


def _window_varsums(image: np.ndarray, h: int, w: int) -> np.ndarray:
    """N*S2 - S1^2 per placement window: exact in int64 for integer images
    (the luma domain), float64 sums otherwise."""
    dtype = np.int64 if np.issubdtype(image.dtype, np.integer) else np.float64
    s1 = np.zeros((image.shape[0] + 1, image.shape[1] + 1), dtype=dtype)
    s2 = np.zeros_like(s1)
    np.cumsum(np.cumsum(image, axis=0, dtype=dtype), axis=1, out=s1[1:, 1:])
    sq = image.astype(dtype) ** 2
    np.cumsum(np.cumsum(sq, axis=0), axis=1, out=s2[1:, 1:])

    def window_sums(ii: np.ndarray) -> np.ndarray:
        return ii[h:, w:] - ii[:-h, w:] - ii[h:, :-w] + ii[:-h, :-w]

    n = h * w
    return n * window_sums(s2) - window_sums(s1) ** 2


def ncc_map(image: np.ndarray, template: np.ndarray, var_eps: float = 1e-9) -> np.ndarray:
    """Zero-normalized cross-correlation score for every valid placement.

    Returns a float64 array of shape (H - h + 1, W - w + 1) with values in
    [-1, 1]; placements over constant windows, or any placement when the
    template is constant, score exactly 0.
    """
    if image.ndim != 2 or template.ndim != 2:
        raise DimensionMismatch("image and template must be 2-D")
    h, w = template.shape
    if h > image.shape[0] or w > image.shape[1]:
        raise DimensionMismatch(
            f"template {w}x{h} larger than image "
            f"{image.shape[1]}x{image.shape[0]}"
        )
    n = h * w
    t = template.astype(np.float64)
    t -= t.mean()
    numerator = fftconvolve(image.astype(np.float64), t[::-1, ::-1], mode="valid")

    varsum_i = _window_varsums(image, h, w)
    tdtype = np.int64 if np.issubdtype(template.dtype, np.integer) else np.float64
    tmpl_i = template.astype(tdtype)
    varsum_t = float(n * np.sum(tmpl_i**2) - np.sum(tmpl_i) ** 2)

    scores = np.zeros_like(numerator)
    # float cancellation can leave tiny negative varsums on near-constant
    # windows; those are degenerate anyway, so clip before the sqrt
    degenerate = varsum_i <= var_eps * n * n
    if varsum_t > var_eps * n * n:
        denom = np.sqrt(
            np.clip(varsum_i, 0, None).astype(np.float64) * varsum_t
        )
        np.divide(numerator * n, denom, out=scores, where=~degenerate)
        scores[degenerate] = 0.0
    return scores


def best_match(
    image: np.ndarray,
    template: np.ndarray,
    region: Region | None = None,
    var_eps: float = 1e-9,
) -> MatchResult:
    """Peak score and its placement within the search region.

    Ties resolve to the smallest (y, x) in row-major order. The region is
    clipped to valid placements; an empty intersection is an error.
    """
    scores = ncc_map(image, template, var_eps)
    if region is None:
        region = top_right_quadrant(image.shape[1], image.shape[0])
    x0 = max(region.x0, 0)
    y0 = max(region.y0, 0)
    x1 = min(region.x1, scores.shape[1])
    y1 = min(region.y1, scores.shape[0])
    if x0 >= x1 or y0 >= y1:
        raise ValueError(f"search region {region} admits no valid placements")
    sub = scores[y0:y1, x0:x1]
    flat = int(np.argmax(sub))
    dy, dx = divmod(flat, sub.shape[1])
    return MatchResult(float(sub[dy, dx]), x0 + dx, y0 + dy)


def logo_present(
    image: np.ndarray,
    template: np.ndarray,
    config: XcorrConfig = XcorrConfig(),
    region: Region | None = None,
) -> bool:
    return best_match(image, template, region, config.var_eps).score >= config.threshold


def classify_segment_xcorr(
    segment: Segment,
    template: np.ndarray,
    config: XcorrConfig = XcorrConfig(),
) -> XcorrDecision:
    """Ad decision for one segment: sample every Nth frame, test for the
    logo in the top-right quadrant, call it an ad when the hit ratio falls
    below the presence threshold."""
    region = top_right_quadrant(segment.width, segment.height)
    sampled = segment.frames[:: config.sample_stride]
    hits = sum(
        1
        for f in sampled
        if logo_present(f.pixels, template, config, region)
    )
    ratio = hits / len(sampled)
    return XcorrDecision(
        is_ad=ratio < config.presence_ratio,
        presence_ratio=ratio,
        samples=len(sampled),
        hits=hits,
    )
