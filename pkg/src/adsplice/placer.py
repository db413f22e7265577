"""Ad placement: replace detected ad intervals with targeted ads and emit a
fresh uniform segmentation.

The source segments are flattened into one global timeline of frames plus
one PCM track. Each metadata interval is replaced in place: the replacement
ad is trimmed to the interval, and if it runs short its final frame is held
and its audio padded with silence, so the output always has exactly as many
frames and samples as the input. Audio cut points derive from frame indices
by the same half-up rounding used for timecodes, making video and audio
boundaries consistent to within one sample.

Replacing nothing is pure resegmentation: splice with empty metadata routes
through the same resegment path, so applying it twice is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .admeta import AdMetadata, AdPolicy, interval_metadata, merge_adjacent
from .media import (
    AudioBlock,
    Frame,
    MediaError,
    Segment,
    read_stream,
    sample_offset,
    timecode_ms,
    write_stream,
)

OUTPUT_ID_PREFIX = "out-"
AD_META_NAME = "meta.json"


class SpliceError(ValueError):
    pass


class UnknownAdUri(LookupError):
    def __init__(self, uri: str):
        super().__init__(f"ad uri not in repository: {uri!r}")
        self.uri = uri


@dataclass(frozen=True)
class AdAsset:
    uri: str
    category: str
    duration_ms: int
    segments: tuple[Segment, ...]


class AdRepository:
    """Ads stored as streams under content-addressed directories.

    <root>/<sha256(uri)[:16]>/ holds NNNNNN.lvs + stream.json + meta.json
    with the uri, category and duration.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)

    @staticmethod
    def key(uri: str) -> str:
        return hashlib.sha256(uri.encode()).hexdigest()[:16]

    def path_for(self, uri: str) -> Path:
        return self.root / self.key(uri)

    def has(self, uri: str) -> bool:
        return (self.path_for(uri) / AD_META_NAME).exists()

    def store(self, uri: str, category: str, segments: Sequence[Segment]) -> Path:
        segments = list(segments)
        directory = self.path_for(uri)
        write_stream(directory, segments)
        total = sum(s.frame_count for s in segments)
        meta = {
            "uri": uri,
            "category": category,
            "duration_ms": timecode_ms(total, segments[0].fps),
        }
        (directory / AD_META_NAME).write_text(json.dumps(meta, indent=2))
        return directory

    def load(self, uri: str) -> AdAsset:
        directory = self.path_for(uri)
        meta_path = directory / AD_META_NAME
        if not meta_path.exists():
            raise UnknownAdUri(uri)
        meta = json.loads(meta_path.read_text())
        return AdAsset(
            uri=meta["uri"],
            category=meta["category"],
            duration_ms=meta["duration_ms"],
            segments=tuple(read_stream(directory)),
        )

    def uris(self) -> list[str]:
        out = []
        for meta_path in sorted(self.root.glob(f"*/{AD_META_NAME}")):
            out.append(json.loads(meta_path.read_text())["uri"])
        return out


def _flatten(segments: Sequence[Segment]) -> tuple[tuple[Frame, ...], np.ndarray]:
    frames: list[Frame] = []
    audio = []
    for seg in segments:
        frames.extend(seg.frames)
        audio.append(seg.audio.samples)
    return tuple(frames), np.concatenate(audio)


def resegment(
    frames: Sequence[Frame],
    audio: np.ndarray,
    fps,
    sample_rate: int,
    segment_frames: int,
) -> list[Segment]:
    """Cut a global timeline into uniform segments of segment_frames frames
    (the final one takes the remainder), ids out-000000, out-000001, ...,
    each stamped with the timecode of its first frame."""
    n = len(frames)
    drift = len(audio) - sample_offset(n, fps, sample_rate)
    if abs(drift) > 1:
        raise SpliceError(
            f"audio drift of {drift} samples across {n} frames; "
            "stream audio does not track its frame boundaries"
        )
    out = []
    for k, start in enumerate(range(0, n, segment_frames)):
        stop = min(start + segment_frames, n)
        a0 = sample_offset(start, fps, sample_rate)
        a1 = len(audio) if stop == n else sample_offset(stop, fps, sample_rate)
        out.append(
            Segment(
                segment_id=f"{OUTPUT_ID_PREFIX}{k:06d}",
                fps=fps,
                frames=tuple(frames[start:stop]),
                audio=AudioBlock(sample_rate, audio[a0:a1]),
                start_time_ms=timecode_ms(start, fps),
            )
        )
    return out


def splice(
    source: Sequence[Segment],
    metadata: Sequence[AdMetadata],
    policy: AdPolicy,
    repo: AdRepository,
    segment_frames: int | None = None,
) -> list[Segment]:
    """Replace each metadata interval with its targeted ad and resegment.

    Output length always equals input length, in frames and in samples."""
    if not source:
        raise SpliceError("cannot splice an empty stream")
    fps = source[0].fps
    rate = source[0].audio.sample_rate
    width, height = source[0].width, source[0].height
    for seg in source:
        if (seg.fps, seg.width, seg.height, seg.audio.sample_rate) != (
            fps,
            width,
            height,
            rate,
        ):
            raise SpliceError("source segments disagree on fps, geometry or rate")

    frames, audio = _flatten(source)
    audio = audio.copy()
    n = len(frames)

    for m in merge_adjacent(metadata, fps):
        if m.end_frame >= n:
            raise SpliceError(
                f"interval [{m.start_frame}, {m.end_frame}] exceeds stream of {n} frames"
            )
        asset = repo.load(policy.resolve(m.category))
        ad_frames, ad_audio = _flatten(asset.segments)
        ad = asset.segments[0]
        if (ad.fps, ad.width, ad.height, ad.audio.sample_rate) != (
            fps,
            width,
            height,
            rate,
        ):
            raise SpliceError(
                f"ad {asset.uri!r} does not match stream fps, geometry or rate"
            )

        need = m.frame_count
        vid = ad_frames[:need]
        if len(vid) < need:
            vid = vid + (ad_frames[-1],) * (need - len(vid))

        a0 = sample_offset(m.start_frame, fps, rate)
        a1 = sample_offset(m.end_frame + 1, fps, rate)
        aud = ad_audio[: a1 - a0]
        if len(aud) < a1 - a0:
            aud = np.concatenate([aud, np.zeros(a1 - a0 - len(aud), dtype=np.int16)])

        frames = frames[: m.start_frame] + vid + frames[m.end_frame + 1 :]
        audio[a0:a1] = aud

    if segment_frames is None:
        segment_frames = source[0].frame_count
    return resegment(frames, audio, fps, rate, segment_frames)


def intervals_from_flags(
    segments: Sequence[Segment],
    flags: Sequence[bool],
    categories: Sequence[str | None],
) -> list[AdMetadata]:
    """Convert per-segment ad decisions into merged global frame intervals.

    Runs of consecutive ad segments become one interval whose category is
    the frame-weighted mode of the run, ties lexicographic."""
    if not (len(segments) == len(flags) == len(categories)):
        raise ValueError("segments, flags and categories must align")
    fps = segments[0].fps
    offsets = [0]
    for seg in segments:
        offsets.append(offsets[-1] + seg.frame_count)

    out: list[AdMetadata] = []
    i = 0
    while i < len(segments):
        if not flags[i]:
            i += 1
            continue
        j = i
        per_category: dict[str, int] = {}
        while j < len(segments) and flags[j]:
            cat = categories[j] or "unknown"
            per_category[cat] = per_category.get(cat, 0) + segments[j].frame_count
            j += 1
        top = max(per_category.values())
        category = min(c for c, k in per_category.items() if k == top)
        out.append(
            interval_metadata(offsets[i], offsets[j] - 1, category, fps)
        )
        i = j
    return out
