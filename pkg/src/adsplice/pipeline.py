"""Detection-and-replacement pipeline.

Chains the pieces: segment classification (either engine), interval
derivation, ad splicing, and artifact IO. Two consumption styles:

- offline (VoD): the whole stream is classified, intervals are derived
  across segment boundaries, and the ad placer rewrites the stream in one
  pass (`process_stream` / `process_corpus`)
- live: segments arrive one at a time; each is classified on arrival and,
  when flagged, its content is replaced in place while the run of flagged
  segments advances through one ad asset (`LiveSplicer`)
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .admeta import AdMetadata, AdPolicy
from .corpus import (
    ADS_DIR,
    LOGO_NAME,
    POLICY_NAME,
    STREAM_DIR,
    TruthEntry,
    load_truth,
    truth_segment_flags,
)
from .features import (
    NON_AD_LABEL,
    LogisticModel,
    TrainConfig,
    classify_segment_features,
    fit_detector,
    shot_features,
)
from .media import (
    AudioBlock,
    Frame,
    Segment,
    read_pgm,
    read_stream,
    write_stream,
)
from .placer import AdRepository, intervals_from_flags, splice
from .shots import ShotConfig, detect_shots
from .xcorr import XcorrConfig, classify_segment_xcorr

ENGINE_XCORR = "xcorr"
ENGINE_FEATURES = "features"
ENGINES = (ENGINE_XCORR, ENGINE_FEATURES)

OUTPUT_STREAM_DIR = "stream"
METADATA_NAME = "metadata.json"
MODEL_NAME = "model.json"


class PipelineError(RuntimeError):
    pass


class MissingArtifact(PipelineError):
    """An engine prerequisite (logo image or trained model) was not given."""


@dataclass(frozen=True)
class PipelineConfig:
    engine: str = ENGINE_XCORR
    shots: ShotConfig = field(default_factory=ShotConfig)
    xcorr: XcorrConfig = field(default_factory=XcorrConfig)
    segment_frames: int | None = None  # output segment length, default source

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise PipelineError(f"unknown engine {self.engine!r}")


@dataclass(frozen=True)
class SegmentDecision:
    segment_id: str
    is_ad: bool
    category: str | None


def classify_segment(
    segment: Segment,
    config: PipelineConfig,
    logo: np.ndarray | None = None,
    model: LogisticModel | None = None,
) -> SegmentDecision:
    if config.engine == ENGINE_XCORR:
        if logo is None:
            raise MissingArtifact("xcorr engine needs a logo template")
        d = classify_segment_xcorr(segment, logo, config.xcorr)
        return SegmentDecision(segment.segment_id, d.is_ad, None)
    if model is None:
        raise MissingArtifact("features engine needs a trained model")
    d = classify_segment_features(segment, model, config.shots)
    return SegmentDecision(segment.segment_id, d.is_ad, d.category)


def classify_stream(
    segments: Sequence[Segment],
    config: PipelineConfig,
    logo: np.ndarray | None = None,
    model: LogisticModel | None = None,
) -> list[SegmentDecision]:
    return [classify_segment(s, config, logo, model) for s in segments]


def detect_intervals(
    segments: Sequence[Segment], decisions: Sequence[SegmentDecision]
) -> list[AdMetadata]:
    return intervals_from_flags(
        segments,
        [d.is_ad for d in decisions],
        [d.category for d in decisions],
    )


# ---------------------------------------------------------------------------
# model IO and training


def save_model(model: LogisticModel, path: Path | str) -> None:
    Path(path).write_text(model.to_json())


def load_model(path: Path | str) -> LogisticModel:
    return LogisticModel.from_json(Path(path).read_text())


def shot_label(
    global_start: int, global_end: int, truth: Sequence[TruthEntry]
) -> str:
    """Ground-truth label for a shot: the truth category covering a strict
    majority of its frames, else the non-ad label."""
    n = global_end - global_start + 1
    best_cat, best_cover = NON_AD_LABEL, 0
    for t in truth:
        cover = min(global_end, t.end_frame) - max(global_start, t.start_frame) + 1
        if cover > best_cover:
            best_cat, best_cover = t.category, cover
    return best_cat if 2 * best_cover > n else NON_AD_LABEL


def shot_training_set(
    segments: Sequence[Segment],
    truth: Sequence[TruthEntry],
    shot_config: ShotConfig = ShotConfig(),
) -> tuple[np.ndarray, list[str]]:
    """Shot-level feature matrix and truth labels for a labeled stream."""
    rows: list[np.ndarray] = []
    labels: list[str] = []
    offset = 0
    for seg in segments:
        for shot in detect_shots(seg.frames, shot_config):
            rows.append(shot_features(seg, shot))
            labels.append(
                shot_label(offset + shot.start_frame, offset + shot.end_frame, truth)
            )
        offset += seg.frame_count
    return np.stack(rows), labels


def train_on_corpus(
    corpus_dir: Path | str,
    config: TrainConfig = TrainConfig(),
    k_max: int = 10,
    shot_config: ShotConfig = ShotConfig(),
) -> LogisticModel:
    corpus_dir = Path(corpus_dir)
    segments = read_stream(corpus_dir / STREAM_DIR)
    truth = load_truth(corpus_dir)
    X, y = shot_training_set(segments, truth, shot_config)
    return fit_detector(X, y, config, k_max=k_max)


# ---------------------------------------------------------------------------
# offline (VoD) processing


@dataclass(frozen=True)
class ProcessResult:
    out_dir: Path
    stream_dir: Path
    metadata_path: Path
    decisions: tuple[SegmentDecision, ...]
    intervals: tuple[AdMetadata, ...]
    segments_out: int
    processing_ms: int


def process_stream(
    segments: Sequence[Segment],
    out_dir: Path | str,
    repo: AdRepository,
    policy: AdPolicy,
    config: PipelineConfig = PipelineConfig(),
    logo: np.ndarray | None = None,
    model: LogisticModel | None = None,
) -> ProcessResult:
    """Classify, derive intervals, splice, and write the output stream and
    its ad metadata under out_dir."""
    if not segments:
        raise PipelineError("empty input stream")
    out_dir = Path(out_dir)
    t0 = time.perf_counter()
    decisions = classify_stream(segments, config, logo, model)
    intervals = detect_intervals(segments, decisions)
    out_segments = splice(
        segments, intervals, policy, repo, segment_frames=config.segment_frames
    )
    processing_ms = max(1, round((time.perf_counter() - t0) * 1000))

    out_dir.mkdir(parents=True, exist_ok=True)
    write_stream(out_dir / OUTPUT_STREAM_DIR, out_segments)
    metadata_path = out_dir / METADATA_NAME
    metadata_path.write_text(
        json.dumps([m.to_dict() for m in intervals], indent=2)
    )
    return ProcessResult(
        out_dir=out_dir,
        stream_dir=out_dir / OUTPUT_STREAM_DIR,
        metadata_path=metadata_path,
        decisions=tuple(decisions),
        intervals=tuple(intervals),
        segments_out=len(out_segments),
        processing_ms=processing_ms,
    )


def corpus_artifacts(
    corpus_dir: Path | str,
) -> tuple[np.ndarray, AdRepository, AdPolicy]:
    """Logo, ad repository and policy from a corpus directory layout."""
    corpus_dir = Path(corpus_dir)
    logo = read_pgm(corpus_dir / LOGO_NAME)
    repo = AdRepository(corpus_dir / ADS_DIR)
    policy = AdPolicy.load(corpus_dir / POLICY_NAME)
    return logo, repo, policy


def process_corpus(
    corpus_dir: Path | str,
    out_dir: Path | str,
    config: PipelineConfig = PipelineConfig(),
    model_path: Path | str | None = None,
) -> ProcessResult:
    """process_stream with every artifact resolved from the corpus layout."""
    corpus_dir = Path(corpus_dir)
    logo, repo, policy = corpus_artifacts(corpus_dir)
    model = None
    if config.engine == ENGINE_FEATURES:
        if model_path is None:
            model_path = corpus_dir / MODEL_NAME
        if not Path(model_path).is_file():
            raise MissingArtifact(f"no trained model at {model_path}")
        model = load_model(model_path)
    segments = read_stream(corpus_dir / STREAM_DIR)
    return process_stream(
        segments, out_dir, repo, policy, config, logo=logo, model=model
    )


# ---------------------------------------------------------------------------
# engine comparison


@dataclass(frozen=True)
class EngineBench:
    """One comparison row: per-segment mean wall time and truth accuracy."""

    engine: str
    mean_ms: float
    accuracy: float


def bench_engines(
    corpus_dir: Path | str,
    model: LogisticModel,
    logo: np.ndarray | None = None,
) -> list[EngineBench]:
    """Run both engines over a labeled corpus, one row per engine."""
    corpus_dir = Path(corpus_dir)
    if logo is None:
        logo = read_pgm(corpus_dir / LOGO_NAME)
    segments = read_stream(corpus_dir / STREAM_DIR)
    truth = load_truth(corpus_dir)
    total = sum(s.frame_count for s in segments)
    flags, _ = truth_segment_flags(truth, total, segments[0].frame_count)

    rows = []
    for engine in ENGINES:
        config = PipelineConfig(engine=engine)
        times = []
        got = []
        for seg in segments:
            t0 = time.perf_counter()
            d = classify_segment(seg, config, logo=logo, model=model)
            times.append((time.perf_counter() - t0) * 1000.0)
            got.append(d.is_ad)
        accuracy = sum(a == b for a, b in zip(got, flags)) / len(flags)
        rows.append(EngineBench(engine, float(np.mean(times)), accuracy))
    return rows


# ---------------------------------------------------------------------------
# live (per-segment) processing


class LiveSplicer:
    """Segment-at-a-time replacement for live feeds.

    Interval merging across future segments is impossible live, so the
    replacement granularity is the whole segment. A run of consecutive
    flagged segments advances through a single ad asset (trim at run end,
    hold the final frame if the asset runs out), mirroring the offline
    trim/hold rule.
    """

    def __init__(
        self,
        repo: AdRepository,
        policy: AdPolicy,
        config: PipelineConfig = PipelineConfig(),
        logo: np.ndarray | None = None,
        model: LogisticModel | None = None,
    ):
        self.repo = repo
        self.policy = policy
        self.config = config
        self.logo = logo
        self.model = model
        self._run_frames: tuple[Frame, ...] | None = None
        self._run_audio: np.ndarray | None = None
        self._frame_pos = 0
        self._sample_pos = 0

    def _begin_run(self, category: str | None) -> None:
        uri = self.policy.resolve(category or "unknown")
        asset = self.repo.load(uri)
        frames: list[Frame] = []
        audio: list[np.ndarray] = []
        for seg in asset.segments:
            frames.extend(seg.frames)
            audio.append(seg.audio.samples)
        self._run_frames = tuple(frames)
        self._run_audio = np.concatenate(audio)
        self._frame_pos = 0
        self._sample_pos = 0

    def _take(self, n_frames: int, n_samples: int) -> tuple[tuple[Frame, ...], np.ndarray]:
        frames = self._run_frames[self._frame_pos : self._frame_pos + n_frames]
        if len(frames) < n_frames:  # hold the final frame
            if not frames:
                frames = (self._run_frames[-1],)
            frames = frames + (frames[-1],) * (n_frames - len(frames))
        audio = self._run_audio[self._sample_pos : self._sample_pos + n_samples]
        if len(audio) < n_samples:
            audio = np.concatenate(
                [audio, np.zeros(n_samples - len(audio), dtype=np.int16)]
            )
        self._frame_pos += n_frames
        self._sample_pos += n_samples
        return frames, audio

    def feed(self, segment: Segment) -> tuple[Segment, SegmentDecision]:
        """Classify one arriving segment; return it, or its replacement."""
        decision = classify_segment(segment, self.config, self.logo, self.model)
        if not decision.is_ad:
            self._run_frames = None
            self._run_audio = None
            return segment, decision
        if self._run_frames is None:
            self._begin_run(decision.category)
        frames, audio = self._take(segment.frame_count, len(segment.audio))
        replaced = Segment(
            segment_id=segment.segment_id,
            fps=segment.fps,
            frames=frames,
            audio=AudioBlock(segment.audio.sample_rate, audio),
            start_time_ms=segment.start_time_ms,
        )
        return replaced, decision
