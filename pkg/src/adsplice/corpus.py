"""Synthetic corpus generation.

A corpus is a scheduled alternation of program and ad blocks rendered as a
segmented stream plus everything needed to exercise the pipeline end to
end: ground-truth ad intervals, the station logo, an ad repository with one
asset per category, and a placement policy.

Construction rules that detectors rely on:
- every block starts with a hard cut (new base luma and texture)
- program scenes carry the station logo top-right at a fixed margin;
  the logo is stamped after the per-frame scene translation and before
  per-frame noise, so it stays put while the scene pans
- ad scenes never carry the logo
- each ad category has a distinctive base luma and a distinctive audio
  tone; program audio is broadband noise

Rendering is deterministic for a given config: one generator seeded from
the config renders the whole audio track and all scene textures up front
(pass 1), then frames are rendered lazily segment by segment (pass 2), so
memory stays proportional to one segment.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .admeta import AdPolicy
from .media import (
    AudioBlock,
    Frame,
    MediaError,
    Segment,
    sample_offset,
    timecode_ms,
    write_pgm,
    write_stream,
)
from .placer import AdRepository

AD_CATEGORIES = ("auto", "food", "tech")
AD_TONES_HZ = {"auto": 500.0, "food": 1300.0, "tech": 2900.0}
AD_BASE_LUMA = {"auto": 45, "food": 210, "tech": 75}
DEFAULT_AD_URI_PREFIX = "adrepo://"

LOGO_SIZE = 64
LOGO_MARGIN = 8

STREAM_DIR = "stream"
TRUTH_NAME = "truth.json"
LOGO_NAME = "logo.pgm"
ADS_DIR = "ads"
POLICY_NAME = "policy.json"
CORPUS_META_NAME = "corpus.json"


@dataclass(frozen=True)
class BlockSpec:
    kind: str  # "program" or "ad"
    seconds: float
    category: str | None = None

    def __post_init__(self):
        if self.kind not in ("program", "ad"):
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.seconds <= 0:
            raise ValueError("block length must be positive")
        if self.kind == "ad" and not self.category:
            raise ValueError("ad blocks need a category")


DEFAULT_SCHEDULE = (
    BlockSpec("program", 60),
    BlockSpec("ad", 30, "auto"),
    BlockSpec("program", 60),
    BlockSpec("ad", 30, "food"),
    BlockSpec("program", 60),
)


def parse_schedule(text: str) -> tuple[BlockSpec, ...]:
    """Parse 'p60,a30:auto,p45.5' into block specs."""
    blocks = []
    for token in text.split(","):
        token = token.strip()
        if token.startswith("p"):
            blocks.append(BlockSpec("program", float(token[1:])))
        elif token.startswith("a"):
            body, _, category = token[1:].partition(":")
            blocks.append(BlockSpec("ad", float(body), category or None))
        else:
            raise ValueError(f"cannot parse schedule token {token!r}")
    return tuple(blocks)


@dataclass(frozen=True)
class CorpusConfig:
    seed: int = 0
    width: int = 320
    height: int = 240
    fps: Fraction = Fraction(30, 1)
    sample_rate: int = 16000
    segment_seconds: float = 10.0
    schedule: tuple[BlockSpec, ...] = DEFAULT_SCHEDULE
    scene_seconds: tuple[float, float] = (1.5, 3.5)
    texture_amplitude: int = 20
    noise_sigma: float = 2.0
    ad_asset_seconds: float = 30.0

    def __post_init__(self):
        if not isinstance(self.fps, Fraction):
            object.__setattr__(self, "fps", Fraction(self.fps))
        # the logo must land fully inside the top-right quadrant
        if self.width < 2 * (LOGO_SIZE + LOGO_MARGIN):
            raise MediaError(f"width {self.width} too small for the logo overlay")
        if self.height < LOGO_SIZE + 2 * LOGO_MARGIN:
            raise MediaError(f"height {self.height} too small for the logo overlay")
        if not self.schedule:
            raise MediaError("schedule must contain at least one block")

    @property
    def frames_per_segment(self) -> int:
        n = round(self.segment_seconds * float(self.fps))
        if n < 1:
            raise MediaError("segment_seconds shorter than one frame")
        return n

    def block_frames(self, spec: BlockSpec) -> int:
        return max(1, round(spec.seconds * float(self.fps)))


def make_logo() -> np.ndarray:
    """Seed-independent high-contrast station logo."""
    y, x = np.mgrid[0:LOGO_SIZE, 0:LOGO_SIZE]
    return ((x * 13) ^ (y * 7)).astype(np.uint16).__mod__(256).astype(np.uint8)


def category_tone_hz(category: str) -> float:
    if category in AD_TONES_HZ:
        return AD_TONES_HZ[category]
    digest = int(hashlib.sha256(category.encode()).hexdigest()[:8], 16)
    return 700.0 + (digest % 2000)


def _category_base_luma(category: str) -> int:
    if category in AD_BASE_LUMA:
        return AD_BASE_LUMA[category]
    digest = int(hashlib.sha256(category.encode()).hexdigest()[8:16], 16)
    return 40 + (digest % 180)


@dataclass(frozen=True)
class _Scene:
    start_frame: int
    end_frame: int  # inclusive
    kind: str
    category: str | None
    texture: np.ndarray
    has_logo: bool


@dataclass(frozen=True)
class TruthEntry:
    start_frame: int
    end_frame: int
    start_timestamp_ms: int
    end_timestamp_ms: int
    category: str

    def to_dict(self) -> dict:
        return {
            "start_frame": self.start_frame,
            "end_frame": self.end_frame,
            "start_timestamp_ms": self.start_timestamp_ms,
            "end_timestamp_ms": self.end_timestamp_ms,
            "category": self.category,
        }


def _plan_scenes(
    rng: np.random.Generator, config: CorpusConfig
) -> tuple[list[_Scene], list[TruthEntry], int]:
    scenes: list[_Scene] = []
    truth: list[TruthEntry] = []
    fps = config.fps
    pos = 0
    min_scene = max(13, round(config.scene_seconds[0] * float(fps)))
    max_scene = max(min_scene + 1, round(config.scene_seconds[1] * float(fps)))

    def texture(base: int) -> np.ndarray:
        amp = config.texture_amplitude
        t = base + rng.integers(-amp, amp + 1, size=(config.height, config.width))
        return np.clip(t, 0, 255).astype(np.uint8)

    for spec in config.schedule:
        n = config.block_frames(spec)
        if spec.kind == "program":
            remaining = n
            while remaining > 0:
                length = int(rng.integers(min_scene, max_scene + 1))
                if remaining - length < min_scene:
                    length = remaining
                base = int(rng.integers(110, 171))
                scenes.append(
                    _Scene(pos, pos + length - 1, "program", None, texture(base), True)
                )
                pos += length
                remaining -= length
        else:
            base = _category_base_luma(spec.category)
            scenes.append(
                _Scene(pos, pos + n - 1, "ad", spec.category, texture(base), False)
            )
            truth.append(
                TruthEntry(
                    start_frame=pos,
                    end_frame=pos + n - 1,
                    start_timestamp_ms=timecode_ms(pos, fps),
                    end_timestamp_ms=timecode_ms(pos + n, fps),
                    category=spec.category,
                )
            )
            pos += n
    return scenes, truth, pos


def _render_audio(
    rng: np.random.Generator, scenes: Sequence[_Scene], total_frames: int,
    config: CorpusConfig,
) -> np.ndarray:
    rate = config.sample_rate
    total = sample_offset(total_frames, config.fps, rate)
    out = np.zeros(total, dtype=np.float64)
    for scene in scenes:
        a0 = sample_offset(scene.start_frame, config.fps, rate)
        a1 = sample_offset(scene.end_frame + 1, config.fps, rate)
        n = a1 - a0
        if scene.kind == "program":
            out[a0:a1] = rng.normal(0.0, 2500.0, size=n)
        else:
            t = (a0 + np.arange(n)) / rate
            tone = 6000.0 * np.sin(2 * np.pi * category_tone_hz(scene.category) * t)
            out[a0:a1] = tone + rng.normal(0.0, 500.0, size=n)
    return np.clip(np.round(out), -32768, 32767).astype(np.int16)


def _iter_corpus_segments(
    rng: np.random.Generator,
    scenes: Sequence[_Scene],
    audio: np.ndarray,
    total_frames: int,
    config: CorpusConfig,
) -> Iterator[Segment]:
    fps, rate = config.fps, config.sample_rate
    per = config.frames_per_segment
    logo = make_logo()
    y0 = LOGO_MARGIN
    x0 = config.width - LOGO_SIZE - LOGO_MARGIN
    scene_idx = 0
    for k, start in enumerate(range(0, total_frames, per)):
        stop = min(start + per, total_frames)
        frames = []
        has_logo = False
        for fi in range(start, stop):
            while scenes[scene_idx].end_frame < fi:
                scene_idx += 1
            scene = scenes[scene_idx]
            px = np.roll(scene.texture, fi - scene.start_frame, axis=1)
            if scene.has_logo:
                px[y0 : y0 + LOGO_SIZE, x0 : x0 + LOGO_SIZE] = logo
            noisy = px.astype(np.float64) + rng.normal(
                0.0, config.noise_sigma, size=px.shape
            )
            frames.append(Frame(np.clip(np.round(noisy), 0, 255).astype(np.uint8)))
            has_logo = has_logo or scene.has_logo
        a0 = sample_offset(start, fps, rate)
        a1 = sample_offset(stop, fps, rate)
        yield Segment(
            segment_id=f"src-{k:06d}",
            fps=fps,
            frames=tuple(frames),
            audio=AudioBlock(rate, audio[a0:a1]),
            start_time_ms=timecode_ms(start, fps),
            logo_overlaid=has_logo,
        )


def _generate_ad_asset(
    seed: int, index: int, category: str, config: CorpusConfig
) -> list[Segment]:
    """A standalone ad stream in the category's style (no logo)."""
    rng = np.random.default_rng([seed, 1000 + index])
    n = max(1, round(config.ad_asset_seconds * float(config.fps)))
    asset_cfg = CorpusConfig(
        seed=seed,
        width=config.width,
        height=config.height,
        fps=config.fps,
        sample_rate=config.sample_rate,
        segment_seconds=config.segment_seconds,
        schedule=(BlockSpec("ad", config.ad_asset_seconds, category),),
        texture_amplitude=config.texture_amplitude,
        noise_sigma=config.noise_sigma,
    )
    scenes, _, total = _plan_scenes(rng, asset_cfg)
    audio = _render_audio(rng, scenes, total, asset_cfg)
    return list(_iter_corpus_segments(rng, scenes, audio, total, asset_cfg))


@dataclass(frozen=True)
class CorpusSummary:
    root: Path
    stream_dir: Path
    total_frames: int
    total_segments: int
    truth: tuple[TruthEntry, ...]
    categories: tuple[str, ...]


def generate_corpus(config: CorpusConfig, out_dir: Path | str) -> CorpusSummary:
    """Render the corpus under out_dir: stream/, truth.json, logo.pgm,
    ads/ repository, policy.json and corpus.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(config.seed)
    scenes, truth, total_frames = _plan_scenes(rng, config)
    audio = _render_audio(rng, scenes, total_frames, config)
    segments = _iter_corpus_segments(rng, scenes, audio, total_frames, config)
    write_stream(out_dir / STREAM_DIR, segments)

    (out_dir / TRUTH_NAME).write_text(
        json.dumps([t.to_dict() for t in truth], indent=2)
    )
    write_pgm(out_dir / LOGO_NAME, make_logo())

    categories = sorted({t.category for t in truth} | set(AD_CATEGORIES))
    repo = AdRepository(out_dir / ADS_DIR)
    targets = {}
    for i, category in enumerate(categories):
        uri = f"{DEFAULT_AD_URI_PREFIX}{category}-0"
        repo.store(uri, category, _generate_ad_asset(config.seed, i, category, config))
        targets[category] = uri
    default_uri = f"{DEFAULT_AD_URI_PREFIX}default-0"
    repo.store(
        default_uri,
        "default",
        _generate_ad_asset(config.seed, len(categories), "default", config),
    )
    targets["default"] = default_uri
    policy = AdPolicy(targets)
    (out_dir / POLICY_NAME).write_text(policy.to_json())

    n_segments = -(-total_frames // config.frames_per_segment)
    (out_dir / CORPUS_META_NAME).write_text(
        json.dumps(
            {
                "seed": config.seed,
                "width": config.width,
                "height": config.height,
                "fps": [config.fps.numerator, config.fps.denominator],
                "sample_rate": config.sample_rate,
                "segment_seconds": config.segment_seconds,
                "frames_per_segment": config.frames_per_segment,
                "schedule": [
                    {"kind": b.kind, "seconds": b.seconds, "category": b.category}
                    for b in config.schedule
                ],
                "total_frames": total_frames,
                "total_segments": n_segments,
                "categories": categories,
            },
            indent=2,
        )
    )
    return CorpusSummary(
        root=out_dir,
        stream_dir=out_dir / STREAM_DIR,
        total_frames=total_frames,
        total_segments=n_segments,
        truth=tuple(truth),
        categories=tuple(categories),
    )


def load_truth(corpus_dir: Path | str) -> list[TruthEntry]:
    raw = json.loads((Path(corpus_dir) / TRUTH_NAME).read_text())
    return [TruthEntry(**entry) for entry in raw]


def truth_segment_flags(
    truth: Sequence[TruthEntry], total_frames: int, frames_per_segment: int
) -> tuple[list[bool], list[str | None]]:
    """Per-segment ground truth: a segment counts as ad when ad frames cover
    a strict majority of it; its category is the one covering most frames."""
    flags: list[bool] = []
    categories: list[str | None] = []
    for start in range(0, total_frames, frames_per_segment):
        stop = min(start + frames_per_segment, total_frames)
        per_category: dict[str, int] = {}
        for t in truth:
            overlap = min(stop - 1, t.end_frame) - max(start, t.start_frame) + 1
            if overlap > 0:
                per_category[t.category] = per_category.get(t.category, 0) + overlap
        ad_frames = sum(per_category.values())
        if 2 * ad_frames > stop - start:
            top = max(per_category.values())
            flags.append(True)
            categories.append(min(c for c, n in per_category.items() if n == top))
        else:
            flags.append(False)
            categories.append(None)
    return flags, categories
