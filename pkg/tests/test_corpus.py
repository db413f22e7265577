"""Corpus generator: layout, determinism, ground truth, detectability."""

import dataclasses
import json
from fractions import Fraction

import numpy as np
import pytest

from adsplice.admeta import AdPolicy
from adsplice.corpus import (
    AD_CATEGORIES,
    AD_TONES_HZ,
    BlockSpec,
    CorpusConfig,
    LOGO_MARGIN,
    LOGO_SIZE,
    CORPUS_META_NAME,
    POLICY_NAME,
    STREAM_DIR,
    TRUTH_NAME,
    category_tone_hz,
    generate_corpus,
    load_truth,
    make_logo,
    parse_schedule,
    truth_segment_flags,
)
from adsplice.media import read_pgm, read_stream, sample_offset
from adsplice.placer import AdRepository
from adsplice.xcorr import XcorrConfig, classify_segment_xcorr


SMALL = CorpusConfig(
    seed=7,
    width=160,
    height=96,
    fps=Fraction(10, 1),
    segment_seconds=2.0,
    schedule=(
        BlockSpec("program", 6),
        BlockSpec("ad", 4, "auto"),
        BlockSpec("program", 6),
        BlockSpec("ad", 4, "food"),
    ),
    ad_asset_seconds=4.0,
)


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    summary = generate_corpus(SMALL, root)
    return summary


def test_layout_files_exist(small_corpus):
    root = small_corpus.root
    assert (root / STREAM_DIR / "stream.json").is_file()
    assert (root / TRUTH_NAME).is_file()
    assert (root / "logo.pgm").is_file()
    assert (root / POLICY_NAME).is_file()
    assert (root / CORPUS_META_NAME).is_file()
    meta = json.loads((root / CORPUS_META_NAME).read_text())
    assert meta["total_frames"] == 200
    assert meta["total_segments"] == 10
    assert meta["frames_per_segment"] == 20
    assert meta["fps"] == [10, 1]


def test_stream_matches_config(small_corpus):
    segments = read_stream(small_corpus.stream_dir)
    assert len(segments) == 10
    assert sum(s.frame_count for s in segments) == 200
    for k, seg in enumerate(segments):
        assert seg.fps == SMALL.fps
        assert seg.frames[0].height == 96 and seg.frames[0].width == 160
        assert seg.start_time_ms == k * 2000


def test_truth_matches_schedule(small_corpus):
    truth = load_truth(small_corpus.root)
    assert [(t.start_frame, t.end_frame, t.category) for t in truth] == [
        (60, 99, "auto"),
        (160, 199, "food"),
    ]
    assert truth[0].start_timestamp_ms == 6000
    assert truth[0].end_timestamp_ms == 10000
    assert truth[1].end_timestamp_ms == 20000


def test_generation_is_deterministic(tmp_path):
    a = generate_corpus(SMALL, tmp_path / "a")
    b = generate_corpus(SMALL, tmp_path / "b")
    assert a.total_frames == b.total_frames
    fa = (a.root / STREAM_DIR / "000003.lvs").read_bytes()
    fb = (b.root / STREAM_DIR / "000003.lvs").read_bytes()
    assert fa == fb
    assert (a.root / TRUTH_NAME).read_text() == (b.root / TRUTH_NAME).read_text()


def test_different_seed_changes_pixels(tmp_path):
    a = generate_corpus(SMALL, tmp_path / "a")
    b = generate_corpus(dataclasses.replace(SMALL, seed=8), tmp_path / "b")
    fa = (a.root / STREAM_DIR / "000000.lvs").read_bytes()
    fb = (b.root / STREAM_DIR / "000000.lvs").read_bytes()
    assert fa != fb


def test_logo_is_seed_independent(small_corpus):
    logo = read_pgm(small_corpus.root / "logo.pgm")
    assert logo.shape == (LOGO_SIZE, LOGO_SIZE)
    assert np.array_equal(logo, make_logo())
    # high-contrast pattern, not a flat patch
    assert logo.astype(np.float64).var() > 1000


def test_program_frames_carry_logo_ads_do_not(small_corpus):
    segments = read_stream(small_corpus.stream_dir)
    logo = make_logo().astype(np.float64)
    y0, x0 = LOGO_MARGIN, SMALL.width - LOGO_SIZE - LOGO_MARGIN
    program = segments[0].frames[5].pixels.astype(np.float64)
    patch = program[y0 : y0 + LOGO_SIZE, x0 : x0 + LOGO_SIZE]
    # stamped before noise: the patch differs from the logo only by noise
    assert np.abs(patch - logo).mean() < 4 * SMALL.noise_sigma
    ad = segments[3].frames[5].pixels.astype(np.float64)
    ad_patch = ad[y0 : y0 + LOGO_SIZE, x0 : x0 + LOGO_SIZE]
    assert np.abs(ad_patch - logo).mean() > 20


def test_xcorr_classifies_small_corpus_exactly(small_corpus):
    segments = read_stream(small_corpus.stream_dir)
    logo = read_pgm(small_corpus.root / "logo.pgm")
    truth = load_truth(small_corpus.root)
    flags, _ = truth_segment_flags(truth, 200, 20)
    cfg = XcorrConfig()
    got = [classify_segment_xcorr(seg, logo, cfg).is_ad for seg in segments]
    assert got == flags


def test_ad_audio_has_category_tone(small_corpus):
    segments = read_stream(small_corpus.stream_dir)
    truth = load_truth(small_corpus.root)
    # ad block 1 spans frames 60..99; pull its exact sample span
    pcm = np.concatenate([s.audio.samples for s in segments]).astype(np.float64)
    a0 = sample_offset(truth[0].start_frame, SMALL.fps, SMALL.sample_rate)
    a1 = sample_offset(truth[0].end_frame + 1, SMALL.fps, SMALL.sample_rate)
    span = pcm[a0:a1]
    spectrum = np.abs(np.fft.rfft(span * np.hanning(len(span))))
    peak_hz = np.argmax(spectrum) * SMALL.sample_rate / len(span)
    assert abs(peak_hz - AD_TONES_HZ["auto"]) < 5


def test_program_audio_is_broadband(small_corpus):
    segments = read_stream(small_corpus.stream_dir)
    pcm = segments[0].audio.samples.astype(np.float64)
    spectrum = np.abs(np.fft.rfft(pcm * np.hanning(len(pcm)))) ** 2
    # noise: no single bin dominates the total energy
    assert spectrum.max() / spectrum.sum() < 0.05


def test_ad_repository_and_policy(small_corpus):
    repo = AdRepository(small_corpus.root / "ads")
    policy = AdPolicy.load(small_corpus.root / POLICY_NAME)
    for category in AD_CATEGORIES:
        asset = repo.load(policy.resolve(category))
        assert asset.category == category
        assert asset.segments[0].fps == SMALL.fps
        assert sum(s.frame_count for s in asset.segments) == 40
    fallback = repo.load(policy.resolve("travel"))
    assert fallback.category == "default"


def test_block_boundaries_are_hard_cuts(small_corpus):
    segments = read_stream(small_corpus.stream_dir)
    frames = [f for s in segments for f in s.frames]
    # cut into ad block at frame 60 vs within-scene neighbours
    from adsplice.media import frame_abs_diff

    cut = frame_abs_diff(frames[59], frames[60])
    inside = frame_abs_diff(frames[60], frames[61])
    assert cut > 3 * inside + 10


def test_truth_segment_flags_majority():
    from adsplice.corpus import TruthEntry

    # covers exactly segments 3..4 of 20-frame segments
    truth = [TruthEntry(60, 99, 2000, 3334, "auto")]
    flags, cats = truth_segment_flags(truth, 200, 20)
    assert flags == [False, False, False, True, True, False, False, False, False, False]
    assert cats[3] == "auto" and cats[0] is None
    # partial overlap below majority does not flip the segment
    truth = [TruthEntry(55, 99, 0, 0, "auto")]
    flags, _ = truth_segment_flags(truth, 200, 20)
    assert flags[2] == False and flags[3] == True


def test_parse_schedule():
    blocks = parse_schedule("p60,a30:auto,p45.5")
    assert blocks == (
        BlockSpec("program", 60.0),
        BlockSpec("ad", 30.0, "auto"),
        BlockSpec("program", 45.5),
    )
    with pytest.raises(ValueError):
        parse_schedule("x10")
    with pytest.raises(ValueError):
        parse_schedule("a10")  # ad without category


def test_category_tone_for_unknown_category_is_stable():
    a = category_tone_hz("travel")
    assert a == category_tone_hz("travel")
    assert 700 <= a < 2700
    assert category_tone_hz("auto") == 500.0


def test_config_rejects_frames_too_small_for_logo():
    with pytest.raises(Exception):
        CorpusConfig(width=100, height=96)
    with pytest.raises(Exception):
        CorpusConfig(width=160, height=60)
