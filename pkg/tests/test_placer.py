"""Splice and repository tests.

Source streams used here encode their own coordinates: frame k has flat
luma k % 251 and the PCM track is a global ramp, so after splicing, every
frame and sample can be checked against an explicitly constructed expected
timeline rather than against the splicer's own arithmetic.
"""

import hashlib
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsplice.admeta import AdPolicy, interval_metadata
from adsplice.media import (
    AudioBlock,
    Segment,
    expected_samples,
    sample_offset,
    timecode_ms,
    write_segment,
)
from adsplice.placer import (
    AdRepository,
    SpliceError,
    UnknownAdUri,
    intervals_from_flags,
    resegment,
    splice,
)

from helpers import FPS30, flat_frame

RATE = 16000
W, H = 16, 8


def ramp_stream(n_segments, frames_per, start_luma=0):
    total = n_segments * frames_per
    samples = sample_offset(total, FPS30, RATE)
    ramp = ((np.arange(samples) % 50000) - 25000).astype(np.int16)
    segs = []
    for k in range(n_segments):
        f0, f1 = k * frames_per, (k + 1) * frames_per
        a0, a1 = sample_offset(f0, FPS30, RATE), sample_offset(f1, FPS30, RATE)
        segs.append(
            Segment(
                segment_id=f"src-{k:06d}",
                fps=FPS30,
                frames=tuple(
                    flat_frame(W, H, (start_luma + i) % 251) for i in range(f0, f1)
                ),
                audio=AudioBlock(RATE, ramp[a0:a1]),
                start_time_ms=timecode_ms(f0, FPS30),
            )
        )
    return segs, ramp


def make_ad(n_frames, luma=220, audio_value=111):
    samples = expected_samples(n_frames, FPS30, RATE)
    return Segment(
        segment_id="ad-000000",
        fps=FPS30,
        frames=tuple(flat_frame(W, H, luma) for _ in range(n_frames)),
        audio=AudioBlock(RATE, np.full(samples, audio_value, dtype=np.int16)),
    )


@pytest.fixture
def repo(tmp_path):
    return AdRepository(tmp_path / "ads")


def splice_audio(out):
    return np.concatenate([s.audio.samples for s in out])


def splice_lumas(out):
    return [int(f.pixels[0, 0]) for s in out for f in s.frames]


# ---------------------------------------------------------------------------
# repository


def test_repo_round_trip(repo):
    ad = make_ad(20)
    repo.store("ads://auto-1", "auto", [ad])
    asset = repo.load("ads://auto-1")
    assert asset.uri == "ads://auto-1"
    assert asset.category == "auto"
    assert asset.duration_ms == timecode_ms(20, FPS30)
    assert asset.segments[0].frames == ad.frames
    assert repo.has("ads://auto-1")
    assert repo.uris() == ["ads://auto-1"]


def test_repo_key_is_sha256_prefix(repo):
    uri = "ads://food-7"
    expect = hashlib.sha256(uri.encode()).hexdigest()[:16]
    assert AdRepository.key(uri) == expect
    repo.store(uri, "food", [make_ad(5)])
    assert (repo.root / expect / "meta.json").exists()


def test_repo_unknown_uri(repo):
    with pytest.raises(UnknownAdUri):
        repo.load("ads://nope")
    assert not repo.has("ads://nope")


# ---------------------------------------------------------------------------
# resegmentation (empty metadata)


def test_empty_metadata_resegments_only(repo):
    src, ramp = ramp_stream(3, 20)
    out = splice(src, [], AdPolicy({}), repo)
    assert [s.segment_id for s in out] == ["out-000000", "out-000001", "out-000002"]
    assert [s.frame_count for s in out] == [20, 20, 20]
    assert [s.start_time_ms for s in out] == [0, 667, 1333]
    assert splice_lumas(out) == [i % 251 for i in range(60)]
    assert np.array_equal(splice_audio(out), ramp)


def test_double_splice_is_byte_exact(repo):
    src, _ = ramp_stream(3, 20)
    once = splice(src, [], AdPolicy({}), repo)
    twice = splice(once, [], AdPolicy({}), repo)
    assert [write_segment(s) for s in once] == [write_segment(s) for s in twice]


def test_segment_frames_override(repo):
    src, _ = ramp_stream(2, 30)
    out = splice(src, [], AdPolicy({}), repo, segment_frames=25)
    assert [s.frame_count for s in out] == [25, 25, 10]
    assert [s.start_time_ms for s in out] == [0, 833, 1667]


def test_resegment_rejects_audio_drift():
    frames = tuple(flat_frame(W, H, 5) for _ in range(60))
    bad = np.zeros(sample_offset(60, FPS30, RATE) + 2, dtype=np.int16)
    with pytest.raises(SpliceError):
        resegment(frames, bad, FPS30, RATE, 30)


# ---------------------------------------------------------------------------
# replacement laws


def test_trim_long_ad_to_interval(repo):
    src, ramp = ramp_stream(4, 30)  # 120 frames
    repo.store("ads://x", "auto", [make_ad(90)])
    meta = [interval_metadata(30, 59, "auto", FPS30)]
    out = splice(src, meta, AdPolicy({"auto": "ads://x"}), repo)

    lumas = splice_lumas(out)
    assert lumas[:30] == [i % 251 for i in range(30)]
    assert lumas[30:60] == [220] * 30
    assert lumas[60:] == [i % 251 for i in range(60, 120)]

    audio = splice_audio(out)
    a0, a1 = sample_offset(30, FPS30, RATE), sample_offset(60, FPS30, RATE)
    assert np.array_equal(audio[:a0], ramp[:a0])
    assert np.all(audio[a0:a1] == 111)
    assert np.array_equal(audio[a1:], ramp[a1:])
    assert sum(s.frame_count for s in out) == 120


def test_hold_short_ad_fills_interval(repo):
    src, ramp = ramp_stream(4, 30)
    # 10-frame ad into a 30-frame interval: hold last frame, pad silence
    ad = make_ad(10, luma=200, audio_value=99)
    repo.store("ads://short", "food", [ad])
    meta = [interval_metadata(60, 89, "food", FPS30)]
    out = splice(src, meta, AdPolicy({"food": "ads://short"}), repo)

    lumas = splice_lumas(out)
    assert lumas[60:90] == [200] * 30  # held frame is identical luma here
    frames = [f for s in out for f in s.frames]
    assert all(frames[i] == ad.frames[-1] for i in range(70, 90))

    audio = splice_audio(out)
    a0 = sample_offset(60, FPS30, RATE)
    a_ad = len(ad.audio)
    a1 = sample_offset(90, FPS30, RATE)
    assert np.all(audio[a0 : a0 + a_ad] == 99)
    assert np.all(audio[a0 + a_ad : a1] == 0)
    assert np.array_equal(audio[a1:], ramp[a1:])


def test_adjacent_intervals_merge_before_lookup(repo):
    # 10 frames of "tech" adjacent to 30 of "food": merged run is food
    src, _ = ramp_stream(3, 20)
    repo.store("ads://food", "food", [make_ad(60, luma=210)])
    repo.store("ads://tech", "tech", [make_ad(60, luma=90)])
    meta = [
        interval_metadata(10, 19, "tech", FPS30),
        interval_metadata(20, 49, "food", FPS30),
    ]
    policy = AdPolicy({"food": "ads://food", "tech": "ads://tech"})
    out = splice(src, meta, policy, repo)
    lumas = splice_lumas(out)
    assert lumas[10:50] == [210] * 40  # single food ad spans the merged run


def test_default_policy_target(repo):
    src, _ = ramp_stream(2, 20)
    repo.store("ads://any", "generic", [make_ad(40, luma=123)])
    meta = [interval_metadata(0, 19, "travel", FPS30)]
    out = splice(src, meta, AdPolicy({"default": "ads://any"}), repo)
    assert splice_lumas(out)[:20] == [123] * 20


# ---------------------------------------------------------------------------
# errors


def test_interval_past_stream_end(repo):
    src, _ = ramp_stream(2, 20)
    repo.store("ads://x", "auto", [make_ad(10)])
    meta = [interval_metadata(30, 45, "auto", FPS30)]
    with pytest.raises(SpliceError):
        splice(src, meta, AdPolicy({"auto": "ads://x"}), repo)


def test_mismatched_ad_geometry(repo):
    src, _ = ramp_stream(2, 20)
    tall = Segment(
        "ad",
        FPS30,
        tuple(flat_frame(W, H * 2, 9) for _ in range(10)),
        AudioBlock(RATE, np.zeros(expected_samples(10, FPS30, RATE), dtype=np.int16)),
    )
    repo.store("ads://tall", "auto", [tall])
    meta = [interval_metadata(0, 9, "auto", FPS30)]
    with pytest.raises(SpliceError):
        splice(src, meta, AdPolicy({"auto": "ads://tall"}), repo)


def test_empty_source_rejected(repo):
    with pytest.raises(SpliceError):
        splice([], [], AdPolicy({}), repo)


# ---------------------------------------------------------------------------
# conservation property


@given(
    n_segments=st.integers(2, 5),
    frames_per=st.integers(10, 30),
    data=st.data(),
)
@settings(max_examples=20)
def test_splice_conserves_length_and_context(n_segments, frames_per, data):
    tmp = tempfile.TemporaryDirectory()
    repo = AdRepository(Path(tmp.name) / "ads")
    repo.store("ads://a", "auto", [make_ad(data.draw(st.integers(1, 70)))])
    src, ramp = ramp_stream(n_segments, frames_per)
    total = n_segments * frames_per

    start = data.draw(st.integers(0, total - 2), label="start")
    end = data.draw(st.integers(start, total - 1), label="end")
    meta = [interval_metadata(start, end, "auto", FPS30)]

    out = splice(src, meta, AdPolicy({"auto": "ads://a"}), repo)
    assert sum(s.frame_count for s in out) == total
    audio = splice_audio(out)
    assert len(audio) == len(ramp)

    # untouched region is bit-identical
    lumas = splice_lumas(out)
    assert lumas[:start] == [i % 251 for i in range(start)]
    assert lumas[end + 1 :] == [i % 251 for i in range(end + 1, total)]
    a0 = sample_offset(start, FPS30, RATE)
    a1 = sample_offset(end + 1, FPS30, RATE)
    assert np.array_equal(audio[:a0], ramp[:a0])
    assert np.array_equal(audio[a1:], ramp[a1:])

    # uniform output segmentation
    assert all(s.frame_count == frames_per for s in out[:-1])
    assert [s.segment_id for s in out] == [f"out-{k:06d}" for k in range(len(out))]


# ---------------------------------------------------------------------------
# flags to intervals


def _flag_segments(n, frames_per=60):
    src, _ = ramp_stream(n, frames_per)
    return src


def test_intervals_from_flags_single_run():
    segs = _flag_segments(4)
    meta = intervals_from_flags(
        segs, [False, True, True, False], [None, "auto", "auto", None]
    )
    assert len(meta) == 1
    assert (meta[0].start_frame, meta[0].end_frame) == (60, 179)
    assert meta[0].category == "auto"
    assert meta[0].start_timestamp_ms == 2000
    assert meta[0].end_timestamp_ms == 6000


def test_intervals_from_flags_weighted_category():
    segs = _flag_segments(3, frames_per=30)
    meta = intervals_from_flags(segs, [True, True, True], ["tech", "food", "food"])
    assert meta[0].category == "food"
    meta = intervals_from_flags(segs, [True, True, False], ["tech", "food", None])
    assert meta[0].category == "food"  # 30 vs 30 frames: lexicographic


def test_intervals_from_flags_separate_runs():
    segs = _flag_segments(5, frames_per=10)
    meta = intervals_from_flags(
        segs,
        [True, False, True, True, False],
        ["auto", None, "food", "food", None],
    )
    assert [(m.start_frame, m.end_frame, m.category) for m in meta] == [
        (0, 9, "auto"),
        (20, 39, "food"),
    ]


def test_intervals_from_flags_none():
    segs = _flag_segments(2)
    assert intervals_from_flags(segs, [False, False], [None, None]) == []
