"""Domain types for frames, audio, segments and timecodes, plus the LVS
(linear video segment) container: an uncompressed luma + s16le PCM format
that stands in for a real codec.

LVS layout, little-endian:

    offset  size  field
    0       4     magic "LVS1"
    4       1     version (= 1)
    5       1     reserved (= 0)
    6       2     width (u16)
    8       2     height (u16)
    10      2     fps_num (u16)
    12      2     fps_den (u16)
    14      4     frame_count (u32)
    18      4     sample_rate (u32)
    22      4     audio_sample_count (u32)
    26      8     start_time_ms (u64)
    34      -     frame_count * width * height luma bytes
    ...     -     audio_sample_count * 2 bytes PCM s16le

A stream on disk is a directory of NNNNNN.lvs files in ascending order plus
a stream.json manifest {fps, width, height, segment_ids}.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

MAGIC = b"LVS1"
LVS_VERSION = 1
HEADER = struct.Struct("<4sBBHHHHIIIQ")
HEADER_SIZE = HEADER.size  # 34 bytes
ALLOWED_SAMPLE_RATES = (16000, 44100, 48000)
MIN_FRAME_DIM = 8

DEFAULT_FPS = Fraction(30, 1)


class MediaError(ValueError):
    """Base class for media container and frame errors."""


class BadMagic(MediaError):
    def __init__(self, offset: int, found: bytes):
        super().__init__(f"bad magic at offset {offset}: {found!r}")
        self.offset = offset


class TruncatedPayload(MediaError):
    def __init__(self, offset: int, needed: int, have: int):
        super().__init__(
            f"payload truncated at offset {offset}: need {needed} bytes, have {have}"
        )
        self.offset = offset


class HeaderFieldOutOfRange(MediaError):
    def __init__(self, offset: int, name: str, value):
        super().__init__(f"header field {name} at offset {offset} out of range: {value}")
        self.offset = offset
        self.field = name


class DimensionMismatch(MediaError):
    pass


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def timecode_ms(frame_index: int, fps: Fraction) -> int:
    """Milliseconds of a frame index under fps, rounded half-up."""
    if frame_index < 0:
        raise ValueError("frame_index must be >= 0")
    num, den = fps.numerator, fps.denominator
    return (2 * frame_index * 1000 * den + num) // (2 * num)


def sample_offset(frame_index: int, fps: Fraction, sample_rate: int) -> int:
    """Audio sample index aligned with a frame index, rounded half-up."""
    num, den = fps.numerator, fps.denominator
    return (2 * frame_index * sample_rate * den + num) // (2 * num)


@dataclass(frozen=True)
class Timecode:
    """Frame index paired with its millisecond position in the stream."""

    frame_index: int
    time_ms: int

    @classmethod
    def at(cls, frame_index: int, fps: Fraction) -> "Timecode":
        return cls(frame_index, timecode_ms(frame_index, fps))


@dataclass(frozen=True, eq=False)
class Frame:
    """One 8-bit luma frame; pixels are row-major with shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 2 or px.dtype != np.uint8:
            raise DimensionMismatch("pixels must be a 2-D uint8 array")
        h, w = px.shape
        if w < MIN_FRAME_DIM or h < MIN_FRAME_DIM:
            raise DimensionMismatch(f"frame dimensions {w}x{h} below minimum {MIN_FRAME_DIM}")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> "Frame":
        if len(data) != width * height:
            raise DimensionMismatch(
                f"pixel buffer length {len(data)} != {width}x{height}"
            )
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width))

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True, eq=False)
class AudioBlock:
    """Mono signed 16-bit PCM."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate not in ALLOWED_SAMPLE_RATES:
            raise MediaError(f"sample_rate {self.sample_rate} not in {ALLOWED_SAMPLE_RATES}")
        s = self.samples
        if s.ndim != 1 or s.dtype != np.int16:
            raise MediaError("samples must be a 1-D int16 array")
        object.__setattr__(self, "samples", _freeze(s))

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AudioBlock):
            return NotImplemented
        return self.sample_rate == other.sample_rate and bool(
            np.array_equal(self.samples, other.samples)
        )

    def __hash__(self):
        return hash((self.sample_rate, self.samples.tobytes()))


@dataclass(frozen=True)
class Segment:
    """A timed run of frames plus the PCM covering the same span.

    ``logo_overlaid`` is corpus ground truth, never consulted by detectors,
    and excluded from equality (it is not serialized).
    """

    segment_id: str
    fps: Fraction
    frames: tuple[Frame, ...]
    audio: AudioBlock
    start_time_ms: int = 0
    logo_overlaid: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.fps, Fraction):
            object.__setattr__(self, "fps", Fraction(self.fps))
        if self.fps <= 0:
            raise MediaError(f"fps must be positive, got {self.fps}")
        if not isinstance(self.frames, tuple):
            object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise MediaError("segment must contain at least one frame")
        w, h = self.frames[0].width, self.frames[0].height
        for f in self.frames:
            if (f.width, f.height) != (w, h):
                raise DimensionMismatch("all frames in a segment must share dimensions")
        if self.start_time_ms < 0:
            raise MediaError("start_time_ms must be >= 0")
        # audio span must match the frame span to within one sample of nominal
        n = len(self.frames)
        nominal = sample_offset(n, self.fps, self.audio.sample_rate)
        if abs(len(self.audio) - nominal) > 1:
            raise MediaError(
                f"audio length {len(self.audio)} off by more than 1 sample from "
                f"nominal {nominal} for {n} frames at {self.fps} fps"
            )

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def timecode(self, frame_index: int) -> Timecode:
        return Timecode.at(frame_index, self.fps)


def frame_abs_diff(a: Frame, b: Frame) -> float:
    """Mean absolute pixel difference between two same-sized frames, in [0, 255]."""
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(
            f"frame dimensions differ: {a.pixels.shape} vs {b.pixels.shape}"
        )
    return float(
        np.mean(np.abs(a.pixels.astype(np.int16) - b.pixels.astype(np.int16)))
    )


def expected_samples(frame_count: int, fps: Fraction, sample_rate: int) -> int:
    """Nominal audio sample count covering frame_count frames (half-up)."""
    return sample_offset(frame_count, fps, sample_rate)


def write_segment(seg: Segment) -> bytes:
    """Serialize a segment to LVS bytes. Deterministic: equal segments produce
    identical bytes."""
    num, den = seg.fps.numerator, seg.fps.denominator
    if not (0 < num <= 0xFFFF and 0 < den <= 0xFFFF):
        raise MediaError(f"fps {seg.fps} does not fit u16/u16")
    header = HEADER.pack(
        MAGIC,
        LVS_VERSION,
        0,
        seg.width,
        seg.height,
        num,
        den,
        seg.frame_count,
        seg.audio.sample_rate,
        len(seg.audio),
        seg.start_time_ms,
    )
    parts = [header]
    parts.extend(f.to_bytes() for f in seg.frames)
    parts.append(seg.audio.samples.astype("<i2").tobytes())
    return b"".join(parts)


def read_segment(data: bytes, segment_id: str = "") -> Segment:
    """Parse LVS bytes. Lossless inverse of write_segment for all serialized
    fields; segment_id is carried by the container, not the byte stream."""
    if len(data) < HEADER_SIZE:
        raise TruncatedPayload(len(data), HEADER_SIZE, len(data))
    (
        magic,
        version,
        reserved,
        width,
        height,
        fps_num,
        fps_den,
        frame_count,
        sample_rate,
        audio_sample_count,
        start_time_ms,
    ) = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(0, magic)
    if version != LVS_VERSION:
        raise HeaderFieldOutOfRange(4, "version", version)
    if reserved != 0:
        raise HeaderFieldOutOfRange(5, "reserved", reserved)
    if width < MIN_FRAME_DIM:
        raise HeaderFieldOutOfRange(6, "width", width)
    if height < MIN_FRAME_DIM:
        raise HeaderFieldOutOfRange(8, "height", height)
    if fps_num == 0:
        raise HeaderFieldOutOfRange(10, "fps_num", fps_num)
    if fps_den == 0:
        raise HeaderFieldOutOfRange(12, "fps_den", fps_den)
    if frame_count == 0:
        raise HeaderFieldOutOfRange(14, "frame_count", frame_count)
    if sample_rate not in ALLOWED_SAMPLE_RATES:
        raise HeaderFieldOutOfRange(18, "sample_rate", sample_rate)

    frame_size = width * height
    frames_end = HEADER_SIZE + frame_count * frame_size
    audio_end = frames_end + audio_sample_count * 2
    if len(data) < audio_end:
        raise TruncatedPayload(len(data), audio_end, len(data))
    if len(data) > audio_end:
        raise HeaderFieldOutOfRange(22, "audio_sample_count", audio_sample_count)

    frames = tuple(
        Frame.from_bytes(
            width, height, data[HEADER_SIZE + i * frame_size : HEADER_SIZE + (i + 1) * frame_size]
        )
        for i in range(frame_count)
    )
    audio = AudioBlock(
        sample_rate,
        np.frombuffer(data, dtype="<i2", count=audio_sample_count, offset=frames_end).astype(
            np.int16
        ),
    )
    return Segment(
        segment_id=segment_id,
        fps=Fraction(fps_num, fps_den),
        frames=frames,
        audio=audio,
        start_time_ms=start_time_ms,
    )


def write_pgm(path: Path | str, pixels: np.ndarray) -> None:
    """Write an 8-bit grayscale image as binary PGM (P5, maxval 255)."""
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise MediaError("PGM payload must be a 2-D uint8 array")
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes())


def read_pgm(path: Path | str) -> np.ndarray:
    """Read a binary PGM (P5) image into a 2-D uint8 array."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise BadMagic(0, data[:2])
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":  # comment runs to end of line
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise HeaderFieldOutOfRange(2, "maxval", maxval)
    if len(data) - pos < w * h:
        raise TruncatedPayload(len(data), pos + w * h, len(data))
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)


@dataclass(frozen=True)
class StreamManifest:
    fps: Fraction
    width: int
    height: int
    segment_ids: tuple[str, ...]


MANIFEST_NAME = "stream.json"


def write_stream(directory: Path | str, segments: Iterable[Segment]) -> StreamManifest:
    """Write segments as NNNNNN.lvs files plus the stream.json manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ids = []
    fps = width = height = None
    for i, seg in enumerate(segments):
        if fps is None:
            fps, width, height = seg.fps, seg.width, seg.height
        elif (seg.fps, seg.width, seg.height) != (fps, width, height):
            raise MediaError("all segments of a stream must share fps and dimensions")
        (directory / f"{i:06d}.lvs").write_bytes(write_segment(seg))
        ids.append(seg.segment_id)
    if fps is None:
        raise MediaError("cannot write an empty stream")
    manifest = StreamManifest(fps, width, height, tuple(ids))
    (directory / MANIFEST_NAME).write_text(
        json.dumps(
            {
                "fps": [fps.numerator, fps.denominator],
                "width": width,
                "height": height,
                "segment_ids": ids,
            },
            indent=2,
        )
    )
    return manifest


def read_manifest(directory: Path | str) -> StreamManifest:
    directory = Path(directory)
    raw = json.loads((directory / MANIFEST_NAME).read_text())
    num, den = raw["fps"]
    return StreamManifest(
        Fraction(num, den), raw["width"], raw["height"], tuple(raw["segment_ids"])
    )


def stream_segment_paths(directory: Path | str) -> list[Path]:
    return sorted(Path(directory).glob("[0-9]" * 6 + ".lvs"))


def iter_stream(directory: Path | str) -> Iterator[Segment]:
    """Yield the segments of a stream directory in order, ids from the manifest."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    paths = stream_segment_paths(directory)
    if len(paths) != len(manifest.segment_ids):
        raise MediaError(
            f"manifest lists {len(manifest.segment_ids)} segments, found {len(paths)} files"
        )
    for path, seg_id in zip(paths, manifest.segment_ids):
        yield read_segment(path.read_bytes(), segment_id=seg_id)


def read_stream(directory: Path | str) -> list[Segment]:
    return list(iter_stream(directory))
