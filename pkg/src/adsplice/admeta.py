"""Ad interval metadata: the six-field record emitted by detection, interval
merging, and the category-to-ad placement policy.

A record covers frames [start_frame, end_frame] inclusive; its end timestamp
is exclusive, i.e. the timecode of end_frame + 1. The is_ad field is always
1: records describing non-ad content have no reason to exist, so a 0 is
treated as a schema violation rather than silently carried along.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .media import timecode_ms

DEFAULT_POLICY_KEY = "default"


class SchemaViolation(ValueError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field


class NoTargetForCategory(LookupError):
    def __init__(self, category: str):
        super().__init__(f"no ad target for category {category!r} and no default")
        self.category = category


def _require_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaViolation(name, f"expected an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class AdMetadata:
    start_frame: int
    end_frame: int
    start_timestamp_ms: int
    end_timestamp_ms: int
    category: str
    is_ad: int = 1

    def __post_init__(self):
        _require_int("start_frame", self.start_frame)
        _require_int("end_frame", self.end_frame)
        _require_int("start_timestamp_ms", self.start_timestamp_ms)
        _require_int("end_timestamp_ms", self.end_timestamp_ms)
        if _require_int("is_ad", self.is_ad) != 1:
            raise SchemaViolation("is_ad", f"must be 1, got {self.is_ad}")
        if self.start_frame < 0:
            raise SchemaViolation("start_frame", "must be >= 0")
        if self.end_frame < self.start_frame:
            raise SchemaViolation("end_frame", "must be >= start_frame")
        if not isinstance(self.category, str) or not self.category:
            raise SchemaViolation("category", "must be a non-empty string")
        if self.end_timestamp_ms <= self.start_timestamp_ms:
            raise SchemaViolation("end_timestamp_ms", "must exceed start_timestamp_ms")

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame + 1

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_NAMES = tuple(f.name for f in fields(AdMetadata))


def metadata_from_dict(raw: Mapping) -> AdMetadata:
    for name in _FIELD_NAMES:
        if name not in raw:
            raise SchemaViolation(name, "missing")
    for name in raw:
        if name not in _FIELD_NAMES:
            raise SchemaViolation(str(name), "unknown field")
    return AdMetadata(**{name: raw[name] for name in _FIELD_NAMES})


def interval_metadata(
    start_frame: int, end_frame: int, category: str, fps: Fraction
) -> AdMetadata:
    """Record for an inclusive frame interval; end timestamp is the timecode
    of the frame after the interval."""
    if _require_int("start_frame", start_frame) < 0:
        raise SchemaViolation("start_frame", "must be >= 0")
    if _require_int("end_frame", end_frame) < start_frame:
        raise SchemaViolation("end_frame", "must be >= start_frame")
    return AdMetadata(
        start_frame=start_frame,
        end_frame=end_frame,
        start_timestamp_ms=timecode_ms(start_frame, fps),
        end_timestamp_ms=timecode_ms(end_frame + 1, fps),
        category=category,
        is_ad=1,
    )


def merge_adjacent(items: Sequence[AdMetadata], fps: Fraction) -> list[AdMetadata]:
    """Coalesce runs of frame-adjacent intervals before emission.

    The merged record takes the category covering the most frames in the
    run, ties to the lexicographically smallest. Overlaps are a caller bug.
    """
    ordered = sorted(items, key=lambda m: m.start_frame)
    for a, b in zip(ordered, ordered[1:]):
        if b.start_frame <= a.end_frame:
            raise ValueError(
                f"intervals overlap: [{a.start_frame}, {a.end_frame}] and "
                f"[{b.start_frame}, {b.end_frame}]"
            )
    merged: list[AdMetadata] = []
    run: list[AdMetadata] = []

    def flush():
        if not run:
            return
        frames_per: dict[str, int] = {}
        for m in run:
            frames_per[m.category] = frames_per.get(m.category, 0) + m.frame_count
        top = max(frames_per.values())
        category = min(c for c, n in frames_per.items() if n == top)
        merged.append(
            interval_metadata(run[0].start_frame, run[-1].end_frame, category, fps)
        )
        run.clear()

    for m in ordered:
        if run and m.start_frame != run[-1].end_frame + 1:
            flush()
        run.append(m)
    flush()
    return merged


@dataclass(frozen=True)
class AdPolicy:
    """Category-to-ad-uri mapping with an optional catch-all entry."""

    targets: Mapping[str, str]

    def resolve(self, category: str) -> str:
        if category in self.targets:
            return self.targets[category]
        if DEFAULT_POLICY_KEY in self.targets:
            return self.targets[DEFAULT_POLICY_KEY]
        raise NoTargetForCategory(category)

    def to_json(self) -> str:
        return json.dumps(dict(self.targets), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AdPolicy":
        raw = json.loads(text)
        if not isinstance(raw, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
        ):
            raise SchemaViolation("policy", "must map category strings to uri strings")
        return cls(raw)

    @classmethod
    def load(cls, path: Path | str) -> "AdPolicy":
        return cls.from_json(Path(path).read_text())
