"""Structured spoofing-analysis records and their wire format.

A record is emitted by the analysis model as a single JSON object, e.g.::

    {"real_or_fake": "fake", "spoof_method": "cut_and_paste",
     "spoof_regions": [[1.2, 3.4]], "semantic_influence": "..."}
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import (
    InconsistentRecordError,
    InvalidFieldError,
    InvariantViolationError,
    MalformedIntervalError,
    MissingAuthenticityKeyError,
    NoJsonFoundError,
    UnknownMethodError,
)
from .jsonblock import find_json_object, iter_json_objects

AUTH_KEY = "real_or_fake"
METHOD_KEY = "spoof_method"
REGIONS_KEY = "spoof_regions"
SEMANTIC_KEY = "semantic_influence"

# Allowed overshoot of region end past the audio duration.
DURATION_SLACK_S = 0.05


class Label(str, enum.Enum):
    REAL = "real"
    FAKE = "fake"

    @classmethod
    def parse(cls, value: Any) -> "Label":
        if isinstance(value, Label):
            return value
        if isinstance(value, str):
            try:
                return cls(value.strip().lower())
            except ValueError:
                pass
        raise InvalidFieldError(f"authenticity must be 'real' or 'fake', got {value!r}")


class SpoofMethod(str, enum.Enum):
    TTS = "tts"
    VC = "vc"
    CUT_AND_PASTE = "cut_and_paste"
    SPEECH_EDITING = "speech_editing"
    VOCODER_RESYNTHESIS = "vocoder_resynthesis"
    CODEC_RESYNTHESIS = "codec_resynthesis"
    # Only for reference data whose method is not labelled.
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, value: Any) -> "SpoofMethod":
        """Case-insensitive lookup through :data:`METHOD_ALIASES`."""
        if isinstance(value, SpoofMethod):
            return value
        if not isinstance(value, str):
            raise UnknownMethodError(f"spoof method must be a string, got {value!r}")
        key = _alias_key(value)
        try:
            return METHOD_ALIASES[key]
        except KeyError:
            raise UnknownMethodError(f"unrecognised spoof method {value!r}") from None


def _alias_key(text: str) -> str:
    return re.sub(r"[\s_\-]+", " ", text.strip().lower())


_ALIASES = {
    SpoofMethod.TTS: ["tts", "text to speech", "text to speech synthesis", "tts synthesis", "speech synthesis"],
    SpoofMethod.VC: ["vc", "voice conversion"],
    SpoofMethod.CUT_AND_PASTE: ["cap", "cut and paste", "cut paste", "cutandpaste", "splicing"],
    SpoofMethod.SPEECH_EDITING: ["se", "speech editing", "speech edit", "editing"],
    SpoofMethod.VOCODER_RESYNTHESIS: ["vr", "vocoder resynthesis", "vocoder", "vocoded"],
    SpoofMethod.CODEC_RESYNTHESIS: ["cr", "codec resynthesis", "codec", "neural codec"],
    SpoofMethod.UNKNOWN: ["unknown", "unk"],
}

#: Normalised alias (lowercase, runs of space/underscore/hyphen collapsed
#: to one space) to canonical method.
METHOD_ALIASES: dict[str, SpoofMethod] = {
    _alias_key(alias): method for method, aliases in _ALIASES.items() for alias in aliases
}


@dataclass(frozen=True, order=True)
class TimeInterval:
    start_s: float
    end_s: float

    def __post_init__(self):
        for v in (self.start_s, self.end_s):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise MalformedIntervalError(f"interval bounds must be finite numbers: {self!r}")
        if self.start_s < 0:
            raise MalformedIntervalError(f"interval starts before 0: {self!r}")
        if self.end_s <= self.start_s:
            raise MalformedIntervalError(f"interval end must exceed start: {self!r}")
        object.__setattr__(self, "start_s", float(self.start_s))
        object.__setattr__(self, "end_s", float(self.end_s))

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def to_list(self, ndigits: int | None = 3) -> list[float]:
        if ndigits is None:
            return [self.start_s, self.end_s]
        return [round(self.start_s, ndigits), round(self.end_s, ndigits)]

    @classmethod
    def coerce(cls, value: Any) -> "TimeInterval":
        if isinstance(value, TimeInterval):
            return value
        if isinstance(value, dict):
            value = [value.get("start_s", value.get("start")), value.get("end_s", value.get("end"))]
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise MalformedIntervalError(f"interval must be a [start, end] pair, got {value!r}")
        return cls(value[0], value[1])


def normalize_regions(regions: Iterable[Any]) -> tuple[TimeInterval, ...]:
    """Sort intervals and union any that overlap or touch."""
    items = sorted(TimeInterval.coerce(r) for r in regions)
    merged: list[TimeInterval] = []
    for iv in items:
        if merged and iv.start_s <= merged[-1].end_s:
            last = merged[-1]
            if iv.end_s > last.end_s:
                merged[-1] = TimeInterval(last.start_s, iv.end_s)
        else:
            merged.append(iv)
    return tuple(merged)


@dataclass(frozen=True)
class AnalysisRecord:
    """One holistic verdict. Regions are normalised on construction.

    Construction does not enforce cross-field consistency so that
    :func:`validate_record` can report on inconsistent records; use
    :meth:`consistency_problems` or :func:`serialize_analysis` to check.
    """

    authenticity: Label
    method: SpoofMethod | None = None
    regions: tuple[TimeInterval, ...] = field(default=())
    semantic_influence: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "authenticity", Label.parse(self.authenticity))
        if self.method is not None:
            object.__setattr__(self, "method", SpoofMethod.parse(self.method))
        object.__setattr__(self, "regions", normalize_regions(self.regions))

    @property
    def is_fake(self) -> bool:
        return self.authenticity is Label.FAKE

    def consistency_problems(self) -> list[str]:
        if self.is_fake:
            return []
        problems = []
        if self.method is not None:
            problems.append("real record carries a spoof method")
        if self.regions:
            problems.append("real record carries spoofed regions")
        if self.semantic_influence is not None:
            problems.append("real record carries a semantic influence analysis")
        return problems


def record_to_dict(record: AnalysisRecord) -> dict[str, Any]:
    out: dict[str, Any] = {AUTH_KEY: record.authenticity.value}
    if record.method is not None:
        out[METHOD_KEY] = record.method.value
    if record.regions:
        out[REGIONS_KEY] = [iv.to_list() for iv in record.regions]
    if record.semantic_influence is not None:
        out[SEMANTIC_KEY] = record.semantic_influence
    return out


def serialize_analysis(record: AnalysisRecord) -> str:
    """Canonical single-line JSON; optional keys are omitted when absent."""
    problems = record.consistency_problems()
    if problems:
        raise InvariantViolationError("; ".join(problems))
    return json.dumps(record_to_dict(record), ensure_ascii=False)


def record_from_dict(obj: dict[str, Any]) -> AnalysisRecord:
    if AUTH_KEY not in obj:
        raise MissingAuthenticityKeyError(f"object lacks {AUTH_KEY!r}")
    label = Label.parse(obj[AUTH_KEY])

    method = obj.get(METHOD_KEY)
    if method is not None:
        method = SpoofMethod.parse(method)

    raw_regions = obj.get(REGIONS_KEY)
    if raw_regions is None:
        raw_regions = []
    if not isinstance(raw_regions, list):
        raise MalformedIntervalError(f"{REGIONS_KEY} must be a list, got {raw_regions!r}")
    regions = normalize_regions(raw_regions)

    semantic = obj.get(SEMANTIC_KEY)
    if semantic is not None and not isinstance(semantic, str):
        raise InvalidFieldError(f"{SEMANTIC_KEY} must be a string")

    record = AnalysisRecord(label, method, regions, semantic)
    problems = record.consistency_problems()
    if problems:
        raise InconsistentRecordError("; ".join(problems))
    return record


def parse_analysis(raw_text: str) -> AnalysisRecord:
    """Parse raw model output into a record.

    The first balanced ``{...}`` block containing ``real_or_fake`` is used;
    surrounding prose and code fences are ignored, as are unknown keys.
    """
    obj = find_json_object(raw_text, (AUTH_KEY,))
    if obj is None:
        if next(iter_json_objects(raw_text), None) is None:
            raise NoJsonFoundError("no JSON object in model output")
        raise MissingAuthenticityKeyError(f"no JSON object with key {AUTH_KEY!r}")
    return record_from_dict(obj)


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def validate_record(record: AnalysisRecord, audio_duration_s: float) -> list[Violation]:
    """Empty list means the record is valid for audio of this duration."""
    if not audio_duration_s > 0:
        raise ValueError("audio_duration_s must be positive")
    report = [Violation("InconsistentRecord", p) for p in record.consistency_problems()]
    limit = audio_duration_s + DURATION_SLACK_S
    for iv in record.regions:
        if iv.end_s > limit:
            report.append(
                Violation("RegionOutOfBounds", f"region {iv.to_list()} ends after {audio_duration_s:.3f} s")
            )
    return report
