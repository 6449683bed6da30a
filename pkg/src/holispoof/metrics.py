"""Evaluation metrics: accuracy, EER, method macro-F1, segment F1 and judge scores."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .annotation import Label, SpoofMethod, TimeInterval
from .errors import (
    EmptyInputError,
    LengthMismatchError,
    NoEligibleSamplesError,
    NonFiniteLogitError,
    ScoreOutOfRangeError,
    SingleClassInputError,
    WrongArityError,
)

DEFAULT_RESOLUTION_S = 0.2
# Tolerance used to snap time/resolution ratios onto integer boundaries.
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class ScoredTrial:
    sample_id: str
    label: Label
    score: float  # p(real)

    def __post_init__(self):
        object.__setattr__(self, "label", Label.parse(self.label))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


def _check_pair(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise LengthMismatchError(f"{len(a)} predictions vs {len(b)} references")
    if not a:
        raise EmptyInputError("no samples")


def accuracy(predictions: Sequence, references: Sequence) -> float:
    _check_pair(predictions, references)
    hits = sum(1 for p, r in zip(predictions, references) if p == r)
    return hits / len(references)


def normalize_logits(s_real: float, s_fake: float) -> float:
    """Two-way softmax probability of ``real`` from the two token logits."""
    if not (math.isfinite(s_real) and math.isfinite(s_fake)):
        raise NonFiniteLogitError(f"non-finite logit: ({s_real}, {s_fake})")
    top = max(s_real, s_fake)
    e_real = math.exp(s_real - top)
    e_fake = math.exp(s_fake - top)
    return e_real / (e_real + e_fake)


def eer(trials: Iterable[ScoredTrial]) -> float:
    """Equal error rate with ``real`` as the target class.

    At threshold t a fake is falsely accepted when its score >= t and a
    real is falsely rejected when its score < t. Operating points are taken
    at every distinct observed score plus +inf; when the two rates cross
    between adjacent points the crossing is found by linear interpolation.
    """
    trials = list(trials)
    real = np.sort(np.array([t.score for t in trials if t.label is Label.REAL], dtype=float))
    fake = np.sort(np.array([t.score for t in trials if t.label is Label.FAKE], dtype=float))
    if real.size == 0 or fake.size == 0:
        raise SingleClassInputError("EER needs at least one real and one fake trial")

    thresholds = np.append(np.unique(np.concatenate([real, fake])), np.inf)
    far = (fake.size - np.searchsorted(fake, thresholds, side="left")) / fake.size
    frr = np.searchsorted(real, thresholds, side="left") / real.size
    diff = far - frr  # non-increasing; starts at 1 and ends at -1

    i = int(np.argmax(diff <= 0))
    if diff[i] == 0:
        return float(far[i])
    # i > 0 here because diff[0] = 1 - 0 > 0
    t = diff[i - 1] / (diff[i - 1] - diff[i])
    return float(far[i - 1] + t * (far[i] - far[i - 1]))


MERGED_SYNTHESIS = "tts_vc"


def merged_method_class(method: SpoofMethod) -> str:
    """TTS and VC collapse into one class; the rest keep their own."""
    if method in (SpoofMethod.TTS, SpoofMethod.VC):
        return MERGED_SYNTHESIS
    return method.value


def method_f1(predictions: Sequence[SpoofMethod | None], references: Sequence[SpoofMethod]) -> float:
    """Macro-F1 over merged method classes.

    Pairs whose reference is UNKNOWN are dropped. A missing (None) or
    UNKNOWN prediction counts as a miss for the reference class without
    introducing a class of its own. The average runs over classes present
    in predictions or references.
    """
    if len(predictions) != len(references):
        raise LengthMismatchError(f"{len(predictions)} predictions vs {len(references)} references")
    pairs = [
        (p, r) for p, r in zip(predictions, references) if r is not None and r is not SpoofMethod.UNKNOWN
    ]
    if not pairs:
        raise NoEligibleSamplesError("no samples with a known reference method")

    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    for pred, ref in pairs:
        ref_c = merged_method_class(ref)
        pred_c = None if pred is None or pred is SpoofMethod.UNKNOWN else merged_method_class(pred)
        for c in (ref_c, pred_c):
            if c is not None:
                tp.setdefault(c, 0)
                fp.setdefault(c, 0)
                fn.setdefault(c, 0)
        if pred_c == ref_c:
            tp[ref_c] += 1
        else:
            fn[ref_c] += 1
            if pred_c is not None:
                fp[pred_c] += 1

    scores = [2 * tp[c] / (2 * tp[c] + fp[c] + fn[c]) for c in sorted(tp)]
    return sum(scores) / len(scores)


def segment_count(duration_s: float, resolution_s: float = DEFAULT_RESOLUTION_S) -> int:
    if not resolution_s > 0:
        raise ValueError("resolution_s must be positive")
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    return max(1, math.ceil(duration_s / resolution_s - _GRID_EPS))


def _snap(x: float) -> float:
    r = round(x)
    return float(r) if abs(x - r) < _GRID_EPS else x


@dataclass(frozen=True)
class SegmentGrid:
    resolution_s: float
    labels: np.ndarray  # bool, True = spoofed

    def __len__(self):
        return int(self.labels.size)

    @property
    def any_spoofed(self) -> bool:
        return bool(self.labels.any())


def rasterize(
    intervals: Iterable[TimeInterval],
    duration_s: float,
    resolution_s: float = DEFAULT_RESOLUTION_S,
) -> SegmentGrid:
    """Mark segment k spoofed iff [k*r, (k+1)*r) overlaps an interval with positive length.

    The last segment may be partial; parts of intervals beyond the final
    segment are ignored.
    """
    n = segment_count(duration_s, resolution_s)
    labels = np.zeros(n, dtype=bool)
    for iv in intervals:
        iv = TimeInterval.coerce(iv)
        lo = math.floor(_snap(iv.start_s / resolution_s))
        hi = math.ceil(_snap(iv.end_s / resolution_s))  # exclusive
        lo, hi = max(lo, 0), min(hi, n)
        if lo < hi:
            labels[lo:hi] = True
    return SegmentGrid(resolution_s, labels)


@dataclass(frozen=True)
class SegmentCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "SegmentCounts") -> "SegmentCounts":
        return SegmentCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        # Nothing spoofed on either side counts as a perfect match.
        return 1.0 if denom == 0 else 2 * self.tp / denom


def segment_counts(
    pred: Iterable[TimeInterval],
    ref: Iterable[TimeInterval],
    duration_s: float,
    resolution_s: float = DEFAULT_RESOLUTION_S,
) -> SegmentCounts:
    p = rasterize(pred, duration_s, resolution_s).labels
    r = rasterize(ref, duration_s, resolution_s).labels
    return SegmentCounts(int(np.sum(p & r)), int(np.sum(p & ~r)), int(np.sum(~p & r)))


def segment_f1(
    pred: Iterable[TimeInterval],
    ref: Iterable[TimeInterval],
    duration_s: float,
    resolution_s: float = DEFAULT_RESOLUTION_S,
) -> float:
    return segment_counts(pred, ref, duration_s, resolution_s).f1


JUDGE_SCORES = range(1, 6)


def judge_aggregate(scores: Sequence[int]) -> float:
    if len(scores) != 3:
        raise WrongArityError(f"expected 3 judge scores, got {len(scores)}")
    for s in scores:
        if isinstance(s, bool) or not isinstance(s, int) or s not in JUDGE_SCORES:
            raise ScoreOutOfRangeError(f"judge score must be an integer in 1..5, got {s!r}")
    return sum(scores) / 3
