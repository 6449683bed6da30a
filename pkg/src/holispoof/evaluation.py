"""Scoring a prediction file against a reference manifest."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .annotation import AnalysisRecord, Label, SpoofMethod, parse_analysis
from .errors import (
    DataError,
    DuplicateSampleIdError,
    ManifestNotFoundError,
    NoEligibleSamplesError,
    SingleClassInputError,
)
from .manifest import ManifestEntry, read_manifest
from .metrics import (
    DEFAULT_RESOLUTION_S,
    ScoredTrial,
    SegmentCounts,
    accuracy,
    eer,
    method_f1,
    normalize_logits,
    segment_counts,
)

log = logging.getLogger(__name__)


def read_predictions(path: str | Path) -> dict[str, str]:
    """Read ``sample_id<TAB>raw_model_output`` lines."""
    path = Path(path)
    if not path.is_file():
        raise ManifestNotFoundError(f"predictions file not found: {path}")
    out: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            sample_id, sep, raw = line.partition("\t")
            if not sep:
                raise DataError(f"{path}:{lineno}: expected sample_id<TAB>output")
            if sample_id in out:
                raise DuplicateSampleIdError(f"{path}:{lineno}: duplicate sample id {sample_id!r}")
            out[sample_id] = raw
    return out


def read_scores(path: str | Path) -> dict[str, float]:
    """Read ``sample_id<TAB>logit_real<TAB>logit_fake`` lines into p(real)."""
    path = Path(path)
    if not path.is_file():
        raise ManifestNotFoundError(f"scores file not found: {path}")
    out: dict[str, float] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected sample_id<TAB>logit_real<TAB>logit_fake")
            if parts[0] in out:
                raise DuplicateSampleIdError(f"{path}:{lineno}: duplicate sample id {parts[0]!r}")
            try:
                out[parts[0]] = normalize_logits(float(parts[1]), float(parts[2]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


@dataclass
class MetricReport:
    n_samples: int
    n_parse_failures: int
    accuracy: float | None
    eer: float | None
    method_macro_f1: float | None
    seg_f1: float | None
    semantic_score: float | None = None
    n_method_excluded_unknown: int = 0
    n_seg_samples: int = 0
    n_missing_predictions: int = 0
    n_extra_predictions: int = 0
    resolution_s: float = DEFAULT_RESOLUTION_S
    per_dataset: dict[str, "MetricReport"] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "n_samples": self.n_samples,
            "n_parse_failures": self.n_parse_failures,
            "n_missing_predictions": self.n_missing_predictions,
            "n_extra_predictions": self.n_extra_predictions,
            "accuracy": self.accuracy,
            "eer": self.eer,
            "method_macro_f1": self.method_macro_f1,
            "n_method_excluded_unknown": self.n_method_excluded_unknown,
            "seg_f1": self.seg_f1,
            "n_seg_samples": self.n_seg_samples,
            "semantic_score": self.semantic_score,
            "resolution_s": self.resolution_s,
        }
        if self.per_dataset:
            d["per_dataset"] = {tag: r.to_dict() for tag, r in sorted(self.per_dataset.items())}
        return d


@dataclass
class _Sample:
    entry: ManifestEntry
    record: AnalysisRecord | None
    score: float | None


def _duration(entry: ManifestEntry, pred: AnalysisRecord | None) -> float:
    if entry.duration_s is not None:
        return entry.duration_s
    ends = [iv.end_s for iv in entry.regions]
    if pred is not None:
        ends += [iv.end_s for iv in pred.regions]
    return max(ends)


def _aggregate(samples: list[_Sample], resolution_s: float) -> MetricReport:
    refs = [s.entry.label for s in samples]
    preds = [s.record.authenticity if s.record is not None else None for s in samples]
    acc = accuracy(preds, refs) if samples else None

    fakes = [s for s in samples if s.entry.label is Label.FAKE]
    ref_methods = [s.entry.method if s.entry.method is not None else SpoofMethod.UNKNOWN for s in fakes]
    pred_methods = [
        s.record.method if s.record is not None and s.record.is_fake else None for s in fakes
    ]
    excluded = sum(1 for m in ref_methods if m is SpoofMethod.UNKNOWN)
    try:
        mf1 = method_f1(pred_methods, ref_methods)
    except NoEligibleSamplesError:
        mf1 = None

    seg_samples = [s for s in samples if s.entry.regions]
    counts = SegmentCounts()
    for s in seg_samples:
        pred_regions = s.record.regions if s.record is not None else ()
        counts = counts + segment_counts(pred_regions, s.entry.regions, _duration(s.entry, s.record), resolution_s)
    seg = counts.f1 if seg_samples else None

    trials = [ScoredTrial(s.entry.sample_id, s.entry.label, s.score) for s in samples if s.score is not None]
    try:
        eer_value = eer(trials) if trials else None
    except SingleClassInputError:
        eer_value = None

    return MetricReport(
        n_samples=len(samples),
        n_parse_failures=sum(1 for s in samples if s.record is None),
        accuracy=acc,
        eer=eer_value,
        method_macro_f1=mf1,
        seg_f1=seg,
        n_method_excluded_unknown=excluded,
        n_seg_samples=len(seg_samples),
        resolution_s=resolution_s,
    )


def evaluate_predictions(
    predictions: Mapping[str, str],
    references: list[ManifestEntry],
    resolution_s: float = DEFAULT_RESOLUTION_S,
    scores: Mapping[str, float] | None = None,
) -> MetricReport:
    """Score raw model outputs against reference entries.

    Missing or unparseable predictions count as wrong wherever the sample
    participates. Segment F1 pools segment counts over samples that have
    reference regions.
    """
    scores = scores or {}
    ids = [e.sample_id for e in references]
    if len(set(ids)) != len(ids):
        raise DuplicateSampleIdError("reference manifest has duplicate sample ids")

    samples = []
    missing = 0
    for entry in references:
        raw = predictions.get(entry.sample_id)
        record = None
        if raw is None:
            missing += 1
        else:
            try:
                record = parse_analysis(raw)
            except DataError as exc:
                log.debug("parse failure for %s: %s", entry.sample_id, exc)
        samples.append(_Sample(entry, record, scores.get(entry.sample_id)))

    report = _aggregate(samples, resolution_s)
    report.n_missing_predictions = missing
    report.n_extra_predictions = len(set(predictions) - set(ids))
    by_tag: dict[str, list[_Sample]] = {}
    for s in samples:
        by_tag.setdefault(s.entry.dataset_tag, []).append(s)
    report.per_dataset = {tag: _aggregate(group, resolution_s) for tag, group in by_tag.items()}
    return report


def evaluate_run(
    predictions_file: str | Path,
    reference_manifest: str | Path,
    resolution_s: float = DEFAULT_RESOLUTION_S,
    scores_file: str | Path | None = None,
) -> MetricReport:
    entries, _ = read_manifest(reference_manifest)
    predictions = read_predictions(predictions_file)
    scores = read_scores(scores_file) if scores_file is not None else None
    return evaluate_predictions(predictions, entries, resolution_s, scores)
