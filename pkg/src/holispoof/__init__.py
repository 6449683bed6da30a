"""Holistic speech anti-spoofing toolkit: annotation format, metrics,
dataset mixing and the dialogue spoofing data pipeline."""

__version__ = "0.1.0"

from .annotation import AnalysisRecord, Label, SpoofMethod, TimeInterval, parse_analysis, serialize_analysis
from .metrics import accuracy, eer, method_f1, normalize_logits, segment_f1

__all__ = [
    "__version__",
    "AnalysisRecord",
    "Label",
    "SpoofMethod",
    "TimeInterval",
    "parse_analysis",
    "serialize_analysis",
    "accuracy",
    "eer",
    "method_f1",
    "normalize_logits",
    "segment_f1",
]
