"""Dataset manifests: JSON Lines of :class:`ManifestEntry`.

A manifest may begin with one header line of the form
``{"_header": {...}}``; readers skip it and expose it separately.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .annotation import AnalysisRecord, Label, SpoofMethod, TimeInterval, normalize_regions
from .errors import DataError, DuplicateSampleIdError, ManifestNotFoundError

HEADER_KEY = "_header"


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    audio_path: str
    label: Label
    method: SpoofMethod | None = None
    regions: tuple[TimeInterval, ...] = field(default=())
    dataset_tag: str = ""
    language: str = "en"
    duration_s: float | None = None
    semantic_influence: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "label", Label.parse(self.label))
        if self.method is not None:
            object.__setattr__(self, "method", SpoofMethod.parse(self.method))
        object.__setattr__(self, "regions", normalize_regions(self.regions))
        if self.label is Label.REAL:
            if self.method not in (None, SpoofMethod.UNKNOWN) or self.regions:
                raise DataError(f"{self.sample_id}: real entry with spoof method or regions")
        if self.duration_s is not None and not self.duration_s > 0:
            raise DataError(f"{self.sample_id}: duration_s must be positive")

    def to_record(self) -> AnalysisRecord:
        """Ground-truth analysis record for this entry."""
        if self.label is Label.REAL:
            return AnalysisRecord(Label.REAL)
        return AnalysisRecord(Label.FAKE, self.method, self.regions, self.semantic_influence)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "audio_path": self.audio_path,
            "label": self.label.value,
            "method": self.method.value if self.method is not None else None,
            "regions": [iv.to_list(None) for iv in self.regions],
            "dataset_tag": self.dataset_tag,
            "language": self.language,
            "duration_s": self.duration_s,
            "semantic_influence": self.semantic_influence,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ManifestEntry":
        try:
            return cls(
                sample_id=str(d["sample_id"]),
                audio_path=str(d.get("audio_path", "")),
                label=d["label"],
                method=d.get("method"),
                regions=tuple(d.get("regions") or ()),
                dataset_tag=str(d.get("dataset_tag", "")),
                language=str(d.get("language", "en")),
                duration_s=d.get("duration_s"),
                semantic_influence=d.get("semantic_influence"),
            )
        except KeyError as exc:
            raise DataError(f"manifest entry missing field {exc}") from None


def dumps_entry(entry: ManifestEntry) -> str:
    return json.dumps(entry.to_dict(), ensure_ascii=False)


def read_manifest(path: str | Path) -> tuple[list[ManifestEntry], dict[str, Any] | None]:
    """Return (entries, header). Duplicate sample ids are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ManifestNotFoundError(f"manifest not found: {path}")
    entries: list[ManifestEntry] = []
    header = None
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if HEADER_KEY in obj:
                header = obj[HEADER_KEY]
                continue
            entry = ManifestEntry.from_dict(obj)
            if entry.sample_id in seen:
                raise DuplicateSampleIdError(f"{path}:{lineno}: duplicate sample id {entry.sample_id!r}")
            seen.add(entry.sample_id)
            entries.append(entry)
    return entries, header


def write_manifest(
    path: str | Path, entries: Iterable[ManifestEntry], header: dict[str, Any] | None = None
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write(json.dumps({HEADER_KEY: header}, ensure_ascii=False) + "\n")
        for e in entries:
            fh.write(dumps_entry(e) + "\n")
