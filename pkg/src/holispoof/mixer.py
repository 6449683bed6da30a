"""Deterministic real/fake stratified sampling with per-dataset caps.

Shuffling is hash-based: each entry's position within its class is the
SHA-256 digest of ``"{seed}:{dataset_tag}:{label}:{sample_id}"``, compared
bytewise. The order therefore depends only on the seed and the entry
itself, not on the platform, library versions or input order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .annotation import Label, serialize_analysis
from .errors import ConfigError, DuplicateSampleIdError, ZeroCapError
from .manifest import ManifestEntry, read_manifest, write_manifest

SHUFFLE_ALGORITHM = "sha256-sort"
CLASS_ORDER = (Label.REAL, Label.FAKE)


@dataclass(frozen=True)
class MixSpec:
    dataset_tag: str
    manifest: str
    cap: int
    seed: int | None = None  # falls back to the run seed
    stratify_key: str = "label"

    def __post_init__(self):
        if self.cap <= 0:
            raise ZeroCapError(f"{self.dataset_tag}: cap must be positive, got {self.cap}")
        if self.stratify_key != "label":
            raise ConfigError(f"unsupported stratify_key {self.stratify_key!r}")


def shuffle_key(entry: ManifestEntry, seed: int) -> bytes:
    token = f"{seed}:{entry.dataset_tag}:{entry.label.value}:{entry.sample_id}"
    return hashlib.sha256(token.encode("utf-8")).digest()


def apportion(class_sizes: Sequence[int], total: int) -> list[int]:
    """Largest-remainder split of ``total`` proportional to ``class_sizes``.

    Ties on the remainder go to the earlier class.
    """
    pool = sum(class_sizes)
    if total > pool:
        raise ValueError("cannot draw more than the pool holds")
    quotas = [total * n // pool for n in class_sizes]
    remainders = [total * n % pool for n in class_sizes]
    leftover = total - sum(quotas)
    order = sorted(range(len(class_sizes)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        quotas[i] += 1
    return quotas


def stratified_sample(pool: Sequence[ManifestEntry], cap: int, seed: int) -> list[ManifestEntry]:
    """Draw ``min(len(pool), cap)`` entries preserving the real:fake ratio.

    Output is grouped by class (real first) and ordered by the seeded
    shuffle within each class. Pools no larger than the cap are returned
    whole, in that same order.
    """
    if cap <= 0:
        raise ZeroCapError(f"cap must be positive, got {cap}")
    if not pool:
        raise ValueError("pool is empty")
    by_class = {c: sorted((e for e in pool if e.label is c), key=lambda e: shuffle_key(e, seed)) for c in CLASS_ORDER}
    sizes = [len(by_class[c]) for c in CLASS_ORDER]
    quotas = sizes if len(pool) <= cap else apportion(sizes, cap)
    out: list[ManifestEntry] = []
    for c, q in zip(CLASS_ORDER, quotas):
        out.extend(by_class[c][:q])
    return out


def _prefixed(entry: ManifestEntry, tag: str) -> ManifestEntry:
    d = entry.to_dict()
    d["sample_id"] = f"{tag}/{entry.sample_id}"
    d["dataset_tag"] = tag
    return ManifestEntry.from_dict(d)


def build_mixed_manifest(
    specs: Sequence[tuple[Sequence[ManifestEntry], MixSpec]], seed: int
) -> tuple[list[ManifestEntry], dict[str, Any]]:
    """Concatenate per-dataset stratified samples.

    Sample ids are prefixed with ``"{dataset_tag}/"``. Returns the entries
    and a header recording the seed, algorithm and per-dataset counts.
    """
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    datasets = []
    for pool, spec in specs:
        tagged = [_prefixed(e, spec.dataset_tag) for e in pool]
        ds_seed = spec.seed if spec.seed is not None else seed
        picked = stratified_sample(tagged, spec.cap, ds_seed)
        for e in picked:
            if e.sample_id in seen:
                raise DuplicateSampleIdError(f"duplicate sample id after prefixing: {e.sample_id!r}")
            seen.add(e.sample_id)
        entries.extend(picked)
        datasets.append(
            {
                "dataset_tag": spec.dataset_tag,
                "cap": spec.cap,
                "seed": ds_seed,
                "pool": len(pool),
                "real": sum(1 for e in picked if e.label is Label.REAL),
                "fake": sum(1 for e in picked if e.label is Label.FAKE),
            }
        )
    header = {
        "seed": seed,
        "shuffle": SHUFFLE_ALGORITHM,
        "total": len(entries),
        "datasets": datasets,
    }
    return entries, header


def load_mix_config(path: str | Path) -> tuple[list[MixSpec], int | None]:
    """Parse a mix spec file.

    Format::

        {"seed": 17,
         "datasets": [{"tag": "asv19", "manifest": "asv19.jsonl", "cap": 2000}, ...]}

    Relative manifest paths resolve against the spec file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"mix spec not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
        specs = []
        for d in cfg["datasets"]:
            manifest = Path(d["manifest"])
            if not manifest.is_absolute():
                manifest = path.parent / manifest
            specs.append(
                MixSpec(
                    dataset_tag=str(d["tag"]),
                    manifest=str(manifest),
                    cap=int(d["cap"]),
                    seed=d.get("seed"),
                    stratify_key=d.get("stratify_key", "label"),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid mix spec {path}: {exc}") from None
    if len({s.dataset_tag for s in specs}) != len(specs):
        raise ConfigError("dataset tags in a mix spec must be unique")
    return specs, cfg.get("seed")


def mix_files(
    specs: Sequence[MixSpec],
    seed: int,
    out: str | Path,
    annotations_out: str | Path | None = None,
) -> dict[str, Any]:
    """Read the referenced manifests, mix them and write the result.

    With ``annotations_out`` the ground-truth records are also written as
    ``sample_id<TAB>canonical JSON`` lines, the same shape as a
    predictions file.
    """
    loaded = [(read_manifest(s.manifest)[0], s) for s in specs]
    entries, header = build_mixed_manifest(loaded, seed)
    write_manifest(out, entries, header)
    if annotations_out is not None:
        Path(annotations_out).parent.mkdir(parents=True, exist_ok=True)
        with open(annotations_out, "w", encoding="utf-8", newline="\n") as fh:
            for e in entries:
                fh.write(f"{e.sample_id}\t{serialize_analysis(e.to_record())}\n")
    return header
