"""Pipeline configuration file (JSON) shared by all CLI commands.

Example::

    {
      "gateway": {"base_url": "https://llm.example/v1", "max_retries": 3, "transport": "http"},
      "roles": {"writer": {"model": "my-reasoning-model"}},
      "tts": {"endpoint": "http://tts.local/synthesize", "model": "zero-shot-tts"},
      "paths": {"dialogue_dir": "data/dailytalk", "output_dir": "out"},
      "curation": {"max_iters": 3, "annotate": true},
      "assembly": {"dataset_tag": "dailytalkedit", "include_real": true, "crossfade_ms": 0},
      "evaluation": {"resolution_s": 0.2},
      "seeds": {"mix": 17}
    }

Credentials are never read from this file; see :mod:`holispoof.gateway`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .audio import TTSConfig
from .curation import RoleSettings, roles_from_dict
from .errors import ConfigError
from .gateway import GatewayConfig
from .metrics import DEFAULT_RESOLUTION_S

SECTIONS = {"gateway", "roles", "tts", "paths", "curation", "assembly", "evaluation", "seeds", "mix"}


@dataclass
class PipelineConfig:
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    roles: dict[str, RoleSettings] = field(default_factory=lambda: roles_from_dict(None))
    tts: TTSConfig = field(default_factory=TTSConfig)
    paths: dict[str, str] = field(default_factory=dict)
    curation: dict[str, Any] = field(default_factory=dict)
    assembly: dict[str, Any] = field(default_factory=dict)
    evaluation: dict[str, Any] = field(default_factory=dict)
    seeds: dict[str, int] = field(default_factory=dict)
    mix: dict[str, Any] = field(default_factory=dict)
    raw: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def resolution_s(self) -> float:
        return float(self.evaluation.get("resolution_s", DEFAULT_RESOLUTION_S))

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def path(self, key: str) -> Path | None:
        value = self.paths.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def _anchor_transport(section: dict[str, Any] | None, base: Path) -> dict[str, Any] | None:
    """Resolve a relative ``mock:<dir>`` transport against the config file."""
    if not section or not isinstance(section.get("transport"), str):
        return section
    spec = section["transport"]
    if spec.startswith("mock:") and not Path(spec[5:]).is_absolute():
        return {**section, "transport": f"mock:{base / spec[5:]}"}
    return section


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig(gateway=GatewayConfig.from_dict({}))
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - SECTIONS
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    try:
        seeds = {k: int(v) for k, v in raw.get("seeds", {}).items()}
        return PipelineConfig(
            gateway=GatewayConfig.from_dict(_anchor_transport(raw.get("gateway"), path.parent)),
            roles=roles_from_dict(raw.get("roles")),
            tts=TTSConfig.from_dict(_anchor_transport(raw.get("tts"), path.parent)),
            paths=dict(raw.get("paths", {})),
            curation=dict(raw.get("curation", {})),
            assembly=dict(raw.get("assembly", {})),
            evaluation=dict(raw.get("evaluation", {})),
            seeds=seeds,
            mix=dict(raw.get("mix", {})),
            raw=raw,
            base_dir=path.parent,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
