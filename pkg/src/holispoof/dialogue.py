"""Multi-turn dialogues with per-utterance audio.

On disk a dialogue corpus follows the DailyTalk layout::

    <root>/<dialogue_id>/<utt_idx>_<speaker_id>_d<dialogue_id>.wav
    <root>/<dialogue_id>/<utt_idx>_<speaker_id>_d<dialogue_id>.txt
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError

_UTT_NAME = re.compile(r"^(?P<idx>\d+)_(?P<speaker>[^_]+)_d(?P<dialogue>.+)$")


@dataclass(frozen=True)
class Utterance:
    index: int
    speaker_id: str
    text: str
    audio_path: str
    duration_s: float


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        for expected, utt in enumerate(self.utterances):
            if utt.index != expected:
                raise DataError(f"dialogue {self.dialogue_id}: utterance indices must run 0..n-1")
            if not utt.duration_s > 0:
                raise DataError(f"dialogue {self.dialogue_id}: utterance {utt.index} has no duration")

    def __len__(self):
        return len(self.utterances)

    def indexed_lines(self, replace: dict[int, str] | None = None) -> str:
        """One ``[i] text`` line per utterance, optionally substituting texts."""
        replace = replace or {}
        return "\n".join(f"[{u.index}] {replace.get(u.index, u.text)}" for u in self.utterances)

    @property
    def text(self) -> str:
        return "\n".join(u.text for u in self.utterances)


def natural_key(name: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


def load_dialogue(directory: str | Path) -> Dialogue:
    from .audio import wav_duration

    directory = Path(directory)
    utterances = []
    for wav in directory.glob("*.wav"):
        m = _UTT_NAME.match(wav.stem)
        if m is None:
            raise DataError(f"unexpected utterance file name {wav.name}")
        txt = wav.with_suffix(".txt")
        if not txt.is_file():
            raise DataError(f"missing transcript for {wav}")
        utterances.append(
            Utterance(
                index=int(m["idx"]),
                speaker_id=m["speaker"],
                text=txt.read_text(encoding="utf-8").strip(),
                audio_path=str(wav),
                duration_s=wav_duration(wav),
            )
        )
    utterances.sort(key=lambda u: u.index)
    return Dialogue(directory.name, tuple(utterances))


def load_dialogues(root: str | Path) -> list[Dialogue]:
    """Load every dialogue directory under ``root``, ordered by dialogue id."""
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"dialogue directory not found: {root}")
    dirs = sorted((d for d in root.iterdir() if d.is_dir()), key=lambda d: natural_key(d.name))
    return [load_dialogue(d) for d in dirs]
