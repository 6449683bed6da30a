"""Turn accepted text edits into spoofed dialogue audio with region labels."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .annotation import Label, SpoofMethod
from .audio import TTSClient, concatenate, read_wav, select_prompt_utterance, splice_replace, write_wav
from .curation import SpoofEdit
from .dialogue import load_dialogue
from .errors import ConfigError, DialogueFailedError, HoliSpoofError
from .manifest import ManifestEntry

log = logging.getLogger(__name__)

DEFAULT_TAG = "dailytalkedit"


@dataclass
class AssemblyOutcome:
    entries: list[ManifestEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    failures: list[DialogueFailedError] = field(default_factory=list)


def assemble_edit(
    edit: SpoofEdit,
    dialogue_root: str | Path,
    tts: TTSClient,
    out_dir: str | Path,
    dataset_tag: str = DEFAULT_TAG,
    include_real: bool = True,
    crossfade_ms: float = 0.0,
) -> tuple[list[ManifestEntry], str | None]:
    """Synthesize the edited utterance, splice it in and write the WAVs.

    Returns the manifest entries (bona fide dialogue first when
    ``include_real``) and the prompt-selection warning, if any.
    """
    dialogue_dir = Path(dialogue_root) / edit.dialogue_id
    if not dialogue_dir.is_dir():
        raise ConfigError(f"dialogue directory not found: {dialogue_dir}")
    dialogue = load_dialogue(dialogue_dir)
    waves = [read_wav(u.audio_path) for u in dialogue.utterances]
    rate = waves[0].sample_rate_hz

    choice = select_prompt_utterance(dialogue, edit.target_utterance_idx)
    prompt = waves[choice.utterance.index]
    new_wave = tts.synthesize(edit.modified_text, prompt, prompt_text=choice.utterance.text, expected_rate_hz=rate)
    result = splice_replace(waves, edit.target_utterance_idx, new_wave, crossfade_ms)

    out_dir = Path(out_dir)
    entries = []
    if include_real:
        real = concatenate(waves)
        real_path = out_dir / f"{edit.dialogue_id}_real.wav"
        write_wav(real_path, real)
        entries.append(
            ManifestEntry(
                sample_id=f"{edit.dialogue_id}_real",
                audio_path=str(real_path),
                label=Label.REAL,
                dataset_tag=dataset_tag,
                duration_s=real.duration_s,
            )
        )
    fake_path = out_dir / f"{edit.dialogue_id}_fake.wav"
    write_wav(fake_path, result.waveform)
    entries.append(
        ManifestEntry(
            sample_id=f"{edit.dialogue_id}_fake",
            audio_path=str(fake_path),
            label=Label.FAKE,
            method=SpoofMethod.CUT_AND_PASTE,
            regions=result.spoofed_regions,
            dataset_tag=dataset_tag,
            duration_s=result.waveform.duration_s,
            semantic_influence=edit.semantic_influence,
        )
    )
    return entries, choice.warning


def assemble_edits(
    edits: Iterable[SpoofEdit],
    dialogue_root: str | Path,
    tts: TTSClient,
    out_dir: str | Path,
    dataset_tag: str = DEFAULT_TAG,
    include_real: bool = True,
    crossfade_ms: float = 0.0,
) -> AssemblyOutcome:
    """Assemble every accepted edit; discarded edits are skipped."""
    outcome = AssemblyOutcome()
    for edit in edits:
        if not edit.accepted:
            continue
        try:
            entries, warning = assemble_edit(
                edit, dialogue_root, tts, out_dir, dataset_tag, include_real, crossfade_ms
            )
        except ConfigError:
            raise
        except HoliSpoofError as exc:
            err = DialogueFailedError(edit.dialogue_id, exc)
            log.error("%s", err)
            outcome.failures.append(err)
            continue
        outcome.entries.extend(entries)
        if warning:
            outcome.warnings.append(warning)
    return outcome
