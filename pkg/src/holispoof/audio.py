"""PCM16 mono WAV I/O, speech-prompt selection, TTS calls and cut-and-paste splicing."""

from __future__ import annotations

import base64
import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Sequence

import httpx
import numpy as np

from .annotation import TimeInterval
from .errors import (
    BadMagicError,
    ConfigError,
    IndexOutOfRangeError,
    InvalidHeaderError,
    RateMismatchError,
    RequestRejectedError,
    SynthesisFailureError,
    TruncatedFileError,
    UnsupportedFormatError,
    WavError,
)
from .transport import RetryPolicy, post_with_retry, resolve_transport

if TYPE_CHECKING:
    from .dialogue import Dialogue, Utterance

log = logging.getLogger(__name__)

PCM_FORMAT = 1
# Strictly longer than this and the target utterance is its own prompt.
PROMPT_MIN_S = 2.0


@dataclass(frozen=True, eq=False)
class Waveform:
    sample_rate_hz: int
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise WavError("sample rate must be positive")
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise WavError("only mono waveforms are supported")
        if samples.dtype != np.int16:
            if samples.size and (samples.min() < -32768 or samples.max() > 32767):
                raise WavError("samples exceed the 16-bit range")
            samples = samples.astype(np.int16)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(self.samples, other.samples)

    def __repr__(self):
        return f"Waveform(sample_rate_hz={self.sample_rate_hz}, samples=<{len(self)}>)"


@dataclass(frozen=True)
class _WavLayout:
    sample_rate_hz: int
    data_offset: int
    data_size: int


def _parse_layout(data: bytes) -> _WavLayout:
    if len(data) < 12:
        raise TruncatedFileError("file shorter than a RIFF header")
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise BadMagicError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if chunk_id == b"fmt ":
            if size < 16:
                raise InvalidHeaderError(f"fmt chunk too small ({size} bytes)")
            if body + size > len(data):
                raise TruncatedFileError("fmt chunk runs past end of file")
            fmt = struct.unpack_from("<HHIIHH", data, body)
            code, channels, rate, byte_rate, block_align, bits = fmt
            if code != PCM_FORMAT:
                raise UnsupportedFormatError(f"format code {code} is not integer PCM")
            if bits != 16:
                raise UnsupportedFormatError(f"{bits}-bit samples are not supported")
            if channels != 1:
                raise UnsupportedFormatError(f"{channels} channels; only mono is supported")
            if rate == 0:
                raise InvalidHeaderError("sample rate is zero")
            if block_align != 2 or byte_rate != rate * 2:
                raise InvalidHeaderError("block align / byte rate inconsistent with 16-bit mono")
        elif chunk_id == b"data":
            if fmt is None:
                raise InvalidHeaderError("data chunk precedes fmt chunk")
            if body + size > len(data):
                raise TruncatedFileError(f"data chunk declares {size} bytes, {len(data) - body} present")
            if size % 2:
                raise TruncatedFileError("data chunk ends mid-sample")
            return _WavLayout(fmt[2], body, size)
        pos = body + size + (size & 1)
    if fmt is None:
        raise TruncatedFileError("no fmt chunk found")
    raise TruncatedFileError("no data chunk found")


def parse_wav_bytes(data: bytes) -> Waveform:
    layout = _parse_layout(data)
    samples = np.frombuffer(data, dtype="<i2", count=layout.data_size // 2, offset=layout.data_offset)
    return Waveform(layout.sample_rate_hz, samples.astype(np.int16))


def wav_bytes(wave: Waveform) -> bytes:
    payload = wave.samples.astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        PCM_FORMAT,
        1,
        wave.sample_rate_hz,
        wave.sample_rate_hz * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    return header + payload


def read_wav(path: str | Path) -> Waveform:
    return parse_wav_bytes(Path(path).read_bytes())


def write_wav(path: str | Path, wave: Waveform) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(wav_bytes(wave))


def wav_duration(path: str | Path) -> float:
    layout = _parse_layout(Path(path).read_bytes())
    return layout.data_size / 2 / layout.sample_rate_hz


@dataclass(frozen=True)
class PromptChoice:
    utterance: "Utterance"
    warning: str | None = None


def select_prompt_utterance(dialogue: "Dialogue", target_idx: int) -> PromptChoice:
    """Pick the speech prompt used to clone the target speaker's voice.

    The target utterance itself when it lasts more than 2 s; otherwise the
    longest other utterance by the same speaker (earliest on ties). A
    speaker with no other utterance falls back to the target with a warning.
    """
    if not 0 <= target_idx < len(dialogue):
        raise IndexOutOfRangeError(f"utterance {target_idx} not in dialogue {dialogue.dialogue_id}")
    target = dialogue.utterances[target_idx]
    if target.duration_s > PROMPT_MIN_S:
        return PromptChoice(target)
    others = [u for u in dialogue.utterances if u.speaker_id == target.speaker_id and u.index != target_idx]
    if not others:
        msg = (
            f"dialogue {dialogue.dialogue_id}: speaker {target.speaker_id} has no other utterance; "
            f"using the {target.duration_s:.2f} s target as prompt"
        )
        log.warning(msg)
        return PromptChoice(target, msg)
    best = max(others, key=lambda u: (u.duration_s, -u.index))
    return PromptChoice(best)


@dataclass(frozen=True)
class TTSConfig:
    endpoint: str = "http://localhost:9880/tts"
    model: str = "zero-shot-tts"
    timeout_s: float = 120.0
    max_retries: int = 3
    backoff_base_s: float = 1.0
    backoff_max_s: float = 30.0
    transport: str | None = None

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None) -> "TTSConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown tts config keys: {sorted(unknown)}")
        return cls(**d)

    def public_dict(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class TTSClient:
    """Zero-shot TTS over HTTP.

    POSTs ``{"model", "text", "prompt_audio": <base64 WAV>, "prompt_text"}``
    and expects a PCM16 mono WAV body back.
    """

    def __init__(
        self,
        config: TTSConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        if transport is None:
            transport = resolve_transport(config.transport)
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)
        self._policy = RetryPolicy(config.max_retries, config.backoff_base_s, config.backoff_max_s)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def synthesize(
        self,
        text: str,
        prompt: Waveform,
        prompt_text: str | None = None,
        expected_rate_hz: int | None = None,
    ) -> Waveform:
        payload = {
            "model": self.config.model,
            "text": text,
            "prompt_audio": base64.b64encode(wav_bytes(prompt)).decode("ascii"),
            "prompt_text": prompt_text,
        }
        try:
            resp = post_with_retry(
                self._client, self.config.endpoint, policy=self._policy, sleep=self._sleep, json=payload
            )
        except RequestRejectedError as exc:
            raise SynthesisFailureError(str(exc)) from None
        try:
            wave = parse_wav_bytes(resp.content)
        except WavError as exc:
            raise SynthesisFailureError(f"TTS service returned unusable audio: {exc}") from None
        if len(wave) == 0:
            raise SynthesisFailureError("TTS service returned empty audio")
        if expected_rate_hz is not None and wave.sample_rate_hz != expected_rate_hz:
            raise RateMismatchError(
                f"TTS returned {wave.sample_rate_hz} Hz audio for a {expected_rate_hz} Hz dialogue"
            )
        return wave


def synthesize(
    tts_config: TTSConfig,
    text: str,
    prompt: Waveform,
    expected_rate_hz: int | None = None,
    transport: httpx.BaseTransport | None = None,
) -> Waveform:
    client = TTSClient(tts_config, transport=transport)
    try:
        return client.synthesize(text, prompt, expected_rate_hz=expected_rate_hz)
    finally:
        client.close()


@dataclass(frozen=True)
class SpliceResult:
    waveform: Waveform
    spoofed_regions: tuple[TimeInterval, ...]
    replaced_utterance_idx: int
    inserted_span: tuple[int, int]  # sample indices [start, end)


def splice_replace(
    dialogue_audio: Sequence[Waveform],
    target_idx: int,
    new_wave: Waveform,
    crossfade_ms: float = 0.0,
) -> SpliceResult:
    """Concatenate utterances with ``new_wave`` substituted at ``target_idx``.

    The default is a hard cut. With ``crossfade_ms > 0`` the inserted audio
    overlaps its neighbours by that much and is blended linearly; the
    overlap is counted inside the spoofed region, so audio outside the
    region is always untouched.
    """
    if not 0 <= target_idx < len(dialogue_audio):
        raise IndexOutOfRangeError(f"utterance {target_idx} not in a {len(dialogue_audio)}-utterance dialogue")
    rate = new_wave.sample_rate_hz
    for w in dialogue_audio:
        if w.sample_rate_hz != rate:
            raise RateMismatchError(f"mixed sample rates: {w.sample_rate_hz} Hz vs {rate} Hz")
    if crossfade_ms < 0:
        raise ValueError("crossfade_ms must be >= 0")

    before = np.concatenate([w.samples for w in dialogue_audio[:target_idx]] or [np.zeros(0, np.int16)])
    after = np.concatenate([w.samples for w in dialogue_audio[target_idx + 1 :]] or [np.zeros(0, np.int16)])
    inserted = new_wave.samples.astype(np.float64)

    n = int(round(crossfade_ms * rate / 1000.0))
    n_head = min(n, before.size, inserted.size // 2)
    n_tail = min(n, after.size, inserted.size - n_head)
    if n_head:
        ramp = np.linspace(0.0, 1.0, n_head + 2)[1:-1]
        inserted[:n_head] = inserted[:n_head] * ramp + before[-n_head:] * (1.0 - ramp)
    if n_tail:
        ramp = np.linspace(1.0, 0.0, n_tail + 2)[1:-1]
        inserted[-n_tail:] = inserted[-n_tail:] * ramp + after[:n_tail] * (1.0 - ramp)
    inserted_pcm = np.clip(np.rint(inserted), -32768, 32767).astype(np.int16)

    head = before[: before.size - n_head]
    tail = after[n_tail:]
    out = np.concatenate([head, inserted_pcm, tail])
    start, end = head.size, head.size + inserted_pcm.size
    region = TimeInterval(start / rate, end / rate)
    return SpliceResult(Waveform(rate, out), (region,), target_idx, (start, end))


def concatenate(dialogue_audio: Sequence[Waveform]) -> Waveform:
    rates = {w.sample_rate_hz for w in dialogue_audio}
    if len(rates) != 1:
        raise RateMismatchError(f"mixed sample rates: {sorted(rates)}")
    return Waveform(rates.pop(), np.concatenate([w.samples for w in dialogue_audio]))
