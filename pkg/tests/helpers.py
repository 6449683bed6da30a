"""Fixture builders shared by the test modules."""

from __future__ import annotations

import json
import math
import wave
from pathlib import Path

import httpx

from holispoof.gateway import GatewayConfig, LLMGateway
from holispoof.transport import chat_completion_body

RATE = 16000

WRITER_MARK = "You are simulating a malicious spoof attack"
CHECKER_MARK = "You are a dialogue coherence checker"
ANNOTATOR_MARK = "You are an expert in speech content security"
JUDGE_MARK = "You are a senior expert in audio spoofing detection"

# (criterion number, verdict line) pairs filled by test_acceptance
ACCEPTANCE_LINES: list[tuple[int, str]] = []


def tone_samples(n, freq=220.0, amp=8000, phase=0):
    return [int(round(amp * math.sin(2 * math.pi * freq * (i + phase) / RATE))) for i in range(n)]


def write_pcm16(path, samples, rate=RATE):
    """Write a mono PCM16 WAV with the stdlib writer (independent of the package)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(b"".join(int(s).to_bytes(2, "little", signed=True) for s in samples))


def read_pcm16(path):
    with wave.open(str(path), "rb") as w:
        rate = w.getframerate()
        data = w.readframes(w.getnframes())
    return rate, [int.from_bytes(data[i : i + 2], "little", signed=True) for i in range(0, len(data), 2)]


def make_dialogue_dir(root, dialogue_id, utterances, rate=RATE):
    """``utterances``: (speaker, text, duration_s) triples, DailyTalk layout."""
    d = Path(root) / str(dialogue_id)
    d.mkdir(parents=True, exist_ok=True)
    for idx, (speaker, text, dur) in enumerate(utterances):
        stem = f"{idx}_{speaker}_d{dialogue_id}"
        n = int(round(dur * rate))
        write_pcm16(d / f"{stem}.wav", tone_samples(n, 200.0 + 40 * idx, phase=idx * 7), rate)
        (d / f"{stem}.txt").write_text(text + "\n", encoding="utf-8")
    return d


class ChatScript:
    """Mock chat service routed by prompt role.

    ``replies`` maps a role name to a list of replies (strings are chat
    contents; ints are HTTP status codes). The last reply repeats.
    """

    MARKS = {"writer": WRITER_MARK, "checker": CHECKER_MARK, "annotator": ANNOTATOR_MARK, "judge": JUDGE_MARK}

    def __init__(self, **replies):
        self.replies = replies
        self.calls = []  # (role, payload)

    def role_of(self, payload):
        first = payload["messages"][0]["content"]
        for role, mark in self.MARKS.items():
            if first.startswith(mark) or mark in first:
                return role
        return "other"

    def count(self, role):
        return sum(1 for r, _ in self.calls if r == role)

    def __call__(self, request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content)
        role = self.role_of(payload)
        n = self.count(role)
        self.calls.append((role, payload))
        seq = self.replies.get(role) or self.replies.get("other") or [""]
        reply = seq[min(n, len(seq) - 1)]
        if callable(reply):
            reply = reply(payload)
        if isinstance(reply, int):
            return httpx.Response(reply, json={"error": "scripted"})
        return httpx.Response(200, json=chat_completion_body(reply))


def make_gateway(handler, **config):
    cfg = GatewayConfig(base_url="http://mock.local/v1", **config)
    return LLMGateway(cfg, transport=httpx.MockTransport(handler), sleep=lambda s: None)


def writer_json(idx, text):
    return json.dumps({"target_utterance_idx": idx, "modified_text": text})


def checker_json(passed, reason="ok"):
    return json.dumps({"passed": passed, "reason": reason})


# Durations are whole milliseconds so splice boundaries survive 3-decimal serialization.
PIPELINE_DIALOGUES = [
    [("0", "Did you lock the back door before leaving?", 1.5), ("1", "Yes, and I set the alarm.", 1.25),
     ("0", "Great, see you at dinner.", 2.5)],
    [("0", "Your flight leaves at nine tomorrow.", 2.25), ("1", "Then I'll get a taxi at seven.", 1.75)],
    [("1", "Can I borrow your car this weekend?", 1.0), ("0", "Sure, the keys are on the hook.", 1.5),
     ("1", "Thanks, I'll fill the tank.", 0.75), ("0", "No problem.", 2.125)],
    [("0", "The doctor said to take two pills a day.", 2.0), ("1", "Only after meals, right?", 1.125),
     ("0", "Yes, exactly.", 0.875)],
    [("1", "Is the store open on Sunday?", 1.375), ("0", "Only until noon.", 1.625),
     ("1", "Then I'll go early.", 2.5)],
]


def write_llm_fixtures(root, *, checker_passes=True, judge=None):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rules = {
        "10_writer": {"match": WRITER_MARK, "responses": [writer_json(1, "Actually, I changed my mind completely.")]},
        "20_checker": {"match": CHECKER_MARK, "responses": [checker_json(checker_passes, "coherent" if checker_passes else "contradiction")]},
        "30_annotator": {"match": ANNOTATOR_MARK, "responses": ["The edit reverses what the speaker agreed to."]},
    }
    for name, spec in (judge or {}).items():
        rules[name] = spec
    for name, rule in rules.items():
        (root / f"{name}.json").write_text(json.dumps(rule), encoding="utf-8")
    return root


def write_tts_fixtures(root, duration_s=1.25):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_pcm16(root / "response.wav", tone_samples(int(round(duration_s * RATE)), 330.0))
    (root / "tts.json").write_text(json.dumps({"match": None, "responses": [{"file": "response.wav"}]}))
    return root


def build_pipeline_fixture(root, n_dialogues=5, **llm):
    root = Path(root)
    data = root / "dailytalk"
    for i, utts in enumerate(PIPELINE_DIALOGUES[:n_dialogues]):
        make_dialogue_dir(data, str(i), utts)
    write_llm_fixtures(root / "mock_llm", **llm)
    write_tts_fixtures(root / "mock_tts")
    config = {
        "gateway": {"base_url": "http://llm.invalid/v1", "transport": "mock:mock_llm", "max_retries": 0},
        "tts": {"endpoint": "http://tts.invalid/synthesize", "transport": "mock:mock_tts", "max_retries": 0},
        "paths": {"dialogue_dir": "dailytalk", "output_dir": "out"},
        "curation": {"max_iters": 3},
        "seeds": {"mix": 17},
    }
    (root / "config.json").write_text(json.dumps(config, indent=2))
    return root / "config.json"
