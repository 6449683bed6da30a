"""Dialogue spoofing curation: writer/checker loop, semantic annotation and judging."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Any, Callable, Iterable, Mapping, Sequence

from .annotation import AnalysisRecord, serialize_analysis
from .dialogue import Dialogue, natural_key
from .errors import (
    DataError,
    DialogueFailedError,
    HoliSpoofError,
    IndexOutOfRangeError,
    InvalidExampleRecordError,
    ScoreParseFailureError,
    SpanNotFoundError,
    StructuredOutputFailureError,
)
from .gateway import ChatRequest, LLMGateway, Message
from .metrics import judge_aggregate

log = logging.getLogger(__name__)

MAX_ITERS = 3
JUDGE_QUERIES = 3


@dataclass(frozen=True)
class RoleSettings:
    model: str
    temperature: float
    max_output_tokens: int = 1024


DEFAULT_ROLES: dict[str, RoleSettings] = {
    "writer": RoleSettings("gemini-2.5-flash-thinking", 0.8),
    "checker": RoleSettings("gemini-2.5-flash", 0.0),
    "annotator": RoleSettings("gemini-2.5-flash-thinking", 0.2),
    "judge": RoleSettings("gemini-3-flash", 0.0, 16),
}


def roles_from_dict(d: Mapping[str, Any] | None) -> dict[str, RoleSettings]:
    roles = dict(DEFAULT_ROLES)
    for name, settings in (d or {}).items():
        if name not in roles:
            raise ValueError(f"unknown role {name!r}")
        roles[name] = RoleSettings(**{**asdict(roles[name]), **settings})
    return roles


def _template(name: str) -> str:
    return resources.files(__package__).joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


def render(template: str, values: Mapping[str, str]) -> str:
    """Replace ``[Placeholder]`` markers in one pass.

    Substituted text is never re-scanned, so dialogue content that happens
    to look like a placeholder is left alone.
    """
    pattern = re.compile("|".join(re.escape(f"[{k}]") for k in values))
    return pattern.sub(lambda m: values[m.group(0)[1:-1]], template)


def render_writer_prompt(dialogue: Dialogue) -> str:
    return render(_template("writer"), {"Dialogue": dialogue.indexed_lines()})


def render_checker_prompt(dialogue: Dialogue, target_idx: int, modified_text: str) -> str:
    return render(
        _template("checker"),
        {
            "Original Dialogue": dialogue.indexed_lines(),
            "Modified Dialogue": dialogue.indexed_lines({target_idx: modified_text}),
            "Modified Utterance Index": str(target_idx),
        },
    )


def render_judge_prompt(original_text: str, original_span: str, new_span: str, model_analysis: str) -> str:
    return render(
        _template("judge"),
        {
            "The entire speech transcription": original_text,
            "Original word/sentence": original_span,
            "New word/sentence": new_span,
            "Model output": model_analysis,
        },
    )


def render_semantic_prompt(text: str, modified_span: str, span_kind: str, input_kind: str) -> str:
    return render(
        _template("semantic"),
        {"Input Kind": input_kind, "Span Kind": span_kind, "Manipulated Text": text, "Modified Span": modified_span},
    )


def _request(role: RoleSettings, *messages: Message) -> ChatRequest:
    return ChatRequest(role.model, messages, role.temperature, role.max_output_tokens)


@dataclass(frozen=True)
class EditProposal:
    target_utterance_idx: int
    modified_text: str
    raw: str  # the writer's JSON, replayed to it on retry


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    reason: str


@dataclass(frozen=True)
class SpoofEdit:
    dialogue_id: str
    target_utterance_idx: int
    original_text: str
    modified_text: str
    iterations_used: int
    verdict: str  # "accepted" | "discarded"
    checker_reason: str
    checker_reasons: tuple[str, ...] = ()
    semantic_influence: str | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["checker_reasons"] = list(self.checker_reasons)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SpoofEdit":
        d = dict(d)
        d["checker_reasons"] = tuple(d.get("checker_reasons") or ())
        return cls(**d)


WRITER_FEEDBACK = (
    "The checker rejected this modification: {reason}\n"
    "Propose a new modification that follows all of the rules above. "
    "Output only the JSON object."
)


def _coerce_index(value: Any) -> int:
    if isinstance(value, bool):
        raise StructuredOutputFailureError(f"target_utterance_idx is not an integer: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and re.fullmatch(r"\s*\d+\s*", value):
        return int(value)
    raise StructuredOutputFailureError(f"target_utterance_idx is not an integer: {value!r}")


def propose_edit(
    dialogue: Dialogue,
    gateway: LLMGateway,
    roles: Mapping[str, RoleSettings] = DEFAULT_ROLES,
    history: Sequence[tuple[EditProposal, str]] = (),
) -> EditProposal:
    """Ask the writer for one malicious utterance edit.

    ``history`` holds earlier (proposal, checker reason) pairs; each is
    replayed as the writer's reply followed by the checker's feedback.
    """
    if len(dialogue) < 2:
        raise DataError(f"dialogue {dialogue.dialogue_id} needs at least 2 utterances")
    messages = [Message("user", render_writer_prompt(dialogue))]
    for proposal, reason in history:
        messages.append(Message("assistant", proposal.raw))
        messages.append(Message("user", WRITER_FEEDBACK.format(reason=reason)))
    obj = gateway.complete_json(_request(roles["writer"], *messages), ["target_utterance_idx", "modified_text"])
    idx = _coerce_index(obj["target_utterance_idx"])
    text = obj["modified_text"]
    if not isinstance(text, str) or not text.strip():
        raise StructuredOutputFailureError("modified_text must be a non-empty string")
    if not 0 <= idx < len(dialogue):
        raise IndexOutOfRangeError(
            f"writer chose utterance {idx} in {len(dialogue)}-utterance dialogue {dialogue.dialogue_id}"
        )
    raw = json.dumps({"target_utterance_idx": idx, "modified_text": text}, ensure_ascii=False)
    return EditProposal(idx, text.strip(), raw)


_TRUE = {"true", "yes", "1", "pass", "passed"}
_FALSE = {"false", "no", "0", "fail", "failed"}


def _coerce_passed(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        v = value.strip().lower()
        if v in _TRUE:
            return True
        if v in _FALSE:
            return False
    raise StructuredOutputFailureError(f"checker 'passed' is not a boolean: {value!r}")


def check_edit(
    dialogue: Dialogue,
    candidate: EditProposal,
    gateway: LLMGateway,
    roles: Mapping[str, RoleSettings] = DEFAULT_ROLES,
) -> CheckResult:
    if not 0 <= candidate.target_utterance_idx < len(dialogue):
        raise IndexOutOfRangeError(f"utterance {candidate.target_utterance_idx} not in dialogue")
    prompt = render_checker_prompt(dialogue, candidate.target_utterance_idx, candidate.modified_text)
    obj = gateway.complete_json(_request(roles["checker"], Message("user", prompt)), ["passed", "reason"])
    return CheckResult(_coerce_passed(obj["passed"]), str(obj["reason"]))


def run_edit_loop(
    dialogue: Dialogue,
    gateway: LLMGateway,
    max_iters: int = MAX_ITERS,
    roles: Mapping[str, RoleSettings] = DEFAULT_ROLES,
) -> SpoofEdit:
    """Alternate writer proposals and checker verdicts until one passes.

    Returns an accepted edit on the first pass; after ``max_iters``
    rejections the last proposal is returned as discarded. Errors are
    re-raised as :class:`DialogueFailedError` carrying the dialogue id.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    history: list[tuple[EditProposal, str]] = []
    try:
        for iteration in range(1, max_iters + 1):
            proposal = propose_edit(dialogue, gateway, roles, history)
            result = check_edit(dialogue, proposal, gateway, roles)
            reasons = tuple(r for _, r in history) + (result.reason,)
            if result.passed or iteration == max_iters:
                edit = SpoofEdit(
                    dialogue_id=dialogue.dialogue_id,
                    target_utterance_idx=proposal.target_utterance_idx,
                    original_text=dialogue.utterances[proposal.target_utterance_idx].text,
                    modified_text=proposal.modified_text,
                    iterations_used=iteration,
                    verdict="accepted" if result.passed else "discarded",
                    checker_reason=result.reason,
                    checker_reasons=reasons,
                )
                if not result.passed:
                    log.info("dialogue %s discarded; checker reasons: %s", dialogue.dialogue_id, list(reasons))
                return edit
            history.append((proposal, result.reason))
    except HoliSpoofError as exc:
        raise DialogueFailedError(dialogue.dialogue_id, exc) from exc
    raise AssertionError("unreachable")


def annotate_semantic_influence(
    text: str,
    modified_span: str,
    gateway: LLMGateway,
    roles: Mapping[str, RoleSettings] = DEFAULT_ROLES,
    span_kind: str = "sentence",
    input_kind: str = "dialogue",
    max_reasks: int = 2,
) -> str:
    """Free-text analysis of how the modified span changes the meaning.

    ``span_kind`` is "sentence" for whole-utterance edits or "word(s)" for
    word-level edits.
    """
    if modified_span not in text:
        raise SpanNotFoundError(f"modified span {modified_span!r} does not occur in the text")
    request = _request(roles["annotator"], Message("user", render_semantic_prompt(text, modified_span, span_kind, input_kind)))
    for _ in range(max_reasks + 1):
        reply = gateway.complete(request).strip()
        if reply:
            return reply
        log.info("annotator returned an empty reply; asking again")
    raise StructuredOutputFailureError("annotator returned an empty analysis")


def annotate_edit(
    dialogue: Dialogue,
    edit: SpoofEdit,
    gateway: LLMGateway,
    roles: Mapping[str, RoleSettings] = DEFAULT_ROLES,
) -> str:
    text = dialogue.indexed_lines({edit.target_utterance_idx: edit.modified_text})
    return annotate_semantic_influence(text, edit.modified_text, gateway, roles)


@dataclass(frozen=True)
class JudgeVerdict:
    scores: tuple[int | None, ...]
    mean: float | None
    failures: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"scores": list(self.scores), "mean": self.mean, "failures": list(self.failures)}


JUDGE_CORRECTION = "Output only the score as a single integer from 1 to 5, with no other text."
_SCORE = re.compile(r"[1-5]")


def _judge_once(gateway: LLMGateway, request: ChatRequest) -> int:
    reply = gateway.complete(request)
    if _SCORE.fullmatch(reply.strip()):
        return int(reply.strip())
    retry = request.followed_by(Message("assistant", reply), Message("user", JUDGE_CORRECTION))
    second = gateway.complete(retry)
    if _SCORE.fullmatch(second.strip()):
        return int(second.strip())
    raise ScoreParseFailureError(f"judge replies {reply[:40]!r}, {second[:40]!r} are not a bare 1-5 score")


def judge_semantic_analysis(
    original_text: str,
    original_span: str,
    new_span: str,
    model_analysis: str,
    gateway: LLMGateway,
    roles: Mapping[str, RoleSettings] = DEFAULT_ROLES,
) -> JudgeVerdict:
    """Query the judge three times independently and average the scores.

    A query whose reply is still not a bare integer after one re-ask is
    recorded as a failure; the mean is only reported when all three
    queries produced a score.
    """
    if not (original_text.strip() and (original_span.strip() or new_span.strip()) and model_analysis.strip()):
        raise DataError("judge inputs must be non-empty")
    prompt = render_judge_prompt(original_text, original_span, new_span, model_analysis)
    request = _request(roles["judge"], Message("user", prompt))
    scores: list[int | None] = []
    failures: list[str] = []
    for q in range(JUDGE_QUERIES):
        try:
            scores.append(_judge_once(gateway, request))
        except ScoreParseFailureError as exc:
            scores.append(None)
            failures.append(f"query {q + 1}: {exc}")
    mean = judge_aggregate(scores) if not failures else None
    return JudgeVerdict(tuple(scores), mean, tuple(failures))


@dataclass(frozen=True)
class PlanItem:
    kind: str  # "audio" | "text"
    content: str


ICL_INSTRUCTION = (
    "Analyze whether the last audio clip is real or spoofed, following the format of the examples above. "
    "Output the analysis as a single JSON object."
)


def assemble_icl_context(
    examples: Sequence[tuple[str, AnalysisRecord]],
    target_audio_ref: str,
    instruction: str = ICL_INSTRUCTION,
) -> list[PlanItem]:
    """Lay out in-context examples as alternating audio/annotation items,
    then the target audio and the instruction."""
    if not examples:
        raise InvalidExampleRecordError("at least one in-context example is required")
    plan: list[PlanItem] = []
    for audio_ref, record in examples:
        try:
            text = serialize_analysis(record)
        except DataError as exc:
            raise InvalidExampleRecordError(f"example {audio_ref}: {exc}") from None
        plan.append(PlanItem("audio", audio_ref))
        plan.append(PlanItem("text", text))
    plan.append(PlanItem("audio", target_audio_ref))
    plan.append(PlanItem("text", instruction))
    return plan


@dataclass
class CurationOutcome:
    edits: list[SpoofEdit] = field(default_factory=list)
    failures: list[DialogueFailedError] = field(default_factory=list)

    @property
    def accepted(self) -> list[SpoofEdit]:
        return [e for e in self.edits if e.accepted]


def curate_dialogues(
    dialogues: Iterable[Dialogue],
    gateway: LLMGateway,
    max_iters: int = MAX_ITERS,
    roles: Mapping[str, RoleSettings] = DEFAULT_ROLES,
    annotate: bool = True,
    workers: int | None = None,
    on_result: Callable[[SpoofEdit], None] | None = None,
) -> CurationOutcome:
    """Run the edit loop (and optional annotation) over many dialogues.

    Dialogues run concurrently up to the gateway's in-flight bound; the
    result is ordered by dialogue id whatever the completion order.
    ``on_result`` sees each edit as soon as it completes.
    """
    dialogues = list(dialogues)
    workers = workers or gateway.config.max_in_flight

    def one(d: Dialogue) -> SpoofEdit:
        edit = run_edit_loop(d, gateway, max_iters, roles)
        if annotate and edit.accepted:
            try:
                analysis = annotate_edit(d, edit, gateway, roles)
            except HoliSpoofError as exc:
                raise DialogueFailedError(d.dialogue_id, exc) from exc
            edit = SpoofEdit(**{**edit.__dict__, "semantic_influence": analysis})
        return edit

    outcome = CurationOutcome()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(one, d) for d in dialogues]
        try:
            for fut in as_completed(futures):
                try:
                    edit = fut.result()
                except DialogueFailedError as exc:
                    log.error("%s", exc)
                    outcome.failures.append(exc)
                    continue
                outcome.edits.append(edit)
                if on_result is not None:
                    on_result(edit)
        except BaseException:
            for fut in futures:
                fut.cancel()
            raise
    outcome.edits.sort(key=lambda e: natural_key(e.dialogue_id))
    outcome.failures.sort(key=lambda f: natural_key(str(f.dialogue_id)))
    return outcome
