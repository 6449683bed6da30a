import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holispoof.annotation import (
    AnalysisRecord,
    Label,
    SpoofMethod,
    TimeInterval,
    normalize_regions,
    parse_analysis,
    serialize_analysis,
    validate_record,
)
from holispoof.errors import (
    InconsistentRecordError,
    InvariantViolationError,
    MalformedIntervalError,
    MissingAuthenticityKeyError,
    NoJsonFoundError,
    UnknownMethodError,
)
from oracles import union_intervals

MODEL_METHODS = [m for m in SpoofMethod if m is not SpoofMethod.UNKNOWN]

ms_interval = st.tuples(st.integers(0, 60_000), st.integers(1, 5_000)).map(
    lambda t: TimeInterval(t[0] / 1000, (t[0] + t[1]) / 1000)
)


@st.composite
def records(draw):
    if draw(st.booleans()):
        return AnalysisRecord(Label.REAL)
    return AnalysisRecord(
        Label.FAKE,
        draw(st.one_of(st.none(), st.sampled_from(MODEL_METHODS))),
        draw(st.lists(ms_interval, max_size=6)),
        draw(st.one_of(st.none(), st.text(max_size=80))),
    )


def test_parse_real_minimal():
    r = parse_analysis('{"real_or_fake": "real"}')
    assert r == AnalysisRecord(Label.REAL)
    assert r.method is None and r.regions == ()


def test_parse_embedded_in_prose():
    r = parse_analysis('Sure! {"real_or_fake": "fake", "spoof_method": "tts", "spoof_regions": [[0.0, 1.0]]}')
    assert r == AnalysisRecord(Label.FAKE, SpoofMethod.TTS, (TimeInterval(0.0, 1.0),))


def test_parse_reversed_interval():
    with pytest.raises(MalformedIntervalError):
        parse_analysis('{"real_or_fake": "fake", "spoof_regions": [[2.0, 1.0]]}')


@pytest.mark.parametrize(
    "raw, err",
    [
        ("The audio sounds natural to me.", NoJsonFoundError),
        ('{"verdict": "fake"}', MissingAuthenticityKeyError),
        ('{"real_or_fake": "fake", "spoof_regions": [[-0.5, 1.0]]}', MalformedIntervalError),
        ('{"real_or_fake": "real", "spoof_regions": [[0.0, 1.0]]}', InconsistentRecordError),
        ('{"real_or_fake": "fake", "spoof_method": "telepathy"}', UnknownMethodError),
    ],
)
def test_parse_errors(raw, err):
    with pytest.raises(err):
        parse_analysis(raw)


def test_parse_code_fence_and_extra_keys():
    raw = '```json\n{"real_or_fake": "FAKE", "spoof_method": "Speech Editing", "confidence": 0.9}\n```'
    r = parse_analysis(raw)
    assert r.authenticity is Label.FAKE and r.method is SpoofMethod.SPEECH_EDITING


def test_parse_skips_objects_without_key():
    r = parse_analysis('{"note": 1} then {"real_or_fake": "real"}')
    assert r.authenticity is Label.REAL


@pytest.mark.parametrize(
    "alias, method",
    [
        ("cap", SpoofMethod.CUT_AND_PASTE),
        ("Cut-and-Paste", SpoofMethod.CUT_AND_PASTE),
        ("SE", SpoofMethod.SPEECH_EDITING),
        ("speech editing", SpoofMethod.SPEECH_EDITING),
        ("Voice Conversion", SpoofMethod.VC),
        ("vocoder_resynthesis", SpoofMethod.VOCODER_RESYNTHESIS),
        ("CODEC RESYNTHESIS", SpoofMethod.CODEC_RESYNTHESIS),
        ("TTS", SpoofMethod.TTS),
    ],
)
def test_method_aliases(alias, method):
    assert SpoofMethod.parse(alias) is method


def test_serialize_examples():
    assert serialize_analysis(AnalysisRecord(Label.REAL)) == '{"real_or_fake": "real"}'
    rec = AnalysisRecord(Label.FAKE, SpoofMethod.CUT_AND_PASTE, [(1.2, 3.4)])
    assert serialize_analysis(rec) == (
        '{"real_or_fake": "fake", "spoof_method": "cut_and_paste", "spoof_regions": [[1.2, 3.4]]}'
    )


def test_serialize_merges_overlaps():
    rec = AnalysisRecord(Label.FAKE, None, [(0, 2), (1, 3)])
    assert json.loads(serialize_analysis(rec))["spoof_regions"] == [[0.0, 3.0]]


def test_serialize_key_order_and_unicode():
    rec = AnalysisRecord(Label.FAKE, SpoofMethod.VC, [(0.5, 1.0)], "改变了说话人的意图")
    out = serialize_analysis(rec)
    assert list(json.loads(out)) == ["real_or_fake", "spoof_method", "spoof_regions", "semantic_influence"]
    assert "改变" in out and "\n" not in out


def test_serialize_rejects_inconsistent():
    with pytest.raises(InvariantViolationError):
        serialize_analysis(AnalysisRecord(Label.REAL, SpoofMethod.TTS))


def test_validate_examples():
    assert validate_record(AnalysisRecord(Label.FAKE, None, [(0, 1)]), 2.0) == []
    assert [v.kind for v in validate_record(AnalysisRecord(Label.FAKE, None, [(0, 5)]), 2.0)] == ["RegionOutOfBounds"]
    assert [v.kind for v in validate_record(AnalysisRecord(Label.REAL, None, [(0, 1)]), 2.0)] == ["InconsistentRecord"]


def test_validate_slack():
    assert validate_record(AnalysisRecord(Label.FAKE, None, [(0, 2.05)]), 2.0) == []
    assert validate_record(AnalysisRecord(Label.FAKE, None, [(0, 2.06)]), 2.0)


def test_interval_invariants():
    for bad in [(1.0, 1.0), (-0.1, 1.0), (0.0, float("nan")), (0.0, float("inf"))]:
        with pytest.raises(MalformedIntervalError):
            TimeInterval(*bad)


@settings(max_examples=300, deadline=None)
@given(records())
def test_round_trip(rec):
    assert parse_analysis(serialize_analysis(rec)) == rec


@settings(max_examples=200, deadline=None)
@given(records(), st.text(alphabet=st.characters(blacklist_characters="{}"), max_size=40), st.text(max_size=40))
def test_parse_ignores_surrounding_prose(rec, before, after):
    assert parse_analysis(before + serialize_analysis(rec) + after) == rec


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 200), st.integers(1, 50)), max_size=10))
def test_normalize_matches_union_oracle(pairs):
    ivs = [(s / 10, (s + w) / 10) for s, w in pairs]
    once = normalize_regions(ivs)
    assert normalize_regions(once) == once
    assert [(iv.start_s, iv.end_s) for iv in once] == union_intervals(ivs)
