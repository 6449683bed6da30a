import json
import subprocess
import sys
from pathlib import Path

import pytest

from holispoof import __version__
from holispoof.cli import main
from helpers import build_pipeline_fixture


def run(*argv):
    return main([str(a) for a in argv])


def report(path):
    return json.loads(Path(path).read_text())


@pytest.fixture
def two(tmp_path):
    return build_pipeline_fixture(tmp_path, n_dialogues=2)


def test_curate_accepts_all(two, capsys):
    out = two.parent / "out" / "edits.jsonl"
    assert run("curate", "--config", two, "--out", out) == 0
    edits = [json.loads(line) for line in out.read_text().splitlines()]
    assert [e["dialogue_id"] for e in edits] == ["0", "1"]
    assert all(e["verdict"] == "accepted" and e["iterations_used"] == 1 for e in edits)
    assert not out.with_name("edits.jsonl.partial").exists()
    assert "2 accepted" in capsys.readouterr().out
    rep = report(out.with_name("edits.report.json"))
    assert rep["version"] == __version__ and rep["seeds"] == {"mix": 17} and len(rep["config_hash"]) == 16


def test_curate_all_discarded(tmp_path, capsys):
    cfg = build_pipeline_fixture(tmp_path, n_dialogues=2, checker_passes=False)
    assert run("curate", "--config", cfg, "--out", tmp_path / "e.jsonl") == 1
    assert "0 accepted, 2 discarded" in capsys.readouterr().out
    rep = report(tmp_path / "e.report.json")
    assert rep["results"]["iterations"] == {"0": 3, "1": 3}


def test_curate_missing_dialogue_dir(two, tmp_path):
    assert run("curate", "--config", two, "--dialogues", tmp_path / "nope", "--out", tmp_path / "e.jsonl") == 2


def test_missing_config_file(tmp_path):
    assert run("curate", "--config", tmp_path / "nope.json", "--out", tmp_path / "e.jsonl") == 2


def test_service_failure_exit_code(two, tmp_path):
    empty = tmp_path / "empty_mock"
    empty.mkdir()
    code = run("curate", "--config", two, "--transport", f"mock:{empty}", "--out", tmp_path / "e.jsonl")
    assert code == 3


def test_assemble_writes_audio_and_manifest(two):
    root = two.parent
    run("curate", "--config", two, "--out", root / "out" / "edits.jsonl")
    assert run("assemble", "--config", two, "--edits", root / "out" / "edits.jsonl") == 0
    lines = [json.loads(line) for line in (root / "out" / "manifest.jsonl").read_text().splitlines()]
    entries = lines[1:]
    assert [e["sample_id"] for e in entries] == ["0_real", "0_fake", "1_real", "1_fake"]
    fake0 = entries[1]
    # dialogue 0: 1.5 s + [1.25 s replaced by 1.25 s TTS] + 2.5 s
    assert fake0["regions"] == [[1.5, 2.75]] and fake0["duration_s"] == 5.25
    assert fake0["method"] == "cut_and_paste" and fake0["semantic_influence"]
    assert (root / "out" / "0_fake.wav").is_file()


def test_mix_requires_seed(tmp_path):
    (tmp_path / "m.jsonl").write_text('{"sample_id": "a", "audio_path": "a.wav", "label": "real"}\n')
    (tmp_path / "mix.json").write_text(json.dumps({"datasets": [{"tag": "t", "manifest": "m.jsonl", "cap": 5}]}))
    assert run("mix", "--spec", tmp_path / "mix.json", "--out", tmp_path / "o.jsonl") == 2
    assert run("mix", "--spec", tmp_path / "mix.json", "--seed", 3, "--out", tmp_path / "o.jsonl") == 0
    assert report(tmp_path / "o.report.json")["seeds"] == {"mix": 3}


def _eval_fixture(tmp_path):
    refs = [
        {"sample_id": "a", "audio_path": "a.wav", "label": "real", "duration_s": 2.0},
        {"sample_id": "b", "audio_path": "b.wav", "label": "fake", "method": "tts", "regions": [[0.3, 0.9]],
         "duration_s": 2.0},
        {"sample_id": "c", "audio_path": "c.wav", "label": "fake", "method": "cut_and_paste",
         "regions": [[1.0, 1.5]], "duration_s": 2.0},
    ]
    (tmp_path / "ref.jsonl").write_text("".join(json.dumps(r) + "\n" for r in refs))
    preds = {
        "a": '{"real_or_fake": "real"}',
        "b": '{"real_or_fake": "fake", "spoof_method": "tts", "spoof_regions": [[0.3, 0.9]]}',
        "c": '{"real_or_fake": "fake", "spoof_method": "cut_and_paste", "spoof_regions": [[1.0, 1.5]]}',
    }
    (tmp_path / "pred.tsv").write_text("".join(f"{k}\t{v}\n" for k, v in preds.items()))


def test_evaluate_identity_and_default_resolution(tmp_path):
    _eval_fixture(tmp_path)
    base = ["evaluate", "--predictions", tmp_path / "pred.tsv", "--manifest", tmp_path / "ref.jsonl"]
    assert run(*base, "--out", tmp_path / "r1.json") == 0
    assert run(*base, "--resolution", "0.2", "--out", tmp_path / "r2.json") == 0
    r1 = (tmp_path / "r1.json").read_bytes()
    assert r1 == (tmp_path / "r2.json").read_bytes()
    d = json.loads(r1)
    assert (d["accuracy"], d["method_macro_f1"], d["seg_f1"]) == (1.0, 1.0, 1.0)


def test_evaluate_with_scores(tmp_path):
    _eval_fixture(tmp_path)
    (tmp_path / "s.tsv").write_text("a\t2.0\t0.0\nb\t0.0\t2.0\nc\t0.0\t1.0\n")
    run("evaluate", "--predictions", tmp_path / "pred.tsv", "--manifest", tmp_path / "ref.jsonl",
        "--scores", tmp_path / "s.tsv", "--out", tmp_path / "r.json")
    assert report(tmp_path / "r.json")["eer"] == 0.0


def test_evaluate_bad_predictions_is_data_error(tmp_path):
    _eval_fixture(tmp_path)
    (tmp_path / "pred.tsv").write_text("no tab\n")
    assert run("evaluate", "--predictions", tmp_path / "pred.tsv", "--manifest", tmp_path / "ref.jsonl") == 1


def test_judge_hand_means(tmp_path):
    judge_rules = {
        "40_judge_a": {"match": ["senior expert", "SAMPLE-A"], "responses": ["4", "4", "3"]},
        "41_judge_b": {"match": ["senior expert", "SAMPLE-B"], "responses": ["5"]},
        "42_judge_c": {"match": ["senior expert", "SAMPLE-C"], "responses": ["2", "3", "2"]},
    }
    cfg = build_pipeline_fixture(tmp_path, n_dialogues=1, judge=judge_rules)
    rows = [
        {"sample_id": s, "original_text": f"SAMPLE-{s} full text", "original_span": "old", "new_span": "new",
         "model_analysis": "it changed"}
        for s in "ABC"
    ]
    (tmp_path / "an.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert run("judge", "--config", cfg, "--analyses", tmp_path / "an.jsonl", "--out", tmp_path / "v.jsonl") == 0
    verdicts = {v["sample_id"]: v for v in map(json.loads, (tmp_path / "v.jsonl").read_text().splitlines())}
    assert verdicts["A"]["scores"] == [4, 4, 3] and verdicts["A"]["mean"] == pytest.approx(11 / 3)
    assert verdicts["B"]["mean"] == 5.0
    assert verdicts["C"]["mean"] == pytest.approx(7 / 3)
    rep = report(tmp_path / "v.report.json")["results"]
    assert rep["mean_score"] == pytest.approx((11 / 3 + 5 + 7 / 3) / 3)


def test_dora_check(tmp_path):
    assert run("dora-check", "--seed", 5, "--instances", 20, "--out", tmp_path / "d.json") == 0
    rep = report(tmp_path / "d.report.json")
    assert rep["results"]["passed"] and rep["seeds"] == {"dora": 5}
    assert run("dora-check") == 2
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"W0": [[1, 0], [0, 1]], "B": [[0], [0]], "A": [[1, 1]], "m": [3, 5]}))
    assert run("dora-check", "--params", p, "--out", tmp_path / "x.json") == 0
    assert report(tmp_path / "x.report.json")["results"]["merged"] == [[3.0, 0.0], [0.0, 5.0]]


def _pipeline(cfg, tag):
    root = cfg.parent
    out = root / tag
    assert run("curate", "--config", cfg, "--out", out / "edits.jsonl") == 0
    assert run("assemble", "--config", cfg, "--edits", out / "edits.jsonl", "--out-dir", out) == 0
    (root / f"mix_{tag}.json").write_text(json.dumps(
        {"datasets": [{"tag": "dailytalkedit", "manifest": f"{tag}/manifest.jsonl", "cap": 2000}]}))
    assert run("mix", "--config", cfg, "--spec", root / f"mix_{tag}.json", "--out", out / "mixed.jsonl",
               "--annotations-out", out / "gt.tsv") == 0
    assert run("evaluate", "--config", cfg, "--predictions", out / "gt.tsv", "--manifest", out / "mixed.jsonl",
               "--out", out / "metrics.json") == 0
    return out


def test_pipeline_is_byte_identical_across_runs(tmp_path):
    cfg = build_pipeline_fixture(tmp_path, n_dialogues=3)
    a = _pipeline(cfg, "run")
    snap = {p.relative_to(a): p.read_bytes() for p in a.rglob("*") if p.is_file()}
    a2 = _pipeline(cfg, "run")
    assert snap == {p.relative_to(a2): p.read_bytes() for p in a2.rglob("*") if p.is_file()}


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "holispoof", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
