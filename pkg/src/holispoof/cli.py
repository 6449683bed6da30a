"""Command line entry point: ``holispoof <command> [options]``.

Every command prints one summary line, writes a JSON report next to its
main output (or to ``--report``) and exits with

    0  success
    1  data failure (bad inputs, everything discarded, check failed)
    2  configuration failure (missing files, bad config, missing seed)
    3  service failure (text-generation or TTS service unusable)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import signal
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .adapter_math import column_norms, dora_merge, load_params, matrix_to_json
from .assembly import DEFAULT_TAG, assemble_edits
from .audio import TTSClient
from .config import PipelineConfig, load_config
from .curation import MAX_ITERS, SpoofEdit, curate_dialogues, judge_semantic_analysis
from .dialogue import load_dialogues
from .errors import ConfigError, DataError, DialogueFailedError, HoliSpoofError, ServiceError
from .evaluation import evaluate_run
from .gateway import LLMGateway
from .manifest import write_manifest
from .mixer import load_mix_config, mix_files

log = logging.getLogger("holispoof")

EXIT_OK, EXIT_DATA, EXIT_CONFIG, EXIT_SERVICE = 0, 1, 2, 3
EXIT_INTERRUPTED = 130
DORA_TOL = 1e-9


def _dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _report_path(args: argparse.Namespace, out: Path | None) -> Path | None:
    if args.report:
        return Path(args.report)
    if out is None:
        return None
    return out.with_name(out.stem + ".report.json")


def _write_report(args, cfg: PipelineConfig, out: Path | None, seeds: dict, results: dict) -> None:
    path = _report_path(args, out)
    if path is None:
        return
    report = {
        "tool": "holispoof",
        "version": __version__,
        "command": args.command,
        "config_hash": cfg.config_hash,
        "seeds": dict(sorted(seeds.items())),
        "results": results,
    }
    _write_text(path, _dumps(report))


def _require_file(path: str | Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"no {what} given")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _pick(arg: Any, cfg: PipelineConfig, key: str) -> Path | None:
    if arg is not None:
        return Path(arg)
    return cfg.path(key)


def _gateway(cfg: PipelineConfig, transport: str | None) -> LLMGateway:
    gw = cfg.gateway
    if transport is not None:
        gw = dataclasses.replace(gw, transport=transport)
    return LLMGateway(gw)


def _service_only(failures: list[DialogueFailedError]) -> bool:
    return bool(failures) and all(isinstance(f.cause, ServiceError) for f in failures)


class _LineWriter:
    """Append-only JSONL writer; each record is one write plus a flush so an
    interrupted run leaves only whole lines behind."""

    def __init__(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.path = path
        self._fh = open(path, "w", encoding="utf-8", newline="\n")

    def write(self, obj: dict) -> None:
        self._fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def cmd_curate(args, cfg: PipelineConfig) -> int:
    root = _pick(args.dialogues, cfg, "dialogue_dir")
    if root is None:
        raise ConfigError("no dialogue directory given (--dialogues or paths.dialogue_dir)")
    out = Path(args.out)
    dialogues = load_dialogues(root)
    max_iters = args.max_iters or int(cfg.curation.get("max_iters", MAX_ITERS))
    annotate = bool(cfg.curation.get("annotate", True)) and not args.no_annotate

    partial = _LineWriter(out.with_name(out.name + ".partial"))
    try:
        with _gateway(cfg, args.transport) as gateway:
            outcome = curate_dialogues(
                dialogues,
                gateway,
                max_iters=max_iters,
                roles=cfg.roles,
                annotate=annotate,
                on_result=lambda e: partial.write(e.to_dict()),
            )
    finally:
        partial.close()
    _write_text(out, "".join(json.dumps(e.to_dict(), ensure_ascii=False) + "\n" for e in outcome.edits))
    partial.path.unlink()

    n_acc = len(outcome.accepted)
    results = {
        "dialogues": len(dialogues),
        "accepted": n_acc,
        "discarded": len(outcome.edits) - n_acc,
        "failed": [{"dialogue_id": f.dialogue_id, "error": str(f.cause)} for f in outcome.failures],
        "iterations": {e.dialogue_id: e.iterations_used for e in outcome.edits},
        "max_iters": max_iters,
        "roles": {k: dataclasses.asdict(v) for k, v in sorted(cfg.roles.items())},
        "gateway": cfg.gateway.public_dict(),
    }
    _write_report(args, cfg, out, cfg.seeds, results)
    print(
        f"curate: {len(dialogues)} dialogues, {n_acc} accepted, "
        f"{results['discarded']} discarded, {len(outcome.failures)} failed -> {out}"
    )
    if n_acc:
        return EXIT_OK
    if not outcome.edits and _service_only(outcome.failures):
        return EXIT_SERVICE
    return EXIT_DATA


def _read_edits(path: Path) -> list[SpoofEdit]:
    edits = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                edits.append(SpoofEdit.from_dict(json.loads(line)))
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}:{n}: not a spoof edit record ({exc})") from None
    return edits


def cmd_assemble(args, cfg: PipelineConfig) -> int:
    edits_path = _require_file(args.edits, "edits file")
    root = _pick(args.dialogues, cfg, "dialogue_dir")
    if root is None or not root.is_dir():
        raise ConfigError(f"dialogue directory not found: {root}")
    out_dir = _pick(args.out_dir, cfg, "output_dir")
    if out_dir is None:
        raise ConfigError("no output directory given (--out-dir or paths.output_dir)")
    manifest = Path(args.manifest) if args.manifest else out_dir / "manifest.jsonl"
    tag = args.dataset_tag or cfg.assembly.get("dataset_tag", DEFAULT_TAG)
    include_real = bool(cfg.assembly.get("include_real", True)) and not args.no_real
    crossfade = args.crossfade_ms if args.crossfade_ms is not None else float(cfg.assembly.get("crossfade_ms", 0.0))

    edits = _read_edits(edits_path)
    tts_cfg = cfg.tts if args.tts_transport is None else dataclasses.replace(cfg.tts, transport=args.tts_transport)
    tts = TTSClient(tts_cfg)
    try:
        outcome = assemble_edits(edits, root, tts, out_dir, tag, include_real, crossfade)
    finally:
        tts.close()
    write_manifest(manifest, outcome.entries, {"dataset_tag": tag})

    n_fake = sum(1 for e in outcome.entries if e.label.value == "fake")
    results = {
        "edits": len(edits),
        "accepted_edits": sum(1 for e in edits if e.accepted),
        "fake_samples": n_fake,
        "real_samples": len(outcome.entries) - n_fake,
        "warnings": outcome.warnings,
        "failed": [{"dialogue_id": f.dialogue_id, "error": str(f.cause)} for f in outcome.failures],
        "crossfade_ms": crossfade,
        "tts": tts_cfg.public_dict(),
    }
    _write_report(args, cfg, manifest, cfg.seeds, results)
    print(f"assemble: {n_fake} spoofed dialogues, {len(outcome.failures)} failed -> {manifest}")
    if n_fake:
        return EXIT_OK
    if _service_only(outcome.failures):
        return EXIT_SERVICE
    return EXIT_DATA if outcome.failures else EXIT_OK


def cmd_mix(args, cfg: PipelineConfig) -> int:
    spec_path = _pick(args.spec, cfg, "mix_spec")
    if spec_path is None:
        raise ConfigError("no mix spec given (--spec or paths.mix_spec)")
    specs, spec_seed = load_mix_config(spec_path)
    seed = args.seed
    if seed is None:
        seed = spec_seed if spec_seed is not None else cfg.seeds.get("mix")
    if seed is None:
        raise ConfigError("mix needs an explicit seed (--seed, the spec's seed, or seeds.mix)")
    for s in specs:
        _require_file(s.manifest, f"manifest for {s.dataset_tag}")
    out = Path(args.out)
    header = mix_files(specs, int(seed), out, args.annotations_out)
    _write_report(args, cfg, out, {**cfg.seeds, "mix": int(seed)}, header)
    print(f"mix: {header['total']} samples from {len(specs)} datasets (seed {seed}) -> {out}")
    return EXIT_OK


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    preds = _require_file(args.predictions, "predictions file")
    manifest = _require_file(_pick(args.manifest, cfg, "manifest"), "reference manifest")
    scores = _require_file(args.scores, "scores file") if args.scores else None
    resolution = args.resolution if args.resolution is not None else cfg.resolution_s
    report = evaluate_run(preds, manifest, resolution, scores)
    out = Path(args.out) if args.out else None
    if out is not None:
        _write_text(out, _dumps(report.to_dict()))
    _write_report(args, cfg, out, cfg.seeds, report.to_dict())

    def fmt(v):
        return "n/a" if v is None else f"{v:.4f}"

    print(
        f"evaluate: n={report.n_samples} acc={fmt(report.accuracy)} eer={fmt(report.eer)} "
        f"method_f1={fmt(report.method_macro_f1)} seg_f1={fmt(report.seg_f1)}"
    )
    return EXIT_OK


JUDGE_FIELDS = ("sample_id", "original_text", "original_span", "new_span", "model_analysis")


def _read_analyses(path: Path) -> list[dict[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError:
                raise DataError(f"{path}:{n}: invalid JSON") from None
            if not isinstance(obj, dict) or any(not isinstance(obj.get(k), str) for k in JUDGE_FIELDS):
                raise DataError(f"{path}:{n}: needs string fields {list(JUDGE_FIELDS)}")
            rows.append(obj)
    return rows


def cmd_judge(args, cfg: PipelineConfig) -> int:
    rows = _read_analyses(_require_file(args.analyses, "analyses file"))
    out = Path(args.out)
    verdicts = []
    with _gateway(cfg, args.transport) as gateway:
        for row in rows:
            v = judge_semantic_analysis(
                row["original_text"], row["original_span"], row["new_span"], row["model_analysis"], gateway, cfg.roles
            )
            verdicts.append({"sample_id": row["sample_id"], **v.to_dict()})
    _write_text(out, "".join(json.dumps(v, ensure_ascii=False) + "\n" for v in verdicts))
    means = [v["mean"] for v in verdicts if v["mean"] is not None]
    overall = sum(means) / len(means) if means else None
    results = {
        "samples": len(verdicts),
        "scored": len(means),
        "mean_score": overall,
        "per_sample": {v["sample_id"]: v["mean"] for v in verdicts},
        "judge": dataclasses.asdict(cfg.roles["judge"]),
    }
    _write_report(args, cfg, out, cfg.seeds, results)
    shown = "n/a" if overall is None else f"{overall:.4f}"
    print(f"judge: {len(means)}/{len(verdicts)} samples scored, mean {shown} -> {out}")
    if rows and not means:
        return EXIT_DATA
    return EXIT_OK


def _random_instance(rng: np.random.Generator) -> dict[str, np.ndarray]:
    d, k = (int(x) for x in rng.integers(1, 9, size=2))
    r = int(rng.integers(1, min(d, k) + 1))
    return {
        "W0": rng.standard_normal((d, k)),
        "B": rng.standard_normal((d, r)),
        "A": rng.standard_normal((r, k)),
        "m": rng.uniform(0.1, 5.0, size=k),
    }


def cmd_dora_check(args, cfg: PipelineConfig) -> int:
    if args.params:
        instances = [load_params(_require_file(args.params, "parameter file"))]
        seeds = dict(cfg.seeds)
    else:
        seed = args.seed if args.seed is not None else cfg.seeds.get("dora")
        if seed is None:
            raise ConfigError("dora-check needs --params or an explicit seed (--seed or seeds.dora)")
        rng = np.random.default_rng(int(seed))
        instances = [_random_instance(rng) for _ in range(args.instances)]
        seeds = {**cfg.seeds, "dora": int(seed)}

    worst = 0.0
    for p in instances:
        merged = dora_merge(p["W0"], p["B"], p["A"], p["m"])
        worst = max(worst, float(np.max(np.abs(column_norms(merged) - p["m"]))))
    ok = worst <= DORA_TOL
    results = {"instances": len(instances), "max_abs_norm_error": worst, "tolerance": DORA_TOL, "passed": ok}
    if args.params:
        results["merged"] = matrix_to_json(merged)
    out = Path(args.out) if args.out else None
    _write_report(args, cfg, out, seeds, results)
    print(f"dora-check: {len(instances)} instances, max |norm - m| = {worst:.3e} ({'PASS' if ok else 'FAIL'})")
    return EXIT_OK if ok else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holispoof", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--report", help="where to write the JSON report")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", parents=[common], help="run the writer/checker loop over dialogues")
    p.add_argument("--dialogues", help="DailyTalk-style dialogue root")
    p.add_argument("--out", required=True, help="output JSONL of edits")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--transport", help='override the gateway transport ("http" or "mock:DIR")')
    p.add_argument("--no-annotate", action="store_true", help="skip the semantic-influence annotation")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("assemble", parents=[common], help="synthesize and splice accepted edits")
    p.add_argument("--edits", required=True)
    p.add_argument("--dialogues")
    p.add_argument("--out-dir")
    p.add_argument("--manifest", help="default: OUT_DIR/manifest.jsonl")
    p.add_argument("--tts-transport", help='override the TTS transport ("http" or "mock:DIR")')
    p.add_argument("--dataset-tag")
    p.add_argument("--no-real", action="store_true", help="do not emit bona fide dialogue entries")
    p.add_argument("--crossfade-ms", type=float, default=None)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("mix", parents=[common], help="build a capped, stratified training mixture")
    p.add_argument("--spec")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--annotations-out", help="also write ground-truth annotations as a predictions-style TSV")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("evaluate", parents=[common], help="score model outputs against a manifest")
    p.add_argument("--predictions", required=True, help="TSV: sample_id<TAB>raw model output")
    p.add_argument("--manifest")
    p.add_argument("--scores", help="TSV: sample_id<TAB>logit_real<TAB>logit_fake, enables EER")
    p.add_argument("--resolution", type=float, default=None, help="segment length in seconds (default 0.2)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("judge", parents=[common], help="score semantic analyses with an LLM judge")
    p.add_argument("--analyses", required=True, help="JSONL with " + ", ".join(JUDGE_FIELDS))
    p.add_argument("--out", required=True)
    p.add_argument("--transport")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("dora-check", parents=[common], help="verify the DoRA merge column-norm property")
    p.add_argument("--params", help="JSON with W0, B, A, m")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dora_check)
    return parser


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    previous = None
    try:
        previous = signal.signal(signal.SIGTERM, _raise_interrupt)
    except ValueError:  # not on the main thread
        pass
    func: Callable[[argparse.Namespace, PipelineConfig], int] = args.func
    try:
        cfg = load_config(args.config)
        return func(args, cfg)
    except KeyboardInterrupt:
        print(f"{args.command}: interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
    except ConfigError as exc:
        print(f"{args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ServiceError as exc:
        print(f"{args.command}: service error: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (DataError, HoliSpoofError) as exc:
        print(f"{args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if previous is not None:
            signal.signal(signal.SIGTERM, previous)


if __name__ == "__main__":
    sys.exit(main())
