"""Operator entry point: run evaluations, sweeps, overlap analyses, checks.

Flags override config-file values, which override built-in defaults.  The
backend is addressed as KIND:SPEC (``scripted:fixture.json``,
``bigram:corpus.txt``, ``remote:http://host:port``); a bare ``remote``
falls back to the ``CHOIR_BACKEND_URL`` environment variable.  All outputs
are plain data files under the output directory, including a manifest with
the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from .backends import Backend, BigramBackend, RemoteBackend, ScriptedBackend
from .engine import DEFAULT_COT_TRIGGER, DecodeConfig, trace_to_dict
from .errors import BackendError, ChoirError
from .harness import (
    METHODS,
    EvalSettings,
    evaluate,
    lambda_sweep,
    load_dataset,
    overlap,
    read_records,
    summarize,
    summary_csv,
    write_records,
)
from .persona import load_groups

ENV_BACKEND_URL = "CHOIR_BACKEND_URL"

_DEFAULTS = {
    "backend": None,
    "dataset": None,
    "personas": None,
    "attribute": None,
    "method": "choir",
    "lambda0": None,
    "lambda_persona": 1.0,
    "max_tokens": 512,
    "temperature": 0.0,
    "seed": 0,
    "cot_trigger": DEFAULT_COT_TRIGGER,
    "repetitions": 1,
    "concurrency": 1,
    "trace": False,
    "out": None,
    "timing": None,  # resolved per backend kind
    "per_call_ms": 1.0,
    "sc_paths": 3,
    "sc_temperature": 0.7,
    "extraction_max_tokens": 32,
    "instruction_id": "1",
    "reference_method": None,
}


def _add_run_flags(parser: argparse.ArgumentParser, *, include_lambda0: bool = True) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    parser.add_argument("--backend", help="backend as KIND:SPEC (scripted|bigram|remote)")
    parser.add_argument("--dataset", help="dataset JSONL path")
    parser.add_argument("--personas", help="persona template JSONL path")
    parser.add_argument("--attribute", help="only use persona groups with this attribute")
    parser.add_argument("--method", help=f"one of: {', '.join(METHODS)}")
    if include_lambda0:
        parser.add_argument("--lambda0", type=float, help="knowledge-stream weight (default n-1)")
    parser.add_argument("--max-tokens", dest="max_tokens", type=int, help="generation budget")
    parser.add_argument("--temperature", type=float, help="selection temperature (0 = greedy)")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--repetitions", type=int, help="independent repetitions")
    parser.add_argument("--concurrency", type=int, help="question-level worker bound")
    parser.add_argument("--trace", action="store_true", default=None, help="dump per-step traces")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--timing", choices=["simulated", "wall"], help="latency clock")
    parser.add_argument("--sc-paths", dest="sc_paths", type=int, help="paths for sampled methods")
    parser.add_argument("--instruction-id", dest="instruction_id", help="persona instruction id")
    parser.add_argument(
        "--reference-method", dest="reference_method", help="baseline for significance/latency"
    )


def _merge_config(args: argparse.Namespace) -> tuple[dict, list[str]]:
    """Defaults <- config file <- explicit flags; returns (config, errors)."""
    errors: list[str] = []
    resolved = dict(_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        if not Path(config_path).exists():
            return resolved, [f"config file not found: {config_path}"]
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            return resolved, [f"config file {config_path} is not valid JSON: {exc.msg}"]
        unknown = sorted(set(loaded) - set(_DEFAULTS))
        if unknown:
            errors.append(f"unknown config keys: {', '.join(unknown)}")
        resolved.update({k: v for k, v in loaded.items() if k in _DEFAULTS})
    for key in _DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved, errors


def _validate_run(config: dict, *, need_dataset: bool = True) -> list[str]:
    errors = []
    if not config["backend"]:
        errors.append("--backend is required (KIND:SPEC)")
    else:
        kind = str(config["backend"]).split(":", 1)[0]
        if kind not in ("scripted", "bigram", "remote"):
            errors.append(f"unknown backend kind {kind!r}; expected scripted, bigram or remote")
        elif kind != "remote":
            spec = _backend_spec(str(config["backend"]))
            if not spec or not Path(spec).exists():
                errors.append(f"backend fixture/corpus not found: {spec!r}")
    if need_dataset:
        if not config["dataset"]:
            errors.append("--dataset is required")
        elif not Path(config["dataset"]).exists():
            errors.append(f"dataset not found: {config['dataset']}")
    if config["method"] not in METHODS:
        errors.append(f"unknown method {config['method']!r}; valid: {', '.join(METHODS)}")
    if config["personas"] is not None and not Path(config["personas"]).exists():
        errors.append(f"persona file not found: {config['personas']}")
    if config["method"] in ("choir", "choir_sc", "persona_avg", "persona_maj") and not config["personas"]:
        errors.append(f"method {config['method']!r} needs --personas")
    if int(config["repetitions"]) < 1:
        errors.append("--repetitions must be >= 1")
    if int(config["concurrency"]) < 1:
        errors.append("--concurrency must be >= 1")
    if not config["out"]:
        errors.append("--out is required")
    return errors


def _backend_spec(value: str) -> str:
    return value.split(":", 1)[1] if ":" in value else ""


def make_backend(value: str) -> Backend:
    kind, spec = (value.split(":", 1) + [""])[:2]
    if kind == "scripted":
        return ScriptedBackend.from_file(spec)
    if kind == "bigram":
        return BigramBackend.from_file(spec)
    if kind == "remote":
        url = spec or os.environ.get(ENV_BACKEND_URL, "")
        if not url:
            raise BackendError(
                f"remote backend needs a URL (remote:http://...) or {ENV_BACKEND_URL} set"
            )
        return RemoteBackend(url)
    raise BackendError(f"unknown backend kind {kind!r}")


def _resolve_timing(config: dict) -> str:
    if config["timing"]:
        return str(config["timing"])
    kind = str(config["backend"]).split(":", 1)[0]
    return "wall" if kind == "remote" else "simulated"


def _settings(config: dict) -> EvalSettings:
    decode = DecodeConfig(
        lambda0=config["lambda0"],
        lambda_persona=config["lambda_persona"],
        max_len=int(config["max_tokens"]),
        temperature=float(config["temperature"]),
        seed=int(config["seed"]),
        cot_trigger=str(config["cot_trigger"]),
    )
    return EvalSettings(
        decode=decode,
        instruction_id=str(config["instruction_id"]),
        sc_paths=int(config["sc_paths"]),
        sc_temperature=float(config["sc_temperature"]),
        extraction_max_tokens=int(config["extraction_max_tokens"]),
        timing=_resolve_timing(config),
        per_call_ms=float(config["per_call_ms"]),
        concurrency=int(config["concurrency"]),
    )


def _write_manifest(out_dir: Path, command: str, config: dict) -> None:
    resolved = dict(config)
    resolved["timing"] = _resolve_timing(config)
    manifest = {"command": command, "config": resolved}
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_inputs(config: dict):
    dataset = load_dataset(config["dataset"])
    groups = []
    if config["personas"]:
        groups = load_groups(config["personas"], attribute=config["attribute"])
        if config["attribute"] and not groups:
            raise ChoirError(f"no persona groups with attribute {config['attribute']!r}")
    return dataset, groups


class _TraceWriter:
    """Writes one JSONL file per decode under <out>/traces/."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir / "traces"
        self.dir.mkdir(parents=True, exist_ok=True)

    def __call__(self, question_id, method, group_id, traces):
        name = f"{method}.{group_id or 'none'}.{question_id}.jsonl"
        with (self.dir / name).open("w", encoding="utf-8") as fh:
            for trace in traces:
                fh.write(json.dumps(trace_to_dict(trace), sort_keys=True) + "\n")


def cmd_run(args: argparse.Namespace) -> int:
    config, errors = _merge_config(args)
    errors += _validate_run(config)
    if errors:
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    out_dir = Path(config["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        backend = make_backend(str(config["backend"]))
        dataset, groups = _load_inputs(config)
        settings = _settings(config)
        _write_manifest(out_dir, "run", config)
        trace_sink = _TraceWriter(out_dir) if config["trace"] else None
        records = []
        for rep in range(int(config["repetitions"])):
            records.extend(
                evaluate(
                    backend,
                    str(config["method"]),
                    dataset,
                    groups,
                    settings,
                    rep=rep,
                    trace_sink=trace_sink,
                )
            )
        write_records(records, out_dir / "records.jsonl")
        summary = summarize(records, reference_method=config["reference_method"])
        reps = sorted({r.rep for r in records})
        rep_scores = [
            100.0
            * sum(1 for r in records if r.rep == rep and r.correct)
            / max(1, sum(1 for r in records if r.rep == rep))
            for rep in reps
        ]
        mean = sum(rep_scores) / len(rep_scores)
        std = (
            (sum((s - mean) ** 2 for s in rep_scores) / (len(rep_scores) - 1)) ** 0.5
            if len(rep_scores) > 1
            else 0.0
        )
        summary["repetitions"] = {"accuracies": rep_scores, "mean": mean, "std": std}
        (out_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (out_dir / "summary.csv").write_text(summary_csv(summary), encoding="utf-8")
    except (ChoirError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"{config['method']}: {len(records)} records, "
        f"accuracy mean {summary['repetitions']['mean']:.2f}% "
        f"(± {summary['repetitions']['std']:.2f} over {len(rep_scores)} repetition(s)) -> {out_dir}"
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config, errors = _merge_config(args)
    values_raw = getattr(args, "lambda0_values", None) or ""
    try:
        values = [float(v) for v in values_raw.split(",") if v.strip() != ""]
    except ValueError:
        values = []
        errors.append(f"--lambda0 values must be numbers, got {values_raw!r}")
    if not values:
        errors.append("--lambda0 needs a non-empty comma-separated list, e.g. 0,1,2,3,4")
    config["method"] = "choir"
    errors += _validate_run(config)
    if errors:
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    out_dir = Path(config["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        backend = make_backend(str(config["backend"]))
        dataset, groups = _load_inputs(config)
        settings = _settings(config)
        _write_manifest(out_dir, "sweep", {**config, "lambda0_values": values})
        points = lambda_sweep(backend, dataset, groups, values, settings)
    except (ChoirError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = [{"lambda0": v, "accuracy": acc} for v, acc in points]
    (out_dir / "sweep.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    csv = "lambda0,accuracy\n" + "".join(f"{v},{acc:.4f}\n" for v, acc in points)
    (out_dir / "sweep.csv").write_text(csv, encoding="utf-8")
    for v, acc in points:
        print(f"lambda0={v:g}: {acc:.2f}%")
    return 0


def cmd_overlap(args: argparse.Namespace) -> int:
    try:
        records_a = read_records(args.records_a)
        records_b = read_records(args.records_b)
        report = overlap(records_a, records_b)
    except (ChoirError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    if not args.backend:
        print("error: --backend is required", file=sys.stderr)
        return 2
    try:
        backend = make_backend(args.backend)
        info = backend.model_info()
        if args.backend.startswith("scripted:"):
            # Exercise the round trip on a declared prompt.
            sample = getattr(backend, "_streams")[0].match
        else:
            # Build a probe from the backend's own vocabulary.
            probe_ids = [i for i in range(min(info.vocab_size, 8)) if i != info.eos_token_id]
            sample = backend.detokenize(probe_ids[:4])
        tokens = backend.tokenize(sample)
        round_trip = backend.detokenize(tokens)
        handle, logits = backend.open_stream(tokens)
        first = int(logits.argmax())
        if first != info.eos_token_id:
            backend.advance(handle, first)
        backend.close_stream(handle)
    except (ChoirError, OSError, ValueError) as exc:
        print(f"error: backend check failed: {exc}", file=sys.stderr)
        return 1
    print(f"model: {info.model_name or '(unnamed)'}")
    print(f"vocab_size: {info.vocab_size}")
    print(f"eos_token_id: {info.eos_token_id}")
    print(f"tokenize round trip: {sample!r} -> {len(tokens)} tokens -> {round_trip!r}")
    print("open/advance/close cycle: ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="choir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate one method over a dataset")
    _add_run_flags(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="sweep the knowledge weight for the fused method")
    _add_run_flags(sweep, include_lambda0=False)
    sweep.add_argument(
        "--lambda0",
        dest="lambda0_values",
        metavar="V0,V1,...",
        help="comma-separated knowledge weights to sweep",
    )
    sweep.set_defaults(func=cmd_sweep, lambda0=None)

    ovl = sub.add_parser("overlap", help="correct-answer overlap of two record files")
    ovl.add_argument("records_a", type=Path)
    ovl.add_argument("records_b", type=Path)
    ovl.add_argument("--out", help="write the overlap document here instead of stdout")
    ovl.set_defaults(func=cmd_overlap)

    check = sub.add_parser("check", help="verify a backend end to end")
    check.add_argument("--backend", help="backend as KIND:SPEC")
    check.set_defaults(func=cmd_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
