"""Evaluation harness: dataset ingestion, method runs, metrics, reports.

Methods: ``zscot`` (single chain-of-thought decode), ``persona_avg``
(independent per-persona runs, scored individually), ``persona_maj``
(per-persona runs aggregated by majority vote), ``choir`` (collaborative
fused decode), ``sc`` (sampled multi-path vote), ``choir_sc`` (sampled
collaborative decodes plus vote).

All randomness flows from per-question seeds derived from the master seed,
so serial and parallel execution produce identical records.  Latency is
recorded either from a wall clock or, for deterministic backends, from a
simulated clock of one fixed cost per logit query, which keeps rerun
outputs byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .backends.base import Backend, InstrumentedBackend
from .engine import DecodeConfig, StepTrace, build_prompt, choir_decode, single_decode
from .ensembles import (
    choir_with_sc,
    majority_vote,
    run_persona_individual,
    self_consistency,
)
from .errors import BackendError, DecodeError, SchemaError
from .extraction import AnswerFormat, ExtractedAnswer, answers_equal, extract_answer, parse_answer
from .persona import PersonaGroup, instruction_template, render_instruction
from .stats import TTestResult, paired_ttest

METHODS = ("zscot", "persona_avg", "persona_maj", "choir", "sc", "choir_sc")
_GROUP_METHODS = frozenset({"persona_avg", "persona_maj", "choir", "choir_sc"})

TraceSink = Callable[[str, str, "str | None", Sequence[StepTrace]], None]


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    question: str
    gold: str
    format: AnswerFormat


@dataclass(frozen=True)
class EvalSettings:
    """Harness-level knobs around one :class:`DecodeConfig`."""

    decode: DecodeConfig = field(default_factory=DecodeConfig)
    instruction_id: str = "1"
    sc_paths: int = 3
    sc_temperature: float = 0.7
    extraction_max_tokens: int = 32
    timing: str = "simulated"  # "simulated" | "wall"
    per_call_ms: float = 1.0
    concurrency: int = 1

    def __post_init__(self):
        if self.timing not in ("simulated", "wall"):
            raise ValueError(f"timing must be 'simulated' or 'wall', got {self.timing!r}")
        if self.sc_paths < 1:
            raise ValueError("sc_paths must be >= 1")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")


@dataclass(frozen=True)
class RunRecord:
    question_id: str
    method: str
    attribute: str | None
    group_id: str | None
    term: str | None
    rep: int
    answer_raw: str | None
    answer_canonical: str | None
    correct: bool
    latency_ms: float
    step_count: int
    error: str | None = None

    @property
    def answer(self) -> ExtractedAnswer | None:
        if self.answer_raw is None and self.answer_canonical is None:
            return None
        return ExtractedAnswer(raw=self.answer_raw or "", canonical=self.answer_canonical)


@dataclass(frozen=True)
class OverlapReport:
    """Partition of a dataset by which of two record sets answered correctly."""

    pair: tuple[str, str]
    both: int
    only_a: int
    only_b: int
    neither: int

    @property
    def total(self) -> int:
        return self.both + self.only_a + self.only_b + self.neither

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "both": self.both,
            "only_a": self.only_a,
            "only_b": self.only_b,
            "neither": self.neither,
            "total": self.total,
        }


@dataclass(frozen=True)
class LatencyReport:
    reference: str
    mean_latency_ms: dict[str, float]
    relative_speed: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "reference": self.reference,
            "mean_latency_ms": self.mean_latency_ms,
            "relative_speed": self.relative_speed,
        }


def derive_seed(base: int, *parts) -> int:
    """Stable 64-bit seed derived from a base seed and context labels."""
    key = (base & ((1 << 64) - 1)).to_bytes(8, "little")
    h = hashlib.blake2b(digest_size=8, key=key)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    """Load a line-delimited dataset of {id, question, gold, format} records."""
    path = Path(path)
    records: list[DatasetRecord] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", path=str(path), line=lineno) from None
            try:
                fmt = AnswerFormat(obj["format"])
                rid = str(obj["id"])
                question = str(obj["question"])
                gold_text = str(obj["gold"])
            except KeyError as exc:
                raise SchemaError(f"missing field {exc.args[0]!r}", path=str(path), line=lineno) from None
            except ValueError:
                raise SchemaError(
                    f"unknown answer format {obj.get('format')!r}", path=str(path), line=lineno
                ) from None
            if rid in seen:
                raise SchemaError(f"duplicate question id {rid!r}", path=str(path), line=lineno)
            seen.add(rid)
            gold = parse_answer(gold_text, fmt)
            if gold is None:
                raise SchemaError(
                    f"gold answer {gold_text!r} is not parseable as {fmt.value}",
                    path=str(path),
                    line=lineno,
                )
            records.append(DatasetRecord(id=rid, question=question, gold=gold, format=fmt))
    return records


def record_to_dict(record: RunRecord) -> dict:
    return {
        "question_id": record.question_id,
        "method": record.method,
        "attribute": record.attribute,
        "group_id": record.group_id,
        "term": record.term,
        "rep": record.rep,
        "answer": None
        if record.answer is None
        else {"raw": record.answer_raw, "canonical": record.answer_canonical},
        "correct": record.correct,
        "latency_ms": record.latency_ms,
        "step_count": record.step_count,
        "error": record.error,
    }


def record_from_dict(obj: dict) -> RunRecord:
    answer = obj.get("answer")
    return RunRecord(
        question_id=obj["question_id"],
        method=obj["method"],
        attribute=obj.get("attribute"),
        group_id=obj.get("group_id"),
        term=obj.get("term"),
        rep=int(obj.get("rep", 0)),
        answer_raw=None if answer is None else answer.get("raw"),
        answer_canonical=None if answer is None else answer.get("canonical"),
        correct=bool(obj["correct"]),
        latency_ms=float(obj["latency_ms"]),
        step_count=int(obj["step_count"]),
        error=obj.get("error"),
    )


def write_records(records: Iterable[RunRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), sort_keys=True) + "\n")


def read_records(path: str | Path) -> list[RunRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if raw:
                records.append(record_from_dict(json.loads(raw)))
    return records


class _Timer:
    """Latency measurement for one record unit; see module docstring."""

    def __init__(self, backend: Backend, settings: EvalSettings):
        self.counted = InstrumentedBackend(backend)
        self.settings = settings
        self._t0 = time.perf_counter()

    def latency_ms(self) -> float:
        if self.settings.timing == "simulated":
            return self.counted.query_count * self.settings.per_call_ms
        return (time.perf_counter() - self._t0) * 1000.0


def _error_record(question: DatasetRecord, method: str, group: PersonaGroup | None, rep: int, timer: _Timer, exc: Exception) -> RunRecord:
    return RunRecord(
        question_id=question.id,
        method=method,
        attribute=group.attribute if group else None,
        group_id=group.group_id if group else None,
        term=None,
        rep=rep,
        answer_raw=None,
        answer_canonical=None,
        correct=False,
        latency_ms=timer.latency_ms(),
        step_count=0,
        error=str(exc),
    )


def _eval_zscot(backend, question, settings, cfg, rep, trace_sink) -> list[RunRecord]:
    timer = _Timer(backend, settings)
    prompt = build_prompt(question.question, cfg.cot_trigger)
    try:
        decode = single_decode(timer.counted, prompt, cfg)
        answer = extract_answer(
            timer.counted,
            question.question,
            decode.text,
            question.format,
            cfg,
            max_tokens=settings.extraction_max_tokens,
        )
    except (BackendError, DecodeError) as exc:
        return [_error_record(question, "zscot", None, rep, timer, exc)]
    if trace_sink is not None:
        trace_sink(question.id, "zscot", None, decode.traces)
    return [
        RunRecord(
            question_id=question.id,
            method="zscot",
            attribute=None,
            group_id=None,
            term=None,
            rep=rep,
            answer_raw=answer.raw,
            answer_canonical=answer.canonical,
            correct=answers_equal(answer.canonical, question.gold, question.format),
            latency_ms=timer.latency_ms(),
            step_count=len(decode.tokens),
            error=None,
        )
    ]


def _eval_choir(backend, question, group, settings, cfg, rep, trace_sink) -> list[RunRecord]:
    instruction = instruction_template(settings.instruction_id)
    prompts = [render_instruction(p, instruction) for p in group.members]
    timer = _Timer(backend, settings)
    try:
        decode = choir_decode(timer.counted, question.question, prompts, cfg)
        answer = extract_answer(
            timer.counted,
            question.question,
            decode.text,
            question.format,
            cfg,
            max_tokens=settings.extraction_max_tokens,
        )
    except (BackendError, DecodeError) as exc:
        return [_error_record(question, "choir", group, rep, timer, exc)]
    if trace_sink is not None:
        trace_sink(question.id, "choir", group.group_id, decode.traces)
    return [
        RunRecord(
            question_id=question.id,
            method="choir",
            attribute=group.attribute,
            group_id=group.group_id,
            term=None,
            rep=rep,
            answer_raw=answer.raw,
            answer_canonical=answer.canonical,
            correct=answers_equal(answer.canonical, question.gold, question.format),
            latency_ms=timer.latency_ms(),
            step_count=decode.logit_queries,
            error=None,
        )
    ]


def _eval_persona(backend, question, group, settings, cfg, rep, aggregate: bool) -> list[RunRecord]:
    instruction = instruction_template(settings.instruction_id)
    timer = _Timer(backend, settings)
    runs = run_persona_individual(
        timer.counted,
        group,
        question.question,
        cfg,
        answer_format=question.format,
        instruction=instruction,
        extraction_max_tokens=settings.extraction_max_tokens,
    )
    total_latency = timer.latency_ms()
    if aggregate:
        answers = [r.answer.canonical if r.answer else None for r in runs]
        rng = np.random.default_rng(derive_seed(cfg.seed, "vote", group.group_id))
        vote = majority_vote(answers, rng)
        errors = [r.error for r in runs if r.error]
        return [
            RunRecord(
                question_id=question.id,
                method="persona_maj",
                attribute=group.attribute,
                group_id=group.group_id,
                term=None,
                rep=rep,
                answer_raw=None if vote.winner is None else vote.winner,
                answer_canonical=vote.winner,
                correct=answers_equal(vote.winner, question.gold, question.format),
                latency_ms=total_latency,
                step_count=sum(len(r.decode.tokens) for r in runs if r.decode),
                error="; ".join(errors) if errors else None,
            )
        ]
    # Independent scoring: one record per persona, latency amortized evenly.
    share = total_latency / len(runs)
    records = []
    for run in runs:
        answer = run.answer
        records.append(
            RunRecord(
                question_id=question.id,
                method="persona_avg",
                attribute=group.attribute,
                group_id=group.group_id,
                term=run.persona.term,
                rep=rep,
                answer_raw=answer.raw if answer else None,
                answer_canonical=answer.canonical if answer else None,
                correct=answers_equal(answer.canonical if answer else None, question.gold, question.format),
                latency_ms=share,
                step_count=len(run.decode.tokens) if run.decode else 0,
                error=run.error,
            )
        )
    return records


def _eval_sampled(backend, question, group, settings, cfg, rep, method) -> list[RunRecord]:
    timer = _Timer(backend, settings)
    try:
        if method == "sc":
            prompt = build_prompt(question.question, cfg.cot_trigger)
            result = self_consistency(
                timer.counted,
                prompt,
                question.question,
                settings.sc_paths,
                cfg,
                answer_format=question.format,
                temperature=settings.sc_temperature,
                extraction_max_tokens=settings.extraction_max_tokens,
            )
        else:
            instruction = instruction_template(settings.instruction_id)
            prompts = [render_instruction(p, instruction) for p in group.members]
            result = choir_with_sc(
                timer.counted,
                question.question,
                prompts,
                settings.sc_paths,
                cfg,
                answer_format=question.format,
                temperature=settings.sc_temperature,
                extraction_max_tokens=settings.extraction_max_tokens,
            )
    except (BackendError, DecodeError) as exc:
        return [_error_record(question, method, group, rep, timer, exc)]
    winner = result.vote.winner
    return [
        RunRecord(
            question_id=question.id,
            method=method,
            attribute=group.attribute if group else None,
            group_id=group.group_id if group else None,
            term=None,
            rep=rep,
            answer_raw=winner,
            answer_canonical=winner,
            correct=answers_equal(winner, question.gold, question.format),
            latency_ms=timer.latency_ms(),
            step_count=sum(p.decode.logit_queries for p in result.paths),
            error=None,
        )
    ]


def _eval_question(
    backend: Backend,
    method: str,
    question: DatasetRecord,
    groups: Sequence[PersonaGroup],
    settings: EvalSettings,
    rep: int,
    trace_sink: TraceSink | None,
) -> list[RunRecord]:
    cfg = replace(settings.decode, seed=derive_seed(settings.decode.seed, "rep", rep, "q", question.id))
    if method == "zscot":
        return _eval_zscot(backend, question, settings, cfg, rep, trace_sink)
    if method == "sc":
        return _eval_sampled(backend, question, None, settings, cfg, rep, "sc")
    records: list[RunRecord] = []
    for group in groups:
        gcfg = replace(cfg, seed=derive_seed(cfg.seed, "group", group.group_id))
        if method == "choir":
            records.extend(_eval_choir(backend, question, group, settings, gcfg, rep, trace_sink))
        elif method == "persona_avg":
            records.extend(_eval_persona(backend, question, group, settings, gcfg, rep, aggregate=False))
        elif method == "persona_maj":
            records.extend(_eval_persona(backend, question, group, settings, gcfg, rep, aggregate=True))
        elif method == "choir_sc":
            records.extend(_eval_sampled(backend, question, group, settings, gcfg, rep, "choir_sc"))
    return records


def evaluate(
    backend: Backend,
    method: str,
    dataset: Sequence[DatasetRecord],
    persona_groups: Sequence[PersonaGroup],
    settings: EvalSettings,
    *,
    rep: int = 0,
    trace_sink: TraceSink | None = None,
) -> list[RunRecord]:
    """Run one method over the dataset; one list of records, dataset order.

    Per-question failures are recorded inline and never abort the batch.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
    if method in _GROUP_METHODS and not persona_groups:
        raise ValueError(f"method {method!r} needs at least one persona group")
    if settings.concurrency == 1 or len(dataset) <= 1:
        batches = [
            _eval_question(backend, method, q, persona_groups, settings, rep, trace_sink)
            for q in dataset
        ]
    else:
        with ThreadPoolExecutor(max_workers=settings.concurrency) as pool:
            batches = list(
                pool.map(
                    lambda q: _eval_question(backend, method, q, persona_groups, settings, rep, trace_sink),
                    dataset,
                )
            )
    return [record for batch in batches for record in batch]


def accuracy(records: Sequence[RunRecord]) -> float:
    """Percent correct; errored records count as incorrect."""
    if not records:
        raise ValueError("accuracy of an empty record list is undefined")
    methods = {r.method for r in records}
    if len(methods) > 1:
        raise ValueError(f"accuracy expects records from a single method, got {sorted(methods)}")
    return 100.0 * sum(1 for r in records if r.correct) / len(records)


def overlap(
    records_a: Sequence[RunRecord],
    records_b: Sequence[RunRecord],
    dataset: Sequence[DatasetRecord] | None = None,
    labels: tuple[str, str] | None = None,
) -> OverlapReport:
    """Partition question ids by which side answered correctly."""

    def correctness(records: Sequence[RunRecord], side: str) -> dict[str, bool]:
        out: dict[str, bool] = {}
        for r in records:
            if r.question_id in out:
                raise ValueError(f"records_{side} has multiple rows for question {r.question_id!r}")
            out[r.question_id] = r.correct
        return out

    by_a = correctness(records_a, "a")
    by_b = correctness(records_b, "b")
    expected = set(by_a)
    if dataset is not None:
        expected = {rec.id for rec in dataset}
    missing_a = sorted(expected - set(by_a))
    missing_b = sorted(expected - set(by_b))
    extra = sorted((set(by_a) | set(by_b)) - expected)
    if missing_a or missing_b or extra:
        raise ValueError(
            "question coverage mismatch: "
            f"missing from a: {missing_a[:5]}, missing from b: {missing_b[:5]}, unexpected: {extra[:5]}"
        )
    both = only_a = only_b = neither = 0
    for qid in expected:
        a, b = by_a[qid], by_b[qid]
        if a and b:
            both += 1
        elif a:
            only_a += 1
        elif b:
            only_b += 1
        else:
            neither += 1
    if labels is None:
        label = lambda rs: rs[0].method if rs else "?"
        labels = (label(records_a), label(records_b))
    return OverlapReport(pair=labels, both=both, only_a=only_a, only_b=only_b, neither=neither)


def lambda_sweep(
    backend: Backend,
    dataset: Sequence[DatasetRecord],
    persona_groups: Sequence[PersonaGroup],
    values: Sequence[float],
    settings: EvalSettings,
) -> list[tuple[float, float]]:
    """Accuracy of the collaborative method at each knowledge-weight value."""
    if not values:
        raise ValueError("lambda_sweep needs at least one value")
    points = []
    for value in values:
        swept = replace(settings, decode=replace(settings.decode, lambda0=float(value)))
        records = evaluate(backend, "choir", dataset, persona_groups, swept)
        points.append((float(value), accuracy(records)))
    return points


def latency_report(records: Sequence[RunRecord], reference: str) -> LatencyReport:
    """Mean latency per method and speed relative to the reference method."""
    sums: dict[str, list[float]] = {}
    for r in records:
        sums.setdefault(r.method, []).append(r.latency_ms)
    if reference not in sums:
        raise ValueError(f"reference method {reference!r} not present in records")
    means = {m: sum(v) / len(v) for m, v in sorted(sums.items())}
    ref = means[reference]
    speed = {m: (ref / mean if mean > 0 else float("inf")) for m, mean in means.items()}
    return LatencyReport(reference=reference, mean_latency_ms=means, relative_speed=speed)


def _std(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    mean = sum(values) / len(values)
    return (sum((v - mean) ** 2 for v in values) / (len(values) - 1)) ** 0.5


def summarize(records: Sequence[RunRecord], reference_method: str | None = None) -> dict:
    """Per-method, per-attribute accuracy plus cross-attribute mean/std and
    significance against a reference method (paired t over attribute scores)."""
    if not records:
        raise ValueError("summarize needs at least one record")
    methods = sorted({r.method for r in records})
    attributes = sorted({r.attribute for r in records if r.attribute})
    summary: dict = {"methods": {}}
    per_attribute_scores: dict[str, dict[str, float]] = {}
    for method in methods:
        mine = [r for r in records if r.method == method]
        tagged = [r for r in mine if r.attribute]
        overall = 100.0 * sum(1 for r in mine if r.correct) / len(mine)
        if tagged:
            per_attr = {
                attr: 100.0
                * sum(1 for r in tagged if r.attribute == attr and r.correct)
                / max(1, sum(1 for r in tagged if r.attribute == attr))
                for attr in attributes
                if any(r.attribute == attr for r in tagged)
            }
        else:
            # Attribute-independent methods repeat their overall score per
            # attribute so cross-method comparisons stay paired.
            per_attr = {attr: overall for attr in attributes} if attributes else {}
        per_attribute_scores[method] = per_attr
        scores = list(per_attr.values()) or [overall]
        summary["methods"][method] = {
            "overall": overall,
            "per_attribute": per_attr,
            "mean": sum(scores) / len(scores),
            "std": _std(scores),
            "significance": None,
        }
    if reference_method is not None:
        if reference_method not in per_attribute_scores:
            raise ValueError(f"reference method {reference_method!r} not present in records")
        ref_scores = per_attribute_scores[reference_method]
        for method in methods:
            if method == reference_method:
                continue
            common = sorted(set(per_attribute_scores[method]) & set(ref_scores))
            if len(common) < 2:
                continue
            result: TTestResult = paired_ttest(
                [per_attribute_scores[method][a] for a in common],
                [ref_scores[a] for a in common],
            )
            summary["methods"][method]["significance"] = {
                "reference": reference_method,
                "t": result.t,
                "p": result.p,
                "note": result.note,
            }
    return summary


def summary_csv(summary: dict) -> str:
    """Comma-separated method-by-attribute accuracy table."""
    attributes = sorted(
        {attr for entry in summary["methods"].values() for attr in entry["per_attribute"]}
    )
    lines = ["method," + ",".join(attributes + ["average"])]
    for method, entry in sorted(summary["methods"].items()):
        cells = [f"{entry['per_attribute'].get(a, float('nan')):.2f}" for a in attributes]
        lines.append(",".join([method] + cells + [f"{entry['mean']:.2f}"]))
    return "\n".join(lines) + "\n"
