#!/usr/bin/env python3
"""Desk-scale evaluation: methods, summaries, overlap, sweeps, latency.

Builds a small scripted fixture (exact logits per prompt, so everything is
reproducible), evaluates three methods over a three-question dataset, and
prints the report surfaces: per-method summary with significance, the
correct-set overlap of two record sets, a knowledge-weight sweep, and the
relative-latency table.
"""

import json

from choir.backends import ScriptedBackend
from choir.engine import DEFAULT_COT_TRIGGER, DecodeConfig, build_prompt
from choir.extraction import ANSWER_TRIGGERS, AnswerFormat
from choir.harness import (
    DatasetRecord,
    EvalSettings,
    accuracy,
    evaluate,
    lambda_sweep,
    latency_report,
    overlap,
    summarize,
)
from choir.persona import (
    DemographicAttribute,
    PersonaTemplate,
    expand_template,
    instruction_template,
    render_instruction,
)

GROUP = expand_template(
    PersonaTemplate(
        id="age_professor",
        attribute=DemographicAttribute(name="age", terms=("old", "young")),
        variants={
            "old": "an old philosophy professor",
            "young": "a young philosophy professor",
        },
    )
)
QA = [("d1", "What is 6 x 7?", "42", "42"), ("d2", "What is 9 + 9?", "18", "17"), ("d3", "Half of 24?", "12", "12")]


def one_hot(token, vocab=12, peak=30.0):
    row = [0.0] * vocab
    row[token] = peak
    return row


def emit(text):
    steps = [one_hot(int(ch)) for ch in text]
    return steps + [one_hot(11)]


def build_fixture():
    """One rationale stream per (question, persona-or-none) plus extraction streams."""
    instruction = instruction_template()
    streams, counter = [], iter(range(1000))

    def add(match, steps):
        i = next(counter)
        streams.append(
            {"match": match, "prompt_tokens": [i // 100 % 10, i // 10 % 10, i % 10], "steps": steps}
        )

    trigger = ANSWER_TRIGGERS[AnswerFormat.ARABIC_NUMBER]
    for qid, question, _, answered in QA:
        marker = qid[-1]
        add(build_prompt(question, DEFAULT_COT_TRIGGER), emit(marker))
        add(f"{question}\n{marker}\n{trigger}", emit(answered))
        for persona in GROUP.members:
            rendered = render_instruction(persona, instruction)
            add(build_prompt(question, DEFAULT_COT_TRIGGER, persona_instruction=rendered), emit(marker))
    return {
        "vocab_size": 12,
        "eos_token_id": 11,
        "token_texts": [str(d) for d in range(10)] + [" ", ""],
        "streams": streams,
    }


backend = ScriptedBackend(build_fixture())
dataset = [
    DatasetRecord(id=qid, question=question, gold=gold, format=AnswerFormat.ARABIC_NUMBER)
    for qid, question, gold, _ in QA
]
settings = EvalSettings(decode=DecodeConfig(max_len=8, seed=7))

records = {}
for method in ("zscot", "choir", "persona_maj"):
    records[method] = evaluate(backend, method, dataset, [GROUP], settings)
    print(f"{method:12} accuracy {accuracy(records[method]):6.2f}%")

print("\nsummary (with significance vs zscot):")
summary = summarize(records["zscot"] + records["choir"], reference_method="zscot")
print(json.dumps(summary, indent=2, sort_keys=True))

print("overlap of zscot vs choir correct sets:")
print(json.dumps(overlap(records["zscot"], records["choir"]).to_dict(), indent=2))

print("\nknowledge-weight sweep:")
for value, acc in lambda_sweep(backend, dataset, [GROUP], [0, 1, 2, 3, 4], settings):
    print(f"  lambda0={value:g}: {acc:.2f}%")

print("\nrelative latency (simulated one-cost-per-query clock):")
report = latency_report(records["zscot"] + records["choir"], reference="zscot")
for method, speed in report.relative_speed.items():
    print(f"  {method:12} mean {report.mean_latency_ms[method]:6.1f} ms, {speed:.2f}x")
