"""Baseline aggregators and multi-path fusion variants.

Covers the per-persona independent runs behind the averaged/majority
baselines, majority voting with seeded uniform tie-breaking, sampled
multi-path decoding with vote aggregation, and the combination of the
collaborative decoder with sampled paths.  Path k of an N-path run uses
seed ``master_seed XOR k`` so one master seed reproduces every path.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backends.base import Backend
from .engine import (
    DecodeConfig,
    DecodeResult,
    build_prompt,
    choir_decode,
    single_decode,
    stochastic_config,
)
from .errors import BackendError, DecodeError
from .extraction import AnswerFormat, ExtractedAnswer, extract_answer
from .persona import InstructionTemplate, Persona, PersonaGroup, instruction_template, render_instruction

# Salt for the vote-breaking generator so it never shares a seed with path 0.
VOTE_SEED_SALT = 0x9E3779B97F4A7C15
_SEED_MASK = (1 << 64) - 1

DEFAULT_SC_TEMPERATURE = 0.7


@dataclass(frozen=True)
class VoteOutcome:
    """Majority-vote result; counts exclude unparsed answers."""

    winner: str | None
    counts: dict[str, int]
    was_tie: bool


@dataclass(frozen=True)
class PersonaRun:
    persona: Persona
    answer: ExtractedAnswer | None
    decode: DecodeResult | None
    error: str | None = None


@dataclass(frozen=True)
class SampledPath:
    seed: int
    decode: DecodeResult
    answer: ExtractedAnswer


@dataclass(frozen=True)
class EnsembleResult:
    """A vote plus the sampled paths that produced it (for accounting)."""

    vote: VoteOutcome
    paths: tuple[SampledPath, ...]


def majority_vote(answers: Sequence[str | None], rng: np.random.Generator) -> VoteOutcome:
    """Majority vote over canonical answers.

    Unparsed answers (None) are excluded from counting; an all-unparsed
    ballot yields an unparsed outcome.  Ties break uniformly at random over
    the tied candidates using the supplied generator, with candidates
    ordered lexicographically so the draw is reproducible.
    """
    if len(answers) == 0:
        raise ValueError("majority_vote needs at least one answer")
    valid = [a for a in answers if a is not None]
    if not valid:
        return VoteOutcome(winner=None, counts={}, was_tie=False)
    counts = Counter(valid)
    top = max(counts.values())
    tied = sorted(a for a, c in counts.items() if c == top)
    if len(tied) == 1:
        winner, was_tie = tied[0], False
    else:
        winner, was_tie = tied[int(rng.integers(len(tied)))], True
    return VoteOutcome(winner=winner, counts=dict(sorted(counts.items())), was_tie=was_tie)


def vote_rng(config: DecodeConfig) -> np.random.Generator:
    """Tie-break generator derived from the decode seed."""
    return np.random.default_rng((config.seed ^ VOTE_SEED_SALT) & _SEED_MASK)


def run_persona_individual(
    backend: Backend,
    group: PersonaGroup,
    question: str,
    config: DecodeConfig,
    *,
    answer_format: AnswerFormat,
    instruction: InstructionTemplate | None = None,
    extraction_max_tokens: int = 32,
) -> list[PersonaRun]:
    """One independent decode + extraction per group member, no fusion.

    A failing member is recorded with its error and the run continues.
    """
    instruction = instruction or instruction_template()
    runs: list[PersonaRun] = []
    for persona in group.members:
        prompt = build_prompt(
            question, config.cot_trigger, persona_instruction=render_instruction(persona, instruction)
        )
        try:
            decode = single_decode(backend, prompt, config)
            answer = extract_answer(
                backend, question, decode.text, answer_format, config, max_tokens=extraction_max_tokens
            )
            runs.append(PersonaRun(persona=persona, answer=answer, decode=decode))
        except (BackendError, DecodeError) as exc:
            runs.append(PersonaRun(persona=persona, answer=None, decode=None, error=str(exc)))
    return runs


def self_consistency(
    backend: Backend,
    prompt: str,
    question: str,
    n_paths: int,
    config: DecodeConfig,
    *,
    answer_format: AnswerFormat,
    temperature: float = DEFAULT_SC_TEMPERATURE,
    extraction_max_tokens: int = 32,
) -> EnsembleResult:
    """Sample ``n_paths`` reasoning paths from one prompt and vote.

    Paths decode at the given sampling temperature (0 degenerates to
    repeated greedy decoding); extraction stays greedy.
    """
    if n_paths < 1:
        raise ValueError("self_consistency needs n_paths >= 1")
    paths = []
    for k in range(n_paths):
        cfg = stochastic_config(config, config.seed ^ k, temperature)
        decode = single_decode(backend, prompt, cfg)
        answer = extract_answer(
            backend, question, decode.text, answer_format, cfg, max_tokens=extraction_max_tokens
        )
        paths.append(SampledPath(seed=cfg.seed, decode=decode, answer=answer))
    vote = majority_vote([p.answer.canonical for p in paths], vote_rng(config))
    return EnsembleResult(vote=vote, paths=tuple(paths))


def choir_with_sc(
    backend: Backend,
    question: str,
    persona_prompts: Sequence[str],
    n_paths: int,
    config: DecodeConfig,
    *,
    answer_format: AnswerFormat,
    temperature: float = DEFAULT_SC_TEMPERATURE,
    extraction_max_tokens: int = 32,
) -> EnsembleResult:
    """N stochastic collaborative decodes over the same persona prompts,
    each extracted, then majority-voted.  With ``n_paths=1`` and
    ``temperature=0`` this reduces to one plain collaborative decode."""
    if n_paths < 1:
        raise ValueError("choir_with_sc needs n_paths >= 1")
    paths = []
    for k in range(n_paths):
        cfg = stochastic_config(config, config.seed ^ k, temperature)
        decode = choir_decode(backend, question, persona_prompts, cfg)
        answer = extract_answer(
            backend, question, decode.text, answer_format, cfg, max_tokens=extraction_max_tokens
        )
        paths.append(SampledPath(seed=cfg.seed, decode=decode, answer=answer))
    vote = majority_vote([p.answer.canonical for p in paths], vote_rng(config))
    return EnsembleResult(vote=vote, paths=tuple(paths))
