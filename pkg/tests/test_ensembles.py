from __future__ import annotations

import numpy as np
import pytest

from choir.backends import ScriptedBackend
from choir.engine import DecodeConfig, build_prompt, choir_decode
from choir.ensembles import (
    choir_with_sc,
    majority_vote,
    run_persona_individual,
    self_consistency,
)
from choir.extraction import AnswerFormat
from choir.persona import DemographicAttribute, PersonaTemplate, expand_template

GROUP = expand_template(
    PersonaTemplate(
        id="age_professor",
        attribute=DemographicAttribute(name="age", terms=("old", "young")),
        variants={"old": "an old professor", "young": "a young professor"},
    )
)


def _digit_backend():
    """Catch-all fixture emitting '42' then EOS for every prompt."""
    fixture = {
        "vocab_size": 5,
        "eos_token_id": 4,
        "token_texts": ["4", "2", "7", " ", ""],
        "streams": [
            {
                "label": "all",
                "match_kind": "any",
                "prompt_tokens": [0],
                "steps": [
                    [30.0, 0.0, 0.0, 0.0, 0.0],
                    [0.0, 30.0, 0.0, 0.0, 0.0],
                    [0.0, 0.0, 0.0, 0.0, 30.0],
                ],
            }
        ],
    }
    return ScriptedBackend(fixture)


def test_majority_vote_strict_majority():
    outcome = majority_vote(["5", "5", "7"], np.random.default_rng(0))
    assert outcome.winner == "5"
    assert outcome.counts == {"5": 2, "7": 1}
    assert not outcome.was_tie


def test_majority_vote_excludes_unparsed():
    outcome = majority_vote([None, None, "4"], np.random.default_rng(0))
    assert outcome.winner == "4"
    assert outcome.counts == {"4": 1}
    assert not outcome.was_tie


def test_majority_vote_all_unparsed_is_unparsed():
    outcome = majority_vote([None, None], np.random.default_rng(0))
    assert outcome.winner is None
    assert outcome.counts == {}


def test_majority_vote_tie_is_seeded_and_uniformish():
    winners = {"a": 0, "b": 0, "c": 0}
    for seed in range(3000):
        outcome = majority_vote(["a", "b", "c"], np.random.default_rng(seed))
        assert outcome.was_tie
        winners[outcome.winner] += 1
    assert all(count > 800 for count in winners.values())
    # Determinism for a fixed seed.
    again = majority_vote(["a", "b", "c"], np.random.default_rng(17))
    assert again == majority_vote(["a", "b", "c"], np.random.default_rng(17))


def test_majority_vote_winner_has_maximal_count():
    rng = np.random.default_rng(5)
    for _ in range(200):
        ballots = [str(rng.integers(4)) if rng.random() > 0.2 else None for _ in range(7)]
        if not any(b is not None for b in ballots):
            continue
        outcome = majority_vote(ballots, rng)
        assert outcome.counts[outcome.winner] == max(outcome.counts.values())
        tied = [a for a, c in outcome.counts.items() if c == max(outcome.counts.values())]
        assert outcome.was_tie == (len(tied) >= 2)


def test_majority_vote_empty_input_is_an_error():
    with pytest.raises(ValueError):
        majority_vote([], np.random.default_rng(0))


def test_run_persona_individual_one_answer_per_member():
    backend = _digit_backend()
    runs = run_persona_individual(
        backend, GROUP, "How many?", DecodeConfig(seed=3), answer_format=AnswerFormat.ARABIC_NUMBER
    )
    assert [r.persona.term for r in runs] == ["old", "young"]
    assert all(r.error is None for r in runs)
    assert [r.answer.canonical for r in runs] == ["42", "42"]


def test_run_persona_individual_records_failures_and_continues():
    # Only the "old" member's prompt is declared; the other member fails.
    old_prompt = build_prompt(
        "How many?",
        DecodeConfig().cot_trigger,
        persona_instruction="You are an old professor. Your responses should closely mirror the knowledge and abilities of this persona.",
    )
    steps = [[30.0, 0, 0, 0, 0], [0, 0, 0, 0, 30.0]]
    fixture = {
        "vocab_size": 5,
        "eos_token_id": 4,
        "token_texts": ["4", "2", "7", " ", ""],
        "streams": [
            {"label": "old", "match": old_prompt, "prompt_tokens": [0], "steps": steps},
            {"label": "extract", "match": "How many?\n4\n", "match_kind": "prefix", "prompt_tokens": [1], "steps": steps},
        ],
    }
    backend = ScriptedBackend(fixture)
    runs = run_persona_individual(
        backend, GROUP, "How many?", DecodeConfig(), answer_format=AnswerFormat.ARABIC_NUMBER
    )
    assert runs[0].error is None
    assert runs[0].answer.canonical == "4"
    assert runs[1].error is not None
    assert runs[1].answer is None


def test_self_consistency_deterministic_fixture_is_unanimous():
    backend = _digit_backend()
    result = self_consistency(
        backend,
        "prompt",
        "How many?",
        3,
        DecodeConfig(seed=11),
        answer_format=AnswerFormat.ARABIC_NUMBER,
    )
    assert result.vote.winner == "42"
    assert not result.vote.was_tie
    assert result.vote.counts == {"42": 3}
    assert len(result.paths) == 3
    assert [p.seed for p in result.paths] == [11, 10, 9]  # master XOR path index


def test_self_consistency_single_path_matches_single_stochastic_decode():
    backend = _digit_backend()
    result = self_consistency(
        backend, "p", "q", 1, DecodeConfig(seed=5), answer_format=AnswerFormat.ARABIC_NUMBER
    )
    assert result.paths[0].seed == 5
    assert result.vote.winner == result.paths[0].answer.canonical


def test_choir_with_sc_reduces_to_plain_choir_at_temperature_zero():
    from conftest import PERSONA_PROMPTS, QUESTION, oracle_fixture

    fixture = oracle_fixture()
    fixture["streams"].append(
        {"label": "extract", "match_kind": "any", "prompt_tokens": [0, 1], "steps": [[0, 0, 0, 0, 30.0]]}
    )
    backend = ScriptedBackend(fixture)
    config = DecodeConfig(lambda0=2.0, max_len=3, seed=21)
    plain = choir_decode(backend, QUESTION, PERSONA_PROMPTS, config)
    backend = ScriptedBackend(fixture)
    combo = choir_with_sc(
        backend,
        QUESTION,
        PERSONA_PROMPTS,
        1,
        config,
        answer_format=AnswerFormat.FREE_STRING,
        temperature=0.0,
    )
    assert combo.paths[0].decode.tokens == plain.tokens


def test_choir_with_sc_fixed_seed_is_reproducible():
    backend = _digit_backend()
    kwargs = dict(answer_format=AnswerFormat.ARABIC_NUMBER, temperature=0.7)
    first = choir_with_sc(backend, "q", ["p1", "p2"], 3, DecodeConfig(seed=8, max_len=3), **kwargs)
    second = choir_with_sc(backend, "q", ["p1", "p2"], 3, DecodeConfig(seed=8, max_len=3), **kwargs)
    assert first == second


def test_majority_from_two_of_three_paths():
    votes = majority_vote(["X", "X", "Y"], np.random.default_rng(1))
    assert votes.winner == "X"
    assert votes.counts == {"X": 2, "Y": 1}
