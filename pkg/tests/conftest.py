from __future__ import annotations

import pytest

from choir.backends import BigramBackend, ScriptedBackend
from choir.engine import DEFAULT_COT_TRIGGER, build_prompt

QUESTION = "What is 2+2?"
PERSONA_PROMPTS = [
    "You are a careful accountant.",
    "You are a patient math teacher.",
    "You are a curious child.",
]

# Hand-built 3-persona fixture: vocab 5, eos 4, four declared steps per
# stream.  Step 4 drives the fused argmax onto the end-of-sequence token.
ORACLE_STREAM_LOGITS = {
    "base": [
        [1.2, 0.3, -0.5, 0.1, -1.0],
        [0.2, 1.5, 0.0, -0.3, -0.8],
        [-0.1, 0.4, 1.1, 0.6, 0.0],
        [0.3, -0.2, 0.1, 0.0, 1.8],
    ],
    "p1": [
        [2.0, 1.0, 0.0, -1.0, -2.0],
        [0.5, 2.2, -0.4, 0.3, -1.5],
        [0.0, 0.8, 1.9, -0.2, -0.6],
        [0.1, 0.0, -0.3, 0.2, 2.5],
    ],
    "p2": [
        [1.8, 1.4, 0.2, -0.7, -1.1],
        [-0.2, 1.9, 0.6, 0.0, -0.9],
        [0.4, 0.2, 1.5, 0.9, -0.3],
        [-0.5, 0.3, 0.0, 0.1, 2.1],
    ],
    "p3": [
        [0.9, 1.6, -0.2, 0.4, -1.4],
        [0.1, 1.2, 0.8, -0.6, -1.0],
        [-0.3, 0.5, 2.2, 0.3, -0.2],
        [0.2, -0.1, 0.4, -0.3, 1.9],
    ],
}


def oracle_fixture() -> dict:
    """Scripted fixture wiring the oracle logits to the engine's prompts."""
    streams = [
        {
            "label": "base",
            "match": build_prompt(QUESTION, DEFAULT_COT_TRIGGER),
            "prompt_tokens": [0],
            "steps": ORACLE_STREAM_LOGITS["base"],
        }
    ]
    for i, persona in enumerate(PERSONA_PROMPTS, start=1):
        streams.append(
            {
                "label": f"p{i}",
                "match": build_prompt(QUESTION, DEFAULT_COT_TRIGGER, persona_instruction=persona),
                "prompt_tokens": [i],
                "steps": ORACLE_STREAM_LOGITS[f"p{i}"],
            }
        )
    return {
        "vocab_size": 5,
        "eos_token_id": 4,
        "token_texts": ["A", "B", "C", "D", ""],
        "streams": streams,
    }


def constant_fixture(steps: list[list[float]], vocab_size: int = 5, eos: int = 4) -> dict:
    """Fixture where every prompt replays the same declared step logits."""
    return {
        "vocab_size": vocab_size,
        "eos_token_id": eos,
        "streams": [
            {"label": "all", "match_kind": "any", "prompt_tokens": [0], "steps": steps}
        ],
    }


@pytest.fixture
def oracle_backend() -> ScriptedBackend:
    return ScriptedBackend(oracle_fixture())


BIGRAM_CORPUS = [
    "the cat sat on the mat",
    "the dog sat on the log",
    "a cat and a dog met at the door",
    "the cat ate the apple",
]


@pytest.fixture
def bigram_backend() -> BigramBackend:
    return BigramBackend(BIGRAM_CORPUS)
