#!/usr/bin/env python3
"""Majority voting, tie-breaking, and sampled multi-path ensembles.

Ballots exclude unparseable answers; exact ties break uniformly at random
under a seeded generator, so outcomes are reproducible per seed and
uniform across seeds.
"""

import numpy as np

from choir.backends import BigramBackend
from choir.engine import DecodeConfig
from choir.ensembles import majority_vote, self_consistency
from choir.extraction import AnswerFormat

print("strict majority:", majority_vote(["5", "5", "7"], np.random.default_rng(0)))
print("unparsed dropped:", majority_vote([None, None, "4"], np.random.default_rng(0)))

winners = {"a": 0, "b": 0, "c": 0}
for seed in range(9000):
    winners[majority_vote(["a", "b", "c"], np.random.default_rng(seed)).winner] += 1
print("three-way tie over 9000 seeds:", winners)

# Sampled paths: the same master seed reproduces every path (path k draws
# from seed master XOR k), and the vote generator is derived from the
# master too, so the whole ensemble is replayable.
backend = BigramBackend(
    [
        "one two three four\nfive 5 55",
        "count 5 then 55 then 5",
        "Therefore, the answer (arabic numerals) is 55",
    ]
)
result = self_consistency(
    backend,
    "count 5",
    "count 5",
    3,
    DecodeConfig(max_len=10, seed=42, cot_trigger=""),
    answer_format=AnswerFormat.ARABIC_NUMBER,
)
print("\nsampled paths at temperature 0.7:")
for path in result.paths:
    print(f"  seed {path.seed}: rationale {path.decode.text!r} -> {path.answer.canonical!r}")
print("vote:", result.vote)
