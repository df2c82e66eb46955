#!/usr/bin/env python3
"""The collaborative decoding loop, step by step.

Runs the fused decoder over a character-bigram toy model so every quantity
is small enough to print: per-stream confidences, the consensus, each
stream's divergence-derived weight, and the chosen token.  Also shows the
two degenerate behaviours worth knowing: identical persona prompts reduce
to plain greedy decoding, and a zero knowledge weight removes the
no-persona stream's vote entirely.
"""

from choir.backends import BigramBackend
from choir.engine import DecodeConfig, build_prompt, choir_decode, single_decode

corpus = [
    "the cat sat on the mat",
    "the dog sat on the log",
    "a cat and a dog met at the door\nboth sat down",
    "the cat ate the apple",
]
backend = BigramBackend(corpus)
question = "the cat"
personas = ["a dog\n", "a cat\n", "the door\n"]

config = DecodeConfig(max_len=12, cot_trigger="")
result = choir_decode(backend, question, personas, config)

print(f"question: {question!r}")
print(f"decoded: {result.text!r} (stop: {result.stop_reason})\n")
print("step  token  confidences           consensus  weights")
for trace in result.traces:
    confs = " ".join(f"{c:.3f}" for c in trace.confidences)
    weights = " ".join(f"{w:+.3f}" for w in trace.weights)
    token = backend.detokenize([trace.chosen_token]) or "<eos>"
    print(f"{trace.step:>4}  {token!r:6} [{confs}]  {trace.consensus:.3f}     [{weights}]")

# Identical persona prompts mean identical logits per step, so the fused
# choice is exactly the single-stream greedy choice.
same = choir_decode(backend, question, ["a cat\n"] * 3, config)
alone = single_decode(backend, build_prompt(question, ""), config)
print(f"\nsame-path reduction holds: {same.tokens == alone.tokens}")

# With lambda0 = 0 the no-persona stream contributes nothing.
no_knowledge = choir_decode(
    backend, question, personas, DecodeConfig(lambda0=0.0, max_len=12, cot_trigger="")
)
print(f"decoded without the pretrained stream: {no_knowledge.text!r}")
