"""Model runner: a causal LM with incremental per-stream inference state.

One process pins one model.  The bundled profile ``tiny:<seed>`` builds a
small, deterministically initialized causal transformer over a printable
ASCII character vocabulary: with fixed weights (float64, eval mode, no
sampling inside the server) identical histories always reproduce identical
logits, and cached incremental steps agree with full recomputation to
well below float32 resolution, which is all the wire format carries.
"""

from __future__ import annotations

import string
import threading
from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import GPT2Config, GPT2LMHeadModel

from .errors import ServerError, TokenOutOfRangeError

# Stable character inventory: 94 visible ASCII + space/tab/newline, then EOS.
_ALPHABET = string.digits + string.ascii_letters + string.punctuation + " \t\n"
_FALLBACK = "?"


class CharTokenizer:
    """Character-level tokenizer over printable ASCII.

    Characters outside the inventory normalize to ``?`` (documented
    normalization; round trips are exact for in-inventory text).
    """

    def __init__(self):
        self.alphabet = _ALPHABET
        self._to_id = {ch: i for i, ch in enumerate(self.alphabet)}
        self.eos_token_id = len(self.alphabet)
        self.vocab_size = len(self.alphabet) + 1

    def encode(self, text: str) -> list[int]:
        fallback = self._to_id[_FALLBACK]
        return [self._to_id.get(ch, fallback) for ch in text]

    def decode(self, token_ids: list[int]) -> str:
        parts = []
        for t in token_ids:
            if not 0 <= t < self.vocab_size:
                raise TokenOutOfRangeError(f"token id {t} out of range [0, {self.vocab_size})")
            parts.append("" if t == self.eos_token_id else self.alphabet[t])
        return "".join(parts)


def build_tiny_model(seed: int, vocab_size: int) -> GPT2LMHeadModel:
    """Small causal transformer with seed-deterministic random weights."""
    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=vocab_size,
        n_positions=1024,
        n_embd=64,
        n_layer=2,
        n_head=2,
        bos_token_id=vocab_size - 1,
        eos_token_id=vocab_size - 1,
    )
    model = GPT2LMHeadModel(config).double().eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return model


@dataclass
class InferenceState:
    """Cached incremental state for one stream."""

    history: list[int] = field(default_factory=list)
    cache: object = None


class ModelRunner:
    """Serialized access to one model's forward passes.

    The model lock keeps forward passes single-file (CPU inference), which
    also guarantees bitwise-stable outputs for identical histories.
    """

    def __init__(self, model: GPT2LMHeadModel, tokenizer: CharTokenizer, name: str):
        self.model = model
        self.tokenizer = tokenizer
        self.name = name
        self.max_positions = int(model.config.n_positions)
        self._lock = threading.Lock()

    @classmethod
    def from_spec(cls, spec: str) -> "ModelRunner":
        """Build a runner from a launch spec; ``tiny:<seed>`` is bundled."""
        kind, _, arg = spec.partition(":")
        if kind == "tiny":
            seed = int(arg) if arg else 0
            tokenizer = CharTokenizer()
            return cls(build_tiny_model(seed, tokenizer.vocab_size), tokenizer, f"tiny-{seed}")
        raise ServerError(f"unknown model spec {spec!r}; expected tiny:<seed>")

    @property
    def vocab_size(self) -> int:
        return self.tokenizer.vocab_size

    @property
    def eos_token_id(self) -> int:
        return self.tokenizer.eos_token_id

    def _forward(self, token_ids: list[int], cache) -> tuple[np.ndarray, object]:
        ids = torch.tensor([token_ids], dtype=torch.long)
        with torch.no_grad():
            out = self.model(ids, past_key_values=cache, use_cache=True)
        logits = out.logits[0, -1].numpy().astype(np.float32)
        return logits, out.past_key_values

    def check_token(self, token_id: int) -> None:
        if not 0 <= token_id < self.vocab_size:
            raise TokenOutOfRangeError(f"token id {token_id} out of range [0, {self.vocab_size})")

    def prefill(self, prompt_tokens: list[int]) -> tuple[InferenceState, np.ndarray]:
        if not prompt_tokens:
            raise ServerError("prompt must be non-empty")
        for t in prompt_tokens:
            self.check_token(t)
        if len(prompt_tokens) >= self.max_positions:
            raise ServerError(
                f"prompt of {len(prompt_tokens)} tokens exceeds the model's "
                f"{self.max_positions}-position window"
            )
        with self._lock:
            logits, cache = self._forward(list(prompt_tokens), None)
        return InferenceState(history=list(prompt_tokens), cache=cache), logits

    def step(self, state: InferenceState, token_id: int) -> np.ndarray:
        self.check_token(token_id)
        if len(state.history) + 1 >= self.max_positions:
            raise ServerError("stream exceeded the model's position window")
        with self._lock:
            logits, cache = self._forward([token_id], state.cache)
        state.history.append(token_id)
        state.cache = cache
        return logits

    def full_logits(self, token_ids: list[int]) -> np.ndarray:
        """Cache-free forward over the whole sequence (reference path)."""
        with self._lock:
            logits, _ = self._forward(list(token_ids), None)
        return logits
