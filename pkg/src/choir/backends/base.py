"""Token-level logit provider interface with incremental per-stream state.

A backend owns tokenization and exposes one logit vector per decoding
position.  ``open_stream`` returns the logits for the first generated
position; each ``advance`` appends one token to the stream's state and
returns the logits for the next position.  All vectors are float32 of
length ``model_info().vocab_size``.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import BackendError, SchemaError

LOGIT_DTYPE = np.float32


@dataclass(frozen=True)
class VocabInfo:
    vocab_size: int
    eos_token_id: int
    model_name: str = ""

    def __post_init__(self):
        if self.vocab_size < 2:
            raise SchemaError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if not 0 <= self.eos_token_id < self.vocab_size:
            raise SchemaError(
                f"eos_token_id {self.eos_token_id} out of range for vocab_size {self.vocab_size}"
            )


def as_logits(values, vocab_size: int) -> np.ndarray:
    """Validate and convert a logit vector to float32 of the expected length."""
    arr = np.asarray(values, dtype=LOGIT_DTYPE)
    if arr.ndim != 1 or arr.shape[0] != vocab_size:
        raise BackendError(
            f"logit vector has shape {arr.shape}, expected ({vocab_size},)"
        )
    if not np.all(np.isfinite(arr)):
        raise BackendError("logit vector contains non-finite entries")
    return arr


class Backend(ABC):
    """Abstract logit provider; see the module docstring for the contract."""

    @abstractmethod
    def model_info(self) -> VocabInfo: ...

    @abstractmethod
    def tokenize(self, text: str) -> list[int]: ...

    @abstractmethod
    def detokenize(self, token_ids: Sequence[int]) -> str: ...

    @abstractmethod
    def open_stream(self, prompt_tokens: Sequence[int]) -> tuple[str, np.ndarray]: ...

    @abstractmethod
    def advance(self, handle: str, token_id: int) -> np.ndarray: ...

    @abstractmethod
    def close_stream(self, handle: str) -> None: ...


class InstrumentedBackend(Backend):
    """Delegating wrapper that counts logit queries (one per open/advance).

    Used by the harness for simulated timing and by tests for call
    accounting.  Thread-safe; close/tokenize calls are not counted.
    """

    def __init__(self, inner: Backend):
        self.inner = inner
        self._lock = threading.Lock()
        self._queries = 0

    @property
    def query_count(self) -> int:
        with self._lock:
            return self._queries

    def _tick(self) -> None:
        with self._lock:
            self._queries += 1

    def model_info(self) -> VocabInfo:
        return self.inner.model_info()

    def tokenize(self, text: str) -> list[int]:
        return self.inner.tokenize(text)

    def detokenize(self, token_ids: Sequence[int]) -> str:
        return self.inner.detokenize(token_ids)

    def open_stream(self, prompt_tokens: Sequence[int]) -> tuple[str, np.ndarray]:
        out = self.inner.open_stream(prompt_tokens)
        self._tick()
        return out

    def advance(self, handle: str, token_id: int) -> np.ndarray:
        out = self.inner.advance(handle, token_id)
        self._tick()
        return out

    def close_stream(self, handle: str) -> None:
        self.inner.close_stream(handle)
