"""Character-level bigram toy model with add-one smoothing in log space.

The vocabulary is the corpus alphabet plus one end-of-sequence token.  The
logit for moving from the last character ``c`` to token ``v`` is
``ln(count(c -> v) + 1)``, so every transition is finite and the whole
table is auditable by brute force.  Logits depend only on the last token
(Markov property), which several engine reduction tests rely on.
"""

from __future__ import annotations

import itertools
import logging
import threading
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import BackendError, SchemaError, TokenOutOfRangeError, UnknownStreamError
from .base import LOGIT_DTYPE, Backend, VocabInfo

log = logging.getLogger(__name__)


class BigramBackend(Backend):
    def __init__(self, corpus: Iterable[str], *, model_name: str = "bigram"):
        docs = [d for d in corpus if d]
        if not docs:
            raise SchemaError("bigram corpus must contain at least one non-empty string")
        alphabet = sorted({ch for doc in docs for ch in doc})
        self._alphabet = alphabet
        self._char_to_id = {ch: i for i, ch in enumerate(alphabet)}
        vocab_size = len(alphabet) + 1
        self._info = VocabInfo(
            vocab_size=vocab_size, eos_token_id=len(alphabet), model_name=model_name
        )
        counts = np.zeros((vocab_size, vocab_size), dtype=np.float64)
        eos = self._info.eos_token_id
        for doc in docs:
            ids = [self._char_to_id[ch] for ch in doc]
            for a, b in zip(ids, ids[1:]):
                counts[a, b] += 1
            counts[ids[-1], eos] += 1
        self._logits = np.log1p(counts).astype(LOGIT_DTYPE)
        self._lock = threading.Lock()
        self._handles: dict[str, int] = {}
        self._ids = itertools.count(1)

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "BigramBackend":
        text = Path(path).read_text(encoding="utf-8")
        return cls([line for line in text.splitlines() if line], **kwargs)

    @property
    def live_count(self) -> int:
        with self._lock:
            return len(self._handles)

    def model_info(self) -> VocabInfo:
        return self._info

    def tokenize(self, text: str) -> list[int]:
        ids = []
        for ch in text:
            token = self._char_to_id.get(ch)
            if token is None:
                raise TokenOutOfRangeError(f"character {ch!r} is not in the corpus alphabet")
            ids.append(token)
        return ids

    def detokenize(self, token_ids: Sequence[int]) -> str:
        eos = self._info.eos_token_id
        parts = []
        for t in token_ids:
            if not 0 <= t < self._info.vocab_size:
                raise TokenOutOfRangeError(f"token id {t} out of range")
            parts.append("" if t == eos else self._alphabet[t])
        return "".join(parts)

    def open_stream(self, prompt_tokens: Sequence[int]) -> tuple[str, np.ndarray]:
        tokens = [int(t) for t in prompt_tokens]
        if not tokens:
            raise BackendError("prompt must be non-empty")
        for t in tokens:
            if not 0 <= t < self._info.vocab_size:
                raise TokenOutOfRangeError(f"prompt token {t} out of range")
        last = tokens[-1]
        if last == self._info.eos_token_id:
            raise BackendError("prompt may not end with the end-of-sequence token")
        with self._lock:
            handle = f"b{next(self._ids)}"
            self._handles[handle] = last
        return handle, self._logits[last].copy()

    def advance(self, handle: str, token_id: int) -> np.ndarray:
        if not 0 <= token_id < self._info.vocab_size:
            raise TokenOutOfRangeError(f"token id {token_id} out of range")
        if token_id == self._info.eos_token_id:
            raise BackendError("cannot advance past the end-of-sequence token")
        with self._lock:
            if handle not in self._handles:
                raise UnknownStreamError(f"unknown stream handle {handle!r}")
            self._handles[handle] = token_id
        return self._logits[token_id].copy()

    def close_stream(self, handle: str) -> None:
        with self._lock:
            if self._handles.pop(handle, None) is None:
                log.warning("close of unknown bigram stream handle %r ignored", handle)
