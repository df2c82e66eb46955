"""Replay backend: fixtures declare the logits for every stream and step.

Fixtures make oracle tests exact and finite.  Each declared stream carries
a prompt matcher (exact text, prefix, or catch-all), the token ids its
prompt tokenizes to, and one logit vector per step.  Requesting more steps
than declared is an error rather than silent invention.

Fixture schema (JSON)::

    {
      "vocab_size": 5,
      "eos_token_id": 4,
      "token_texts": ["A", "B", "C", "D", ""],      # optional
      "streams": [
        {"label": "base",
         "match": "Q\\nLet's think step by step",
         "match_kind": "exact",                      # exact | prefix | any
         "prompt_tokens": [0],
         "steps": [[0.1, 2.0, -1.0, 0.0, 0.5], ...]},
        ...
      ]
    }
"""

from __future__ import annotations

import itertools
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import (
    BackendError,
    FixtureExhaustedError,
    SchemaError,
    TokenOutOfRangeError,
    UnknownStreamError,
)
from .base import Backend, VocabInfo, as_logits

log = logging.getLogger(__name__)

_MATCH_KINDS = ("exact", "prefix", "any")


@dataclass(frozen=True)
class ScriptedStream:
    label: str
    match: str
    match_kind: str
    prompt_tokens: tuple[int, ...]
    steps: tuple[np.ndarray, ...]


def _parse_stream(spec: Mapping, index: int, vocab_size: int) -> ScriptedStream:
    where = f"streams[{index}]"
    label = spec.get("label", f"stream{index}")
    kind = spec.get("match_kind", "exact")
    if kind not in _MATCH_KINDS:
        raise SchemaError(f"{where}: match_kind {kind!r} not one of {_MATCH_KINDS}")
    match = spec.get("match", "")
    if kind != "any" and not match:
        raise SchemaError(f"{where}: match text required for match_kind {kind!r}")
    try:
        prompt_tokens = tuple(int(t) for t in spec["prompt_tokens"])
        raw_steps = spec["steps"]
    except KeyError as exc:
        raise SchemaError(f"{where}: missing field {exc.args[0]!r}") from None
    if not prompt_tokens:
        raise SchemaError(f"{where}: prompt_tokens must be non-empty")
    for t in prompt_tokens:
        if not 0 <= t < vocab_size:
            raise SchemaError(f"{where}: prompt token {t} out of range")
    if not raw_steps:
        raise SchemaError(f"{where}: at least one step must be declared")
    steps = tuple(as_logits(step, vocab_size) for step in raw_steps)
    return ScriptedStream(label, match, kind, prompt_tokens, steps)


class ScriptedBackend(Backend):
    """Backend that replays fixture-declared logits.

    ``per_call_delay_s`` sleeps on every logit query, modelling a backend
    with a fixed sequential cost per call (used for latency-shape tests).
    """

    def __init__(self, fixture: Mapping, *, per_call_delay_s: float = 0.0):
        try:
            self._info = VocabInfo(
                vocab_size=int(fixture["vocab_size"]),
                eos_token_id=int(fixture["eos_token_id"]),
                model_name=str(fixture.get("model_name", "scripted")),
            )
        except KeyError as exc:
            raise SchemaError(f"fixture missing field {exc.args[0]!r}") from None
        vocab = self._info.vocab_size
        texts = fixture.get("token_texts")
        if texts is None:
            texts = [f"<{i}>" for i in range(vocab)]
        if len(texts) != vocab:
            raise SchemaError(f"token_texts has {len(texts)} entries, expected {vocab}")
        self._token_texts = [str(t) for t in texts]
        self._streams = [
            _parse_stream(spec, i, vocab) for i, spec in enumerate(fixture.get("streams", []))
        ]
        if not self._streams:
            raise SchemaError("fixture declares no streams")
        by_tokens: dict[tuple[int, ...], str] = {}
        for stream in self._streams:
            prior = by_tokens.get(stream.prompt_tokens)
            if prior is not None and prior != stream.label:
                raise SchemaError(
                    f"streams {prior!r} and {stream.label!r} share prompt_tokens "
                    f"{list(stream.prompt_tokens)}; make them distinct"
                )
            by_tokens[stream.prompt_tokens] = stream.label
        self.per_call_delay_s = float(per_call_delay_s)
        self._lock = threading.Lock()
        self._handles: dict[str, dict] = {}
        self._ids = itertools.count(1)

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "ScriptedBackend":
        with Path(path).open(encoding="utf-8") as fh:
            return cls(json.load(fh), **kwargs)

    @property
    def live_count(self) -> int:
        with self._lock:
            return len(self._handles)

    def model_info(self) -> VocabInfo:
        return self._info

    def _match_stream(self, text: str) -> ScriptedStream:
        for stream in self._streams:
            if stream.match_kind == "exact" and stream.match == text:
                return stream
        prefixes = [s for s in self._streams if s.match_kind == "prefix" and text.startswith(s.match)]
        if prefixes:
            return max(prefixes, key=lambda s: len(s.match))
        for stream in self._streams:
            if stream.match_kind == "any":
                return stream
        labels = [s.label for s in self._streams]
        raise BackendError(f"no scripted stream matches prompt {text!r}; declared: {labels}")

    def tokenize(self, text: str) -> list[int]:
        return list(self._match_stream(text).prompt_tokens)

    def detokenize(self, token_ids: Sequence[int]) -> str:
        parts = []
        for t in token_ids:
            if not 0 <= t < self._info.vocab_size:
                raise TokenOutOfRangeError(f"token id {t} out of range")
            parts.append(self._token_texts[t])
        return "".join(parts)

    def _sleep(self) -> None:
        if self.per_call_delay_s > 0:
            time.sleep(self.per_call_delay_s)

    def _step(self, stream: ScriptedStream, pos: int) -> np.ndarray:
        if pos >= len(stream.steps):
            raise FixtureExhaustedError(
                f"stream {stream.label!r} declares {len(stream.steps)} steps; step {pos + 1} requested"
            )
        return stream.steps[pos].copy()

    def open_stream(self, prompt_tokens: Sequence[int]) -> tuple[str, np.ndarray]:
        key = tuple(int(t) for t in prompt_tokens)
        if not key:
            raise BackendError("prompt must be non-empty")
        stream = next((s for s in self._streams if s.prompt_tokens == key), None)
        if stream is None:
            raise BackendError(f"no scripted stream declares prompt_tokens {list(key)}")
        self._sleep()
        with self._lock:
            handle = f"s{next(self._ids)}"
            self._handles[handle] = {"stream": stream, "pos": 0}
        return handle, self._step(stream, 0)

    def advance(self, handle: str, token_id: int) -> np.ndarray:
        if not 0 <= token_id < self._info.vocab_size:
            raise TokenOutOfRangeError(f"token id {token_id} out of range")
        self._sleep()
        with self._lock:
            state = self._handles.get(handle)
            if state is None:
                raise UnknownStreamError(f"unknown stream handle {handle!r}")
            state["pos"] += 1
            stream, pos = state["stream"], state["pos"]
        return self._step(stream, pos)

    def close_stream(self, handle: str) -> None:
        with self._lock:
            if self._handles.pop(handle, None) is None:
                log.warning("close of unknown scripted stream handle %r ignored", handle)
