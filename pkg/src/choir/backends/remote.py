"""HTTP client for the logit-serving wire protocol.

Endpoints (JSON bodies)::

    GET    /v1/model                  -> {vocab_size, eos_token_id, model_name}
    POST   /v1/tokenize {text}        -> {token_ids}
    POST   /v1/detokenize {token_ids} -> {text}
    POST   /v1/streams {prompt_token_ids} -> {stream_id, logits[, logits_b64]}
    POST   /v1/streams/{id}/advance {token_id} -> {logits[, logits_b64]}
    DELETE /v1/streams/{id}           -> {closed}
    GET    /v1/streams                -> {live_count}

Errors arrive as {error_code, message}; logits may be plain decimal with
full 32-bit round-trip precision and/or a base64 little-endian float32
blob.  When both are present the binary form is used.
"""

from __future__ import annotations

import base64
import logging
import threading
from typing import Sequence

import numpy as np
import requests

from ..errors import BackendError, CapacityError, TokenOutOfRangeError, UnknownStreamError
from .base import LOGIT_DTYPE, Backend, VocabInfo, as_logits

log = logging.getLogger(__name__)

_ERROR_TYPES = {
    "UNKNOWN_STREAM": UnknownStreamError,
    "TOKEN_OUT_OF_RANGE": TokenOutOfRangeError,
    "CAPACITY": CapacityError,
    "INTERNAL": BackendError,
}


def decode_logits(payload: dict, vocab_size: int) -> np.ndarray:
    """Decode a response's logits, preferring the binary field when present."""
    blob = payload.get("logits_b64")
    if blob is not None:
        arr = np.frombuffer(base64.b64decode(blob), dtype="<f4").astype(LOGIT_DTYPE)
        return as_logits(arr, vocab_size)
    values = payload.get("logits")
    if values is None:
        raise BackendError("response carries neither 'logits' nor 'logits_b64'")
    return as_logits(values, vocab_size)


class RemoteBackend(Backend):
    """Sessions are per-thread: the engine may fan out per-step queries for
    distinct streams concurrently."""

    def __init__(self, base_url: str, *, timeout_s: float = 60.0):
        if not base_url:
            raise BackendError("remote backend needs a base URL")
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self._local = threading.local()
        self._info: VocabInfo | None = None

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        url = f"{self.base_url}{path}"
        try:
            resp = self._session().request(method, url, json=body, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise BackendError(f"request to {url} failed: {exc}") from exc
        if resp.status_code != 200:
            try:
                payload = resp.json()
                code = payload.get("error_code", "INTERNAL")
                message = payload.get("message", resp.text)
            except ValueError:
                code, message = "INTERNAL", resp.text
            exc_type = _ERROR_TYPES.get(code, BackendError)
            raise exc_type(f"{code}: {message}")
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendError(f"non-JSON response from {url}") from exc

    def model_info(self) -> VocabInfo:
        if self._info is None:
            payload = self._request("GET", "/v1/model")
            self._info = VocabInfo(
                vocab_size=int(payload["vocab_size"]),
                eos_token_id=int(payload["eos_token_id"]),
                model_name=str(payload.get("model_name", "")),
            )
        return self._info

    def tokenize(self, text: str) -> list[int]:
        payload = self._request("POST", "/v1/tokenize", {"text": text})
        return [int(t) for t in payload["token_ids"]]

    def detokenize(self, token_ids: Sequence[int]) -> str:
        payload = self._request("POST", "/v1/detokenize", {"token_ids": [int(t) for t in token_ids]})
        return str(payload["text"])

    def open_stream(self, prompt_tokens: Sequence[int]) -> tuple[str, np.ndarray]:
        info = self.model_info()
        payload = self._request(
            "POST", "/v1/streams", {"prompt_token_ids": [int(t) for t in prompt_tokens]}
        )
        return str(payload["stream_id"]), decode_logits(payload, info.vocab_size)

    def advance(self, handle: str, token_id: int) -> np.ndarray:
        info = self.model_info()
        payload = self._request("POST", f"/v1/streams/{handle}/advance", {"token_id": int(token_id)})
        return decode_logits(payload, info.vocab_size)

    def close_stream(self, handle: str) -> None:
        payload = self._request("DELETE", f"/v1/streams/{handle}")
        if not payload.get("closed", False):
            log.warning("close of stream %r reported no-op by server", handle)

    def live_count(self) -> int:
        payload = self._request("GET", "/v1/streams")
        return int(payload["live_count"])
