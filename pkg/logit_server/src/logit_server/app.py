"""FastAPI application implementing the logit wire protocol.

Endpoints, bodies, and error codes follow the protocol the decoding
engine's remote backend speaks; logits are returned both as plain decimal
float32 values (full round-trip precision) and as a base64 little-endian
float32 blob, which must decode identically.
"""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import ServerError
from .model import ModelRunner
from .sessions import StreamTable


class TokenizeBody(BaseModel):
    text: str


class DetokenizeBody(BaseModel):
    token_ids: list[int]


class OpenStreamBody(BaseModel):
    prompt_token_ids: list[int]


class AdvanceBody(BaseModel):
    token_id: int


def _logit_fields(logits: np.ndarray) -> dict:
    arr = np.ascontiguousarray(logits, dtype="<f4")
    return {
        "logits": [float(v) for v in arr],
        "logits_b64": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def create_app(runner: ModelRunner, streams: StreamTable | None = None) -> FastAPI:
    app = FastAPI(title="logit-server", docs_url=None, redoc_url=None)
    table = streams if streams is not None else StreamTable()

    @app.exception_handler(ServerError)
    async def on_server_error(_request: Request, exc: ServerError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error_code": exc.code, "message": str(exc)},
        )

    @app.get("/v1/model")
    def model_info():
        return {
            "vocab_size": runner.vocab_size,
            "eos_token_id": runner.eos_token_id,
            "model_name": runner.name,
        }

    @app.post("/v1/tokenize")
    def tokenize(body: TokenizeBody):
        return {"token_ids": runner.tokenizer.encode(body.text)}

    @app.post("/v1/detokenize")
    def detokenize(body: DetokenizeBody):
        return {"text": runner.tokenizer.decode(body.token_ids)}

    @app.post("/v1/streams")
    def open_stream(body: OpenStreamBody):
        state, logits = runner.prefill(body.prompt_token_ids)
        entry = table.add(state)
        return {"stream_id": entry.stream_id, **_logit_fields(logits)}

    @app.post("/v1/streams/{stream_id}/advance")
    def advance(stream_id: str, body: AdvanceBody):
        runner.check_token(body.token_id)
        entry = table.get(stream_id)
        with entry.lock:
            logits = runner.step(entry.state, body.token_id)
        return _logit_fields(logits)

    @app.delete("/v1/streams/{stream_id}")
    def close_stream(stream_id: str):
        return {"closed": table.close(stream_id)}

    @app.get("/v1/streams")
    def live_count():
        return {"live_count": table.live_count}

    return app
