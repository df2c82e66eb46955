"""Collaborative decoding: consensus-confidence weighting over parallel streams.

One decode drives n+1 backend streams through a shared output sequence:
stream 0 conditions on the bare question (the model's pretrained prior)
and streams 1..n condition on persona-specific instructions.  At every
step each stream reports full-vocabulary logits; persona streams receive
weights that shrink with their divergence from the group's mean confidence;
the weighted sum of all logit vectors picks one token, and every stream
advances with that same token until the fused choice is end-of-sequence
or the length budget runs out.

Per-step arithmetic, for persona streams i = 1..n:

    p_i   = softmax(z_i)                 (temperature 1, always)
    s_i   = max(p_i)
    sbar  = mean(s_1 .. s_n)
    d_i   = |s_i - sbar|
    a_0   = lambda0            (defaults to n - 1)
    a_i   = lambda_i - d_i     (lambda_i defaults to 1)
    fused = sum_i a_i * z_i    (float64 accumulation over float32 inputs)

Selection is argmax of ``fused`` at temperature 0 (ties break to the
lowest index) and a seeded sample from softmax(fused / T) otherwise.
Confidences always come from the temperature-1 softmax; the selection
temperature never feeds back into the weights.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .backends.base import Backend, VocabInfo
from .errors import BackendError, DecodeError

DEFAULT_COT_TRIGGER = "Let's think step by step"

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class DecodeConfig:
    """Knobs for one decode.

    ``lambda0`` is the weight of the no-persona stream; ``None`` resolves to
    n - 1 at decode time.  ``lambda_persona`` is a scalar applied to every
    persona stream or a per-stream sequence.  ``temperature`` 0 means greedy
    argmax selection; anything above 0 samples with the seeded generator.
    """

    lambda0: float | None = None
    lambda_persona: float | tuple[float, ...] = 1.0
    max_len: int = 512
    temperature: float = 0.0
    seed: int = 0
    cot_trigger: str = DEFAULT_COT_TRIGGER

    def __post_init__(self):
        if self.lambda0 is not None and self.lambda0 < 0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")
        if isinstance(self.lambda_persona, (list, tuple)):
            object.__setattr__(self, "lambda_persona", tuple(float(v) for v in self.lambda_persona))
            if any(v <= 0 for v in self.lambda_persona):
                raise ValueError("lambda_persona entries must be > 0")
        elif self.lambda_persona <= 0:
            raise ValueError(f"lambda_persona must be > 0, got {self.lambda_persona}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class StepTrace:
    """Everything the fusion rule saw and decided at one step."""

    step: int
    confidences: tuple[float, ...]
    consensus: float
    divergences: tuple[float, ...]
    weights: tuple[float, ...]
    chosen_token: int
    fused_max_prob: float


@dataclass(frozen=True)
class DecodeResult:
    tokens: tuple[int, ...]
    text: str
    traces: tuple[StepTrace, ...]
    stop_reason: str  # "eos" | "max_len"
    stream_count: int

    @property
    def logit_queries(self) -> int:
        """Backend logit queries issued by this decode: streams x steps."""
        return self.stream_count * len(self.tokens)


def trace_to_dict(trace: StepTrace) -> dict:
    return {
        "step": trace.step,
        "confidences": list(trace.confidences),
        "consensus": trace.consensus,
        "divergences": list(trace.divergences),
        "weights": list(trace.weights),
        "chosen_token": trace.chosen_token,
        "fused_max_prob": trace.fused_max_prob,
    }


def build_prompt(question: str, trigger: str = DEFAULT_COT_TRIGGER, persona_instruction: str | None = None) -> str:
    """Compose a decode prompt: optional persona instruction, question, trigger."""
    parts = []
    if persona_instruction:
        parts.append(persona_instruction)
    parts.append(question)
    if trigger:
        parts.append(trigger)
    return "\n".join(parts)


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Stable softmax over a single logit vector, returned as float64.

    Max-subtraction keeps large magnitudes finite; temperature must be
    positive here (temperature 0 selects argmax and bypasses this op).
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ValueError(f"softmax expects a non-empty vector, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input contains non-finite entries")
    if temperature <= 0:
        raise ValueError("softmax temperature must be > 0; use argmax for temperature 0")
    z = z / temperature
    exp = np.exp(z - z.max())
    return exp / exp.sum()


def confidence(probs) -> float:
    """The maximum token probability of one distribution."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("confidence expects a non-empty probability vector")
    return float(p.max())


def consensus(confidences: Sequence[float]) -> float:
    """Arithmetic mean of per-stream confidences."""
    if len(confidences) == 0:
        raise ValueError("consensus of an empty confidence list is undefined")
    for c in confidences:
        if not 0.0 < c <= 1.0:
            raise ValueError(f"confidence {c} outside (0, 1]")
    return float(sum(confidences) / len(confidences))


def _resolved_lambdas(config: DecodeConfig, n: int) -> tuple[float, tuple[float, ...]]:
    lam0 = float(n - 1) if config.lambda0 is None else float(config.lambda0)
    if isinstance(config.lambda_persona, tuple):
        if len(config.lambda_persona) != n:
            raise ValueError(
                f"lambda_persona has {len(config.lambda_persona)} entries for {n} persona streams"
            )
        lams = config.lambda_persona
    else:
        lams = (float(config.lambda_persona),) * n
    return lam0, lams


def weights(confidences: Sequence[float], consensus_value: float, config: DecodeConfig) -> list[float]:
    """Stream weights [a_0 .. a_n]: a_0 is the knowledge weight, persona
    weights are their lambda minus the divergence from the consensus."""
    n = len(confidences)
    if n < 1:
        raise ValueError("weights need at least one persona confidence")
    lam0, lams = _resolved_lambdas(config, n)
    return [lam0] + [lams[i] - abs(c - consensus_value) for i, c in enumerate(confidences)]


def fuse_logits(logit_vectors: Sequence, stream_weights: Sequence[float]) -> np.ndarray:
    """Weighted elementwise sum of the per-stream logit vectors (float64)."""
    if len(logit_vectors) != len(stream_weights):
        raise ValueError(
            f"{len(logit_vectors)} logit vectors but {len(stream_weights)} weights"
        )
    matrix = np.stack([np.asarray(v, dtype=np.float64) for v in logit_vectors])
    if matrix.ndim != 2:
        raise ValueError("logit vectors must be one-dimensional and equally sized")
    w = np.asarray(stream_weights, dtype=np.float64)
    return w @ matrix


def select_token(fused, temperature: float, rng: np.random.Generator | None = None) -> int:
    """Pick the next token from fused logits.

    Temperature 0 is argmax with lowest-index tie-break; above 0, a sample
    from softmax(fused / temperature) drawn with the supplied generator.
    """
    z = np.asarray(fused, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("fused logits contain non-finite entries")
    if temperature == 0:
        return int(np.argmax(z))
    if rng is None:
        raise ValueError("sampled selection needs a seeded generator")
    probs = softmax(z, temperature)
    return int(rng.choice(probs.size, p=probs))


def _checked(vector: np.ndarray, info: VocabInfo) -> np.ndarray:
    if vector.shape != (info.vocab_size,):
        raise BackendError(
            f"stream returned {vector.shape[0]} logits but the model declares "
            f"vocab_size {info.vocab_size}; aborting"
        )
    if not np.all(np.isfinite(vector)):
        raise BackendError("stream returned non-finite logits")
    return vector


def _close_all(backend: Backend, handles: Sequence[str]) -> None:
    for handle in handles:
        try:
            backend.close_stream(handle)
        except BackendError:
            pass


def _decode(
    backend: Backend,
    prompts: Sequence[str],
    config: DecodeConfig,
    persona_count: int,
    max_parallel_streams: int,
) -> DecodeResult:
    """Shared decode loop; ``prompts[0]`` is the no-persona stream when
    ``persona_count`` >= 1, otherwise the single stream being decoded."""
    info = backend.model_info()
    rng = np.random.default_rng(config.seed & _SEED_MASK)
    fused_only = persona_count == 0
    pool = ThreadPoolExecutor(max_parallel_streams) if max_parallel_streams > 1 else None

    def query_all(fn, args_list):
        if pool is None:
            return [fn(*args) for args in args_list]
        return list(pool.map(lambda args: fn(*args), args_list))

    handles: list[str] = []
    tokens: list[int] = []
    traces: list[StepTrace] = []
    stop_reason = "max_len"
    try:
        opened = query_all(
            lambda p: backend.open_stream(backend.tokenize(p)), [(p,) for p in prompts]
        )
        handles = [h for h, _ in opened]
        logits = [_checked(z, info) for _, z in opened]
        for step in range(1, config.max_len + 1):
            if fused_only:
                probs = softmax(logits[0])
                confs = [confidence(probs)]
                sbar = confs[0]
                divergences = [0.0]
                alpha = [1.0]
                fused = np.asarray(logits[0], dtype=np.float64)
                fused_probs = probs
            else:
                confs = [confidence(softmax(z)) for z in logits[1:]]
                sbar = consensus(confs)
                divergences = [abs(c - sbar) for c in confs]
                alpha = weights(confs, sbar, config)
                fused = fuse_logits(logits, alpha)
                fused_probs = softmax(fused)
            token = select_token(fused, config.temperature, rng)
            tokens.append(token)
            traces.append(
                StepTrace(
                    step=step,
                    confidences=tuple(confs),
                    consensus=sbar,
                    divergences=tuple(divergences),
                    weights=tuple(alpha),
                    chosen_token=token,
                    fused_max_prob=confidence(fused_probs),
                )
            )
            if token == info.eos_token_id:
                stop_reason = "eos"
                break
            if step == config.max_len:
                break
            advanced = query_all(backend.advance, [(h, token) for h in handles])
            logits = [_checked(z, info) for z in advanced]
    except BackendError as exc:
        raise DecodeError(f"backend failed mid-decode: {exc}", traces=tuple(traces)) from exc
    finally:
        _close_all(backend, handles)
        if pool is not None:
            pool.shutdown(wait=False)

    text_tokens = tokens[:-1] if stop_reason == "eos" else tokens
    return DecodeResult(
        tokens=tuple(tokens),
        text=backend.detokenize(text_tokens),
        traces=tuple(traces),
        stop_reason=stop_reason,
        stream_count=len(prompts),
    )


def choir_decode(
    backend: Backend,
    question: str,
    persona_prompts: Sequence[str],
    config: DecodeConfig,
    *,
    max_parallel_streams: int = 1,
) -> DecodeResult:
    """Decode one shared sequence through n persona streams plus the
    no-persona stream, fusing logits per step as described above.

    ``persona_prompts`` are the already-rendered persona instructions
    r_1..r_n; the question and chain-of-thought trigger are appended here.
    A backend failure mid-decode raises :class:`DecodeError` carrying the
    completed step traces; all streams are closed either way.
    """
    if not persona_prompts:
        raise ValueError("choir_decode needs at least one persona prompt")
    prompts = [build_prompt(question, config.cot_trigger)] + [
        build_prompt(question, config.cot_trigger, persona_instruction=r) for r in persona_prompts
    ]
    return _decode(backend, prompts, config, len(persona_prompts), max_parallel_streams)


def single_decode(backend: Backend, prompt: str, config: DecodeConfig) -> DecodeResult:
    """Greedy or sampled decode of one stream with the shared stopping rules.

    The prompt is used verbatim; compose it with :func:`build_prompt` when
    the question/trigger layout should match the collaborative path.
    """
    return _decode(backend, [prompt], config, 0, 1)


def stochastic_config(config: DecodeConfig, seed: int, temperature: float) -> DecodeConfig:
    """Derive a sampling config for one path of a multi-path ensemble."""
    return replace(config, seed=seed & _SEED_MASK, temperature=temperature)
