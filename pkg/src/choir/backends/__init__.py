"""Logit-provider backends: scripted replay, bigram toy model, remote client."""

from .base import LOGIT_DTYPE, Backend, InstrumentedBackend, VocabInfo, as_logits
from .bigram import BigramBackend
from .remote import RemoteBackend, decode_logits
from .scripted import ScriptedBackend

__all__ = [
    "LOGIT_DTYPE",
    "Backend",
    "BigramBackend",
    "InstrumentedBackend",
    "RemoteBackend",
    "ScriptedBackend",
    "VocabInfo",
    "as_logits",
    "decode_logits",
]
