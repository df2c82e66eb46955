"""HTTP sidecar serving a causal language model's full-vocabulary logits."""

from .app import create_app
from .model import CharTokenizer, ModelRunner, build_tiny_model
from .sessions import StreamTable

__all__ = ["CharTokenizer", "ModelRunner", "StreamTable", "build_tiny_model", "create_app"]
__version__ = "0.1.0"
