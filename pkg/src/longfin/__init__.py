"""Long-context, layout-aware entity extraction for financial filings.

A dual-stream (text + layout) transformer encoder with sliding-window plus
interval-global sparse attention, trained by masked visual-language
modelling and fine-tuned for BIO entity tagging, on a small numpy autodiff.
"""

from .attention import AttentionPattern, build_pattern, sparse_attention
from .document import Document, EntitySpan, Word
from .metrics import EvalReport, entity_f1
from .model import ModelConfig, forward, init_params

__version__ = "0.1.0"

__all__ = [
    "AttentionPattern",
    "Document",
    "EntitySpan",
    "EvalReport",
    "ModelConfig",
    "Word",
    "build_pattern",
    "entity_f1",
    "forward",
    "init_params",
    "sparse_attention",
]
