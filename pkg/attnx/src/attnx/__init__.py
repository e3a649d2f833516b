"""Attention extraction for locally hosted causal language models."""

from .extract import ExtractionError, PromptMeta, extract_attention, load_schema

__version__ = "0.1.0"

__all__ = ["ExtractionError", "PromptMeta", "extract_attention", "load_schema",
           "__version__"]
