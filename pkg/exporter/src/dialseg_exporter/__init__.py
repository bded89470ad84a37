"""Batch export scripts: pretrained models in, dialseg cache files out."""

from .coherence import NextSentenceScorer, export_coherence
from .corpora import DialogueRecord, read_corpus, read_rewrite_file, resolve_texts
from .embeddings import SentenceEncoder, export_embeddings
from .formats import write_coherence_cache, write_embedding_cache, write_rewrite_file
from .rewrites import Rewriter, export_rewrites

__version__ = "0.1.0"

__all__ = [
    "DialogueRecord",
    "NextSentenceScorer",
    "Rewriter",
    "SentenceEncoder",
    "export_coherence",
    "export_embeddings",
    "export_rewrites",
    "read_corpus",
    "read_rewrite_file",
    "resolve_texts",
    "write_coherence_cache",
    "write_embedding_cache",
    "write_rewrite_file",
]
