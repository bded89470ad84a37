"""Sentence-embedding export: one pooled vector per utterance.

The encoder is any transformer checkpoint usable with AutoModel; the
default pooling takes the model's pooler output when it has one (the
contrastive sentence encoders expose their trained pooler there) and
falls back to the final-layer CLS vector otherwise.

Every unique text gets its own forward pass: batched inference changes
low-order float bits with the batch composition (padded GEMM shapes),
and the cache must come out identical no matter how a corpus is ordered
or chunked. Unique texts are deduplicated first, which recovers most of
the batching win on dialogue data, and cache entries are written in
sorted id order so re-exports are byte-identical.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .corpora import DialogueRecord, resolve_texts
from .formats import write_embedding_cache


class SentenceEncoder:
    def __init__(self, model_id: str, device: str = "cpu", pooling: str = "auto"):
        if pooling not in ("auto", "cls", "mean"):
            raise ValueError(f"unknown pooling {pooling!r}")
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModel.from_pretrained(model_id).to(device).eval()
        self.device = device
        self.pooling = pooling

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    def _pool(self, output, attention_mask: torch.Tensor) -> torch.Tensor:
        if self.pooling == "auto" and getattr(output, "pooler_output", None) is not None:
            return output.pooler_output
        hidden = output.last_hidden_state
        if self.pooling == "mean":
            mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
            return (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
        return hidden[:, 0]

    def encode_one(self, text: str) -> np.ndarray:
        encoded = self.tokenizer(text, return_tensors="pt", truncation=True).to(
            self.device
        )
        with torch.no_grad():
            pooled = self._pool(self.model(**encoded), encoded["attention_mask"])
        return pooled[0].cpu().to(torch.float32).numpy()

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        """Float32 matrix with one row per input text."""
        vectors = {text: self.encode_one(text) for text in sorted(set(texts))}
        return np.stack([vectors[t] for t in texts]).astype(np.float32)


def export_embeddings(
    records: Sequence[DialogueRecord],
    encoder: SentenceEncoder,
    out_path,
    rewrites: dict[tuple[str, int], str] | None = None,
) -> None:
    """Embed every dialogue (rewritten-if-present text) into a DTSE cache."""
    entries: dict[str, np.ndarray] = {}
    for record in sorted(records, key=lambda r: r.id):
        texts = resolve_texts(record, rewrites)
        entries[record.id] = encoder.encode(texts)
    write_embedding_cache(entries, out_path)
