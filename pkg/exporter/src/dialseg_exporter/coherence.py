"""Next-sentence coherence export.

For gap i the score is the next-sentence probability that utterance
i+1 follows the concatenation of utterances i-1 and i (just utterance 1
at the left edge). Scores come from a BERT-style checkpoint with its
pretrained next-sentence head, so every value lands in [0, 1].
"""

from __future__ import annotations

from typing import Sequence

import torch
from transformers import AutoTokenizer, BertForNextSentencePrediction

from .corpora import DialogueRecord, resolve_texts
from .formats import write_coherence_cache


class NextSentenceScorer:
    def __init__(self, model_id: str, device: str = "cpu"):
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = BertForNextSentencePrediction.from_pretrained(model_id)
        self.model = self.model.to(device).eval()
        self.device = device

    def score(self, context: str, response: str) -> float:
        """Probability that response is the continuation of context."""
        encoded = self.tokenizer(
            context, response, return_tensors="pt", truncation=True
        ).to(self.device)
        with torch.no_grad():
            logits = self.model(**encoded).logits
        # Label 0 of the next-sentence head means "is the continuation".
        return float(torch.softmax(logits, dim=-1)[0, 0])

    def gap_scores(self, texts: Sequence[str]) -> list[float]:
        """One score per gap: n-1 values for n utterances."""
        scores = []
        for gap in range(1, len(texts)):
            context = " ".join(texts[max(0, gap - 2) : gap])
            scores.append(self.score(context, texts[gap]))
        return scores


def export_coherence(
    records: Sequence[DialogueRecord],
    scorer: NextSentenceScorer,
    out_path,
    rewrites: dict[tuple[str, int], str] | None = None,
) -> None:
    """Score every gap of every dialogue into a DTSC cache."""
    entries = {
        record.id: scorer.gap_scores(resolve_texts(record, rewrites))
        for record in sorted(records, key=lambda r: r.id)
    }
    write_coherence_cache(entries, out_path)
