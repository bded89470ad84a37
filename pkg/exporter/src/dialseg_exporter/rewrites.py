"""Seq2seq utterance rewriting export.

Each utterance is rewritten from a prompt that concatenates its
dialogue context and the utterance itself, every turn prefixed with an
alternating speaker marker. Generation uses beam search (5 beams by
default); a generation that comes back empty falls back to the original
text so the emitted file is always applicable.
"""

from __future__ import annotations

from typing import Iterator, Sequence

import torch
from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

from .corpora import DialogueRecord
from .formats import write_rewrite_file

DEFAULT_SPEAKER_MARKERS = ("A:", "B:")


class Rewriter:
    def __init__(
        self,
        model_id: str,
        device: str = "cpu",
        num_beams: int = 5,
        max_new_tokens: int = 64,
        max_context_turns: int = 8,
        speaker_markers: tuple[str, str] = DEFAULT_SPEAKER_MARKERS,
    ):
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        # Keep the current utterance when the prompt overflows: drop
        # context from the left instead of the tail.
        self.tokenizer.truncation_side = "left"
        self.model = AutoModelForSeq2SeqLM.from_pretrained(model_id).to(device).eval()
        self.device = device
        self.num_beams = num_beams
        self.max_new_tokens = max_new_tokens
        self.max_context_turns = max_context_turns
        self.speaker_markers = speaker_markers

    def build_prompt(self, context: Sequence[str], current: str) -> str:
        turns = list(context[-self.max_context_turns :]) + [current]
        offset = len(context[: -self.max_context_turns]) if self.max_context_turns else 0
        marked = [
            f"{self.speaker_markers[(offset + pos) % 2]} {text}"
            for pos, text in enumerate(turns)
        ]
        return " ".join(marked)

    def rewrite(self, context: Sequence[str], current: str) -> str:
        prompt = self.build_prompt(context, current)
        encoded = self.tokenizer(
            prompt, return_tensors="pt", truncation=True, max_length=512
        ).to(self.device)
        with torch.no_grad():
            generated = self.model.generate(
                **encoded,
                num_beams=self.num_beams,
                max_new_tokens=self.max_new_tokens,
                do_sample=False,
            )
        text = self.tokenizer.batch_decode(generated, skip_special_tokens=True)[0].strip()
        return text if text else current


def rewrite_records(
    records: Sequence[DialogueRecord], rewriter: Rewriter
) -> Iterator[tuple[str, int, str]]:
    for record in records:
        for index, current in enumerate(record.texts, start=1):
            context = record.texts[: index - 1]
            yield record.id, index, rewriter.rewrite(context, current)


def export_rewrites(
    records: Sequence[DialogueRecord], rewriter: Rewriter, out_path
) -> None:
    """Rewrite every utterance of every dialogue into a rewrite file."""
    write_rewrite_file(rewrite_records(records, rewriter), out_path)
