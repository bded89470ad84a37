"""Command-line entry points for the three exports.

Each subcommand reads a corpus, runs one pretrained model over it, and
writes a cache the segmentation toolkit consumes directly. Defaults
point at the published checkpoints; any local directory or hub id
loadable by the transformers Auto classes works.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .coherence import NextSentenceScorer, export_coherence
from .corpora import read_corpus, read_rewrite_file
from .embeddings import SentenceEncoder, export_embeddings
from .rewrites import Rewriter, export_rewrites

DEFAULT_ENCODER = "princeton-nlp/sup-simcse-bert-base-uncased"
DEFAULT_NSP = "bert-base-uncased"
DEFAULT_REWRITER = "t5-base"


def cmd_embeddings(args) -> int:
    records = read_corpus(args.corpus, args.format)
    rewrites = read_rewrite_file(args.rewrites) if args.rewrites else None
    encoder = SentenceEncoder(args.model, device=args.device, pooling=args.pooling)
    export_embeddings(records, encoder, args.out, rewrites=rewrites)
    print(
        f"embedded {len(records)} dialogue(s) at d={encoder.hidden_size} -> {args.out}"
    )
    return 0


def cmd_coherence(args) -> int:
    records = read_corpus(args.corpus, args.format)
    rewrites = read_rewrite_file(args.rewrites) if args.rewrites else None
    scorer = NextSentenceScorer(args.model, device=args.device)
    export_coherence(records, scorer, args.out, rewrites=rewrites)
    print(f"scored {len(records)} dialogue(s) -> {args.out}")
    return 0


def cmd_rewrites(args) -> int:
    records = read_corpus(args.corpus, args.format)
    rewriter = Rewriter(
        args.model,
        device=args.device,
        num_beams=args.beams,
        max_new_tokens=args.max_new_tokens,
        max_context_turns=args.max_context,
        speaker_markers=(args.speaker_a, args.speaker_b),
    )
    export_rewrites(records, rewriter, args.out)
    print(f"rewrote {len(records)} dialogue(s) -> {args.out}")
    return 0


def _common_flags(p: argparse.ArgumentParser, default_model: str) -> None:
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("plain", "structured"), default="plain")
    p.add_argument("--model", default=default_model, help="checkpoint id or local path")
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialseg-export",
        description="Emit embedding, coherence, and rewrite caches for the segmentation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embeddings", help="export a DTSE embedding cache")
    _common_flags(p, DEFAULT_ENCODER)
    p.add_argument("--rewrites", help="rewrite file to resolve utterance text")
    p.add_argument("--pooling", choices=("auto", "cls", "mean"), default="auto")
    p.set_defaults(func=cmd_embeddings)

    p = sub.add_parser("coherence", help="export a DTSC coherence cache")
    _common_flags(p, DEFAULT_NSP)
    p.add_argument("--rewrites", help="rewrite file to resolve utterance text")
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("rewrites", help="export a rewrite file")
    _common_flags(p, DEFAULT_REWRITER)
    p.add_argument("--beams", type=int, default=5)
    p.add_argument("--max-new-tokens", type=int, default=64)
    p.add_argument("--max-context", type=int, default=8)
    p.add_argument("--speaker-a", default="A:")
    p.add_argument("--speaker-b", default="B:")
    p.set_defaults(func=cmd_rewrites)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
