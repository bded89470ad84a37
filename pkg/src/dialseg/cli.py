"""Batch command-line interface.

Subcommands: segment (run a segmenter over a corpus), eval (score a
hypothesis file against gold boundaries), mine (export training pairs),
train (fit the projection head), baseline (random / greedy reference
runs). Exit codes: 0 success, 2 usage or input error, 3 data-dependent
training failure (no trainable pairs).

Every command is deterministic given identical flags, inputs, and seed;
aggregation is sorted by dialogue id and no command mutates its inputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import dataio, mining, rewrite, scoring, segmenters
from .core import DialsegError, RunConfig, Segmentation
from .metrics import default_window, pk, window_diff

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_PAIRS = 3


def _dialogue_rng(seed: int, dialogue_id: str) -> np.random.Generator:
    # Stable per-dialogue stream: independent of corpus order, derived
    # from the run seed and the dialogue id.
    digest = hashlib.sha256(f"{seed}\x00{dialogue_id}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _load_corpus(args) -> dataio.Corpus:
    if args.format == "plain":
        return dataio.load_plaintext(args.corpus)
    return dataio.load_structured(args.corpus)


def _apply_rewrites(corpus: dataio.Corpus, args) -> dataio.Corpus:
    if not getattr(args, "rewrites", None):
        return corpus
    rmap = dataio.load_rewrites(args.rewrites)
    rewrite.check_map_targets(rmap, corpus.by_id())
    strict = bool(getattr(args, "strict_rewrites", False))
    rewritten = tuple(rewrite.apply_map(d, rmap, strict=strict) for d in corpus.dialogues)
    return dataio.Corpus(rewritten, source_format=corpus.source_format)


def _threshold_arg(value: str) -> Optional[float]:
    if value == "auto":
        return None
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"threshold must be 'auto' or a number, got {value!r}"
        ) from None


def _run_config(args) -> RunConfig:
    return RunConfig(
        w=getattr(args, "w", 5),
        margin=getattr(args, "margin", 1.0),
        smoothing_width=getattr(args, "smooth", 1),
        threshold=getattr(args, "threshold", None),
        coherence_weight=getattr(args, "coherence_weight", 1.0),
        seed=getattr(args, "seed", 0),
    )


def cmd_segment(args) -> int:
    corpus = _apply_rewrites(_load_corpus(args), args)
    cfg = _run_config(args)
    needs_embeddings = args.algo in ("texttiling", "greedy")
    if needs_embeddings and not args.embeddings:
        raise DialsegError(f"--embeddings is required for --algo {args.algo}")
    provider: Optional[scoring.EmbeddingProvider] = None
    if args.embeddings:
        provider = scoring.CachedEmbeddingProvider(
            dataio.load_embedding_cache(args.embeddings)
        )
    coh: scoring.CoherenceProvider = scoring.ZeroCoherenceProvider()
    if args.coherence:
        coh = scoring.CachedCoherenceProvider(dataio.load_coherence_cache(args.coherence))

    hypotheses: dict[str, list[int]] = {}
    score_dump: dict[str, list[float]] = {}
    for d in sorted(corpus.dialogues, key=lambda d: d.id):
        if d.n < 2:
            hypotheses[d.id] = []
            continue
        if args.algo == "texttiling":
            matrix = provider.embed(d)
            series = scoring.relevance_series(
                matrix, coh.coherence(d), cfg.coherence_weight
            )
            seg = segmenters.texttiling(series, cfg)
            score_dump[d.id] = list(series.scores)
        elif args.algo == "greedy":
            # For greedy, the threshold flag is the cosine cutoff tau;
            # auto means the dialogue's mean adjacent cosine.
            matrix = provider.embed(d)
            tau = (
                args.threshold
                if args.threshold is not None
                else segmenters.mean_adjacent_cosine(matrix)
            )
            seg = segmenters.greedy_segment(matrix, tau)
        else:
            seg = segmenters.random_segment(d.n, _dialogue_rng(cfg.seed, d.id))
        hypotheses[d.id] = list(seg.boundaries)
    dataio.write_hypotheses(hypotheses, args.out)
    if args.dump_scores:
        lines = [
            json.dumps({"id": did, "scores": scores})
            for did, scores in sorted(score_dump.items())
        ]
        dataio.write_text(args.dump_scores, "\n".join(lines) + ("\n" if lines else ""))
    print(f"segmented {len(corpus)} dialogue(s) with {args.algo} -> {args.out}")
    return EXIT_OK


def _evaluate(
    corpus: dataio.Corpus, hypotheses: dict[str, list[int]], k: Optional[int]
) -> tuple[float, float, int]:
    pk_values: list[float] = []
    wd_values: list[float] = []
    for d in sorted(corpus.dialogues, key=lambda d: d.id):
        if d.gold is None:
            raise DialsegError(f"dialogue {d.id!r} has no gold boundaries")
        if d.id not in hypotheses:
            raise DialsegError(f"hypothesis file has no entry for dialogue {d.id!r}")
        hyp = Segmentation(d.n, hypotheses[d.id])
        window = k if k is not None else default_window(d.gold)
        pk_values.append(pk(d.gold, hyp, window).value)
        wd_values.append(window_diff(d.gold, hyp, window).value)
    extra = set(hypotheses) - {d.id for d in corpus.dialogues}
    if extra:
        raise DialsegError(f"hypothesis entries for unknown dialogues: {sorted(extra)}")
    return float(np.mean(pk_values)), float(np.mean(wd_values)), len(pk_values)


def cmd_eval(args) -> int:
    corpus = _load_corpus(args)
    hypotheses = dataio.load_hypotheses(args.hypothesis)
    mean_pk, mean_wd, count = _evaluate(corpus, hypotheses, args.k)
    result = dataio.EvalResult(
        method=args.method,
        corpus=args.name or Path(args.corpus).stem,
        pk=mean_pk,
        wd=mean_wd,
        dialogues=count,
    )
    dataio.write_report([result], args.out)
    print(Path(args.out).read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_mine(args) -> int:
    corpus = _apply_rewrites(_load_corpus(args), args)
    cfg = _run_config(args)
    provider = scoring.CachedEmbeddingProvider(
        dataio.load_embedding_cache(args.embeddings)
    )
    lines: list[str] = []
    n_pos = n_neg = 0
    for d in sorted(corpus.dialogues, key=lambda d: d.id):
        if d.n < 2:
            continue
        pseudo = mining.pseudo_segment(provider.embed(d), cfg)
        pairs = mining.mine_pairs(d.n, cfg.w, pseudo)
        for i, j in pairs.positives:
            lines.append(json.dumps({"id": d.id, "anchor": i, "other": j, "label": "+"}))
        for i, j in pairs.negatives:
            lines.append(json.dumps({"id": d.id, "anchor": i, "other": j, "label": "-"}))
        n_pos += len(pairs.positives)
        n_neg += len(pairs.negatives)
    dataio.write_text(args.out, "\n".join(lines) + ("\n" if lines else ""))
    print(f"mined {n_pos} positive and {n_neg} negative pairs -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = _apply_rewrites(_load_corpus(args), args)
    cfg = _run_config(args)
    provider = scoring.CachedEmbeddingProvider(
        dataio.load_embedding_cache(args.embeddings)
    )
    loss_log: list[str] = []

    def on_round(round_idx: int, loss: float) -> None:
        line = json.dumps({"round": round_idx, "mean_loss": loss})
        loss_log.append(line)
        print(line)

    head = mining.refine_loop(
        list(corpus.dialogues),
        provider,
        cfg,
        rounds=args.rounds,
        epochs_per_round=args.epochs,
        lr=args.lr,
        on_round=on_round,
    )
    if not loss_log:
        # Individual rounds may be skipped, but a run where every round
        # mined nothing is a data problem, not a usable head.
        raise mining.NoTrainablePairs("no round produced trainable pairs")
    dataio.write_head(head, args.out)
    if args.loss_out:
        dataio.write_text(args.loss_out, "\n".join(loss_log) + ("\n" if loss_log else ""))
    print(f"trained head (dim {head.dim}) -> {args.out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    corpus = _load_corpus(args)
    cfg = _run_config(args)
    if args.algo == "greedy" and not args.embeddings:
        raise DialsegError("--embeddings is required for --algo greedy")
    provider = None
    if args.embeddings:
        provider = scoring.CachedEmbeddingProvider(
            dataio.load_embedding_cache(args.embeddings)
        )
    hypotheses: dict[str, list[int]] = {}
    for d in sorted(corpus.dialogues, key=lambda d: d.id):
        if d.n < 2:
            hypotheses[d.id] = []
            continue
        if args.algo == "greedy":
            matrix = provider.embed(d)
            tau = (
                args.threshold
                if args.threshold is not None
                else segmenters.mean_adjacent_cosine(matrix)
            )
            seg = segmenters.greedy_segment(matrix, tau)
        else:
            seg = segmenters.random_segment(d.n, _dialogue_rng(cfg.seed, d.id))
        hypotheses[d.id] = list(seg.boundaries)
    dataio.write_hypotheses(hypotheses, args.out)
    if args.report:
        mean_pk, mean_wd, count = _evaluate(corpus, hypotheses, args.k)
        result = dataio.EvalResult(
            method=args.algo,
            corpus=args.name or Path(args.corpus).stem,
            pk=mean_pk,
            wd=mean_wd,
            dialogues=count,
        )
        dataio.write_report([result], args.report)
    print(f"baseline {args.algo} over {len(corpus)} dialogue(s) -> {args.out}")
    return EXIT_OK


def _add_corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True, help="corpus file")
    p.add_argument(
        "--format",
        choices=("plain", "structured"),
        default="plain",
        help="corpus file format (default: plain)",
    )


def _add_rewrite_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rewrites", help="rewrite file to apply before scoring")
    p.add_argument(
        "--strict-rewrites",
        action="store_true",
        help="require a rewrite entry for every utterance",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialseg",
        description="Unsupervised dialogue topic segmentation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a corpus")
    _add_corpus_flags(p)
    _add_rewrite_flags(p)
    p.add_argument("--embeddings", help="DTSE embedding cache")
    p.add_argument("--coherence", help="DTSC coherence cache")
    p.add_argument(
        "--algo",
        choices=("texttiling", "greedy", "random"),
        default="texttiling",
    )
    p.add_argument("--w", type=int, default=5, help="neighbor half-window (default 5)")
    p.add_argument("--smooth", type=int, default=1, help="odd smoothing width (default 1 = off)")
    p.add_argument(
        "--threshold",
        type=_threshold_arg,
        default=None,
        help="'auto' or a fixed cutoff: depth for texttiling, cosine tau for greedy",
    )
    p.add_argument(
        "--lambda",
        dest="coherence_weight",
        type=float,
        default=1.0,
        help="coherence weight (0 = pure similarity)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="hypothesis output file")
    p.add_argument("--dump-scores", help="also write the raw relevance series")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="score a hypothesis file against gold boundaries")
    _add_corpus_flags(p)
    p.add_argument("--hypothesis", required=True, help="hypothesis file from 'segment'")
    p.add_argument("--k", type=int, default=None, help="window size (default: from reference)")
    p.add_argument("--method", default="hypothesis", help="method label for the report")
    p.add_argument("--name", default=None, help="corpus label for the report")
    p.add_argument("--out", required=True, help="report output file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mine", help="export training pairs")
    _add_corpus_flags(p)
    _add_rewrite_flags(p)
    p.add_argument("--embeddings", required=True, help="DTSE embedding cache")
    p.add_argument("--w", type=int, default=5)
    p.add_argument("--smooth", type=int, default=1)
    p.add_argument("--threshold", type=_threshold_arg, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="pair stream output file")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("train", help="train the projection head")
    _add_corpus_flags(p)
    _add_rewrite_flags(p)
    p.add_argument("--embeddings", required=True, help="DTSE embedding cache")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--epochs", type=int, default=1, help="training passes per round")
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--w", type=int, default=5)
    p.add_argument("--smooth", type=int, default=1)
    p.add_argument("--threshold", type=_threshold_arg, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="head output file (DTSH)")
    p.add_argument("--loss-out", help="also write the per-round loss records")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="run the random or greedy baseline")
    _add_corpus_flags(p)
    p.add_argument("--embeddings", help="DTSE embedding cache (greedy only)")
    p.add_argument("--algo", choices=("random", "greedy"), default="random")
    p.add_argument(
        "--threshold",
        type=_threshold_arg,
        default=None,
        help="greedy cosine tau ('auto' = mean adjacent cosine)",
    )
    p.add_argument("--k", type=int, default=None, help="window size for --report")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None, help="corpus label for the report")
    p.add_argument("--out", required=True, help="hypothesis output file")
    p.add_argument("--report", help="also evaluate against gold and write a report here")
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except mining.NoTrainablePairs as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_PAIRS
    except DialsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
