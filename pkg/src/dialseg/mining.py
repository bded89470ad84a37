"""Training-pair mining from unlabeled dialogues, and the head trainer.

An anchor utterance's topical positives are the utterances that are
both near it (within a half-window w) and inside the same
pseudo-segment; its negatives are the utterances that are both far from
it and in a different pseudo-segment. Pseudo-segments come from running
the depth-score segmenter over pure topic similarity of the current
representations, so mining and segmentation refine each other across
rounds.

Fine-tuning a full sentence encoder is deliberately out of scope here:
the trainable component is a d x d projection head over frozen base
embeddings, initialized to the identity, trained with a margin ranking
loss on cosine similarities. That keeps the mining procedure, the loss,
and the refine loop intact while staying CPU-friendly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    AnchorOutOfRange,
    DialsegError,
    DimensionMismatch,
    Dialogue,
    EmbeddingMatrix,
    RunConfig,
    Segmentation,
)
from .scoring import CoherenceSeries, EmbeddingProvider, relevance_series
from .segmenters import texttiling

logger = logging.getLogger(__name__)


class NoTrainablePairs(DialsegError):
    """No (anchor, positive, negative) triple could be formed."""


@dataclass(frozen=True)
class IndexSets:
    """Neighbor / pseudo-segment index sets for one anchor utterance.

    Each pair of sets partitions [1, n] minus the anchor itself.
    """

    neighbors: frozenset[int]
    non_neighbors: frozenset[int]
    same_segment: frozenset[int]
    other_segments: frozenset[int]


@dataclass(frozen=True)
class PairSet:
    """Mined (anchor, other) index pairs, positives and negatives."""

    positives: tuple[tuple[int, int], ...]
    negatives: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        overlap = set(self.positives) & set(self.negatives)
        if overlap:
            raise DialsegError(f"pairs appear in both lists: {sorted(overlap)}")
        for i, j in self.positives + self.negatives:
            if i == j:
                raise DialsegError(f"self-pair ({i}, {j})")


def neighbor_sets(n: int, w: int, i: int) -> tuple[frozenset[int], frozenset[int]]:
    """Indices within distance w of anchor i, and their complement.

    Both sets exclude the anchor itself and together cover [1, n] \\ {i}.
    """
    if not 1 <= i <= n:
        raise AnchorOutOfRange(f"anchor {i} outside [1, {n}]")
    if w < 1:
        raise DialsegError(f"w must be >= 1, got {w}")
    near = frozenset(j for j in range(1, n + 1) if j != i and abs(i - j) <= w)
    far = frozenset(j for j in range(1, n + 1) if abs(i - j) > w)
    return near, far


def segment_sets(
    pseudo: Segmentation, i: int
) -> tuple[frozenset[int], frozenset[int]]:
    """Indices sharing anchor i's pseudo-segment, and all other indices."""
    if not 1 <= i <= pseudo.n:
        raise AnchorOutOfRange(f"anchor {i} outside [1, {pseudo.n}]")
    seg = pseudo.segment_of(i)
    same = frozenset(
        j for j in range(1, pseudo.n + 1) if j != i and pseudo.segment_of(j) == seg
    )
    other = frozenset(
        j for j in range(1, pseudo.n + 1) if pseudo.segment_of(j) != seg
    )
    return same, other


def index_sets(n: int, w: int, pseudo: Segmentation, i: int) -> IndexSets:
    near, far = neighbor_sets(n, w, i)
    same, other = segment_sets(pseudo, i)
    return IndexSets(near, far, same, other)


def mine_pairs(n: int, w: int, pseudo: Segmentation) -> PairSet:
    """Mine topical positives and negatives for every anchor.

    Positives: neighbors that share the anchor's pseudo-segment.
    Negatives: non-neighbors that sit in a different pseudo-segment.
    Pairs are ordered (anchor, other); the mirrored pair appears only
    when the mirrored anchor also generates it.
    """
    if pseudo.n != n:
        raise DialsegError(f"pseudo-segmentation is for n={pseudo.n}, expected {n}")
    positives: list[tuple[int, int]] = []
    negatives: list[tuple[int, int]] = []
    for i in range(1, n + 1):
        sets = index_sets(n, w, pseudo, i)
        positives.extend((i, j) for j in sorted(sets.neighbors & sets.same_segment))
        negatives.extend(
            (i, j) for j in sorted(sets.non_neighbors & sets.other_segments)
        )
    return PairSet(tuple(positives), tuple(negatives))


def pseudo_segment(embeddings: EmbeddingMatrix, cfg: RunConfig) -> Segmentation:
    """Unsupervised segmentation from pure topic similarity.

    Runs the depth-score segmenter over the relevance series with
    coherence weighted to zero, so only the current representations
    drive the pseudo-boundaries.
    """
    if embeddings.n < 2:
        raise DialsegError("pseudo-segmentation needs at least 2 utterances")
    series = relevance_series(
        embeddings, CoherenceSeries.zeros(embeddings.n - 1), coherence_weight=0.0
    )
    return texttiling(series, cfg)


_NORM_FLOOR = 1e-12


def _cosine_and_grads(a: np.ndarray, b: np.ndarray):
    # cos(a, b) plus its gradients w.r.t. a and b; zero-norm inputs give
    # cosine 0 with zero gradients (the degenerate-point subgradient).
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < _NORM_FLOOR or nb < _NORM_FLOOR:
        return 0.0, np.zeros_like(a), np.zeros_like(b)
    c = float(np.dot(a, b) / (na * nb))
    grad_a = b / (na * nb) - c * a / (na * na)
    grad_b = a / (na * nb) - c * b / (nb * nb)
    return c, grad_a, grad_b


def margin_ranking_loss(
    anchor, positive, negative, margin: float
) -> tuple[float, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Hinge on the cosine gap: max(0, margin - cos(a,p) + cos(a,n)).

    Returns the loss and its exact subgradients with respect to all
    three vectors (zero throughout the inactive region).
    """
    if margin <= 0:
        raise DialsegError(f"margin must be > 0, got {margin}")
    a = np.asarray(anchor, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    n = np.asarray(negative, dtype=np.float64)
    if not (a.shape == p.shape == n.shape) or a.ndim != 1:
        raise DimensionMismatch(
            f"vectors must share one dimension, got {a.shape}, {p.shape}, {n.shape}"
        )
    cos_ap, dap_da, dap_dp = _cosine_and_grads(a, p)
    cos_an, dan_da, dan_dn = _cosine_and_grads(a, n)
    raw = margin - cos_ap + cos_an
    if raw <= 0:
        zero = np.zeros_like(a)
        return 0.0, (zero, zero.copy(), zero.copy())
    grad_a = -dap_da + dan_da
    grad_p = -dap_dp
    grad_n = dan_dn
    return float(raw), (grad_a, grad_p, grad_n)


class ProjectionHead:
    """Trainable linear map over frozen base embeddings.

    Applies x -> W x + b with W initialized to the identity, so an
    untrained head is a no-op on the representations.
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray, trained: bool = False):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or weight.shape[0] != weight.shape[1]:
            raise DimensionMismatch(f"weight must be square, got {weight.shape}")
        if bias.shape != (weight.shape[0],):
            raise DimensionMismatch(
                f"bias shape {bias.shape} does not match weight {weight.shape}"
            )
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            raise DialsegError("head parameters contain non-finite entries")
        self.weight = weight
        self.bias = bias
        self.trained = trained

    @staticmethod
    def identity(dim: int) -> "ProjectionHead":
        return ProjectionHead(np.eye(dim), np.zeros(dim), trained=False)

    @property
    def dim(self) -> int:
        return self.weight.shape[0]

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.weight @ np.asarray(vector, dtype=np.float64) + self.bias

    def transform(self, embeddings: EmbeddingMatrix) -> EmbeddingMatrix:
        if embeddings.d != self.dim:
            raise DimensionMismatch(
                f"head dim {self.dim} does not match embedding dim {embeddings.d}"
            )
        return EmbeddingMatrix(embeddings.values @ self.weight.T + self.bias)

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(self.weight.copy(), self.bias.copy(), self.trained)


def _build_triples(
    pair_sets: Sequence[PairSet],
    negatives_per_positive: int,
    rng: np.random.Generator,
) -> list[tuple[int, int, int, int]]:
    # (dialogue index, anchor, positive, negative), capping negatives per
    # positive by uniform sampling without replacement.
    triples: list[tuple[int, int, int, int]] = []
    for di, pairs in enumerate(pair_sets):
        neg_by_anchor: dict[int, list[int]] = {}
        for i, j in pairs.negatives:
            neg_by_anchor.setdefault(i, []).append(j)
        for i, j in pairs.positives:
            negs = neg_by_anchor.get(i)
            if not negs:
                continue
            if len(negs) > negatives_per_positive:
                picked = rng.choice(len(negs), size=negatives_per_positive, replace=False)
                chosen = [negs[k] for k in sorted(picked)]
            else:
                chosen = list(negs)
            triples.extend((di, i, j, k) for k in chosen)
    return triples


def mean_pair_loss(
    head: ProjectionHead,
    bases: Sequence[EmbeddingMatrix],
    pair_sets: Sequence[PairSet],
    cfg: RunConfig,
) -> float:
    """Mean margin-ranking loss over all formable triples, without capping."""
    total, count = 0.0, 0
    for base, pairs in zip(bases, pair_sets):
        transformed = head.transform(base)
        neg_by_anchor: dict[int, list[int]] = {}
        for i, j in pairs.negatives:
            neg_by_anchor.setdefault(i, []).append(j)
        for i, j in pairs.positives:
            for k in neg_by_anchor.get(i, ()):
                loss, _ = margin_ranking_loss(
                    transformed.row(i),
                    transformed.row(j),
                    transformed.row(k),
                    cfg.margin,
                )
                total += loss
                count += 1
    if count == 0:
        raise NoTrainablePairs("no (anchor, positive, negative) triples")
    return total / count


def train_head(
    bases: Sequence[EmbeddingMatrix],
    pair_sets: Sequence[PairSet],
    cfg: RunConfig,
    epochs: int,
    lr: float,
    initial: Optional[ProjectionHead] = None,
) -> ProjectionHead:
    """Fit the projection head by SGD on the margin-ranking loss.

    Each positive pair is matched with up to cfg.negatives_per_positive
    negatives sharing its anchor; triples are shuffled every epoch and
    parameters updated one triple at a time with a fixed learning rate.
    Deterministic for a given cfg.seed.
    """
    if len(bases) != len(pair_sets):
        raise DialsegError(
            f"{len(bases)} embedding matrices for {len(pair_sets)} pair sets"
        )
    if epochs < 0:
        raise DialsegError(f"epochs must be >= 0, got {epochs}")
    if not bases:
        raise NoTrainablePairs("no dialogues to train on")
    dim = bases[0].d
    for base in bases:
        if base.d != dim:
            raise DimensionMismatch("all embedding matrices must share one dimension")
    rng = np.random.default_rng(cfg.seed)
    triples = _build_triples(pair_sets, cfg.negatives_per_positive, rng)
    if not triples:
        raise NoTrainablePairs("no (anchor, positive, negative) triples")
    head = initial.copy() if initial is not None else ProjectionHead.identity(dim)
    if initial is not None and head.dim != dim:
        raise DimensionMismatch(
            f"initial head dim {head.dim} does not match embeddings dim {dim}"
        )
    weight, bias = head.weight.copy(), head.bias.copy()
    for _ in range(epochs):
        order = rng.permutation(len(triples))
        for t in order:
            di, ai, pi, ni = triples[t]
            base = bases[di].values
            a0, p0, n0 = base[ai - 1], base[pi - 1], base[ni - 1]
            va = weight @ a0 + bias
            vp = weight @ p0 + bias
            vn = weight @ n0 + bias
            loss, (ga, gp, gn) = margin_ranking_loss(va, vp, vn, cfg.margin)
            if loss == 0.0:
                continue
            grad_w = np.outer(ga, a0) + np.outer(gp, p0) + np.outer(gn, n0)
            grad_b = ga + gp + gn
            weight -= lr * grad_w
            bias -= lr * grad_b
    return ProjectionHead(weight, bias, trained=epochs > 0)


def refine_loop(
    dialogues: Sequence[Dialogue],
    provider: EmbeddingProvider,
    cfg: RunConfig,
    rounds: int,
    epochs_per_round: int = 1,
    lr: float = 0.05,
    on_round=None,
) -> ProjectionHead:
    """Alternate pseudo-segmentation, pair mining, and head training.

    Each round re-embeds through the current head, re-derives the
    pseudo-segments, mines fresh pairs, and runs one training pass. A
    round whose mined pairs yield no triples is skipped with a log
    message rather than failing. ``on_round(round_idx, mean_loss)`` is
    invoked after each trained round.
    """
    if rounds < 1:
        raise DialsegError(f"rounds must be >= 1, got {rounds}")
    bases = [provider.embed(d) for d in dialogues]
    if not bases:
        raise NoTrainablePairs("no dialogues")
    head = ProjectionHead.identity(bases[0].d)
    for round_idx in range(1, rounds + 1):
        pair_sets = []
        for base in bases:
            if base.n < 2:
                pair_sets.append(PairSet((), ()))
                continue
            pseudo = pseudo_segment(head.transform(base), cfg)
            pair_sets.append(mine_pairs(base.n, cfg.w, pseudo))
        try:
            head = train_head(
                bases, pair_sets, cfg, epochs=epochs_per_round, lr=lr, initial=head
            )
        except NoTrainablePairs:
            logger.info("round %d mined no trainable pairs, skipping", round_idx)
            continue
        if on_round is not None:
            on_round(round_idx, mean_pair_loss(head, bases, pair_sets, cfg))
    return head
