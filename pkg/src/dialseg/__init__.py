"""Unsupervised dialogue topic segmentation toolkit."""

from .core import (
    DialsegError,
    Dialogue,
    EmbeddingMatrix,
    RelevanceSeries,
    RunConfig,
    Segmentation,
    Utterance,
    validate_dialogue,
)
from .metrics import MetricResult, default_window, pk, window_diff
from .mining import (
    PairSet,
    ProjectionHead,
    margin_ranking_loss,
    mine_pairs,
    neighbor_sets,
    pseudo_segment,
    refine_loop,
    segment_sets,
    train_head,
)
from .rewrite import RewriteMap, apply_identity, apply_map
from .scoring import (
    CoherenceSeries,
    CachedCoherenceProvider,
    CachedEmbeddingProvider,
    CoherenceProvider,
    EmbeddingProvider,
    HashEmbeddingProvider,
    ZeroCoherenceProvider,
    cosine,
    relevance_series,
    topic_similarity,
)
from .segmenters import (
    DepthSeries,
    depth_scores,
    greedy_segment,
    random_segment,
    smooth,
    texttiling,
)

__version__ = "0.1.0"

__all__ = [
    "CachedCoherenceProvider",
    "CachedEmbeddingProvider",
    "CoherenceProvider",
    "CoherenceSeries",
    "DepthSeries",
    "DialsegError",
    "Dialogue",
    "EmbeddingMatrix",
    "EmbeddingProvider",
    "HashEmbeddingProvider",
    "MetricResult",
    "PairSet",
    "ProjectionHead",
    "RelevanceSeries",
    "RewriteMap",
    "RunConfig",
    "Segmentation",
    "Utterance",
    "ZeroCoherenceProvider",
    "apply_identity",
    "apply_map",
    "cosine",
    "default_window",
    "depth_scores",
    "greedy_segment",
    "margin_ranking_loss",
    "mine_pairs",
    "neighbor_sets",
    "pk",
    "pseudo_segment",
    "random_segment",
    "refine_loop",
    "relevance_series",
    "segment_sets",
    "smooth",
    "texttiling",
    "topic_similarity",
    "train_head",
    "validate_dialogue",
    "window_diff",
]
