"""Boundary selection over a relevance series, plus baseline segmenters.

The main selector follows the TextTiling recipe: optionally smooth the
gap scores, convert them to depth scores (how far the series rises from
a gap to its nearest left and right peaks), then place a boundary at
every gap whose depth clears a statistics-based threshold.

Depth is measured only at gaps that are valleys of the series: both
existing neighbors must not sit strictly below the gap's score. Without
that gate a "shoulder" gap (one side rises, the other falls) would pick
up the full rise of its rising side and fire spuriously on series like
[0.9, 0.8, 0.2, 0.85, 0.9], where only the middle gap marks a topic
shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    DialsegError,
    EmbeddingMatrix,
    RelevanceSeries,
    RunConfig,
    Segmentation,
)
from .scoring import cosine


class EvenWidth(DialsegError):
    pass


@dataclass(frozen=True)
class DepthSeries:
    """Non-negative depth per gap; higher means a sharper score valley."""

    depths: tuple[float, ...]

    def __init__(self, depths: Sequence[float]) -> None:
        vals = tuple(float(d) for d in depths)
        for i, d in enumerate(vals, start=1):
            if d < 0 or not math.isfinite(d):
                raise DialsegError(f"depth at gap {i} must be finite and >= 0, got {d}")
        object.__setattr__(self, "depths", vals)

    def __len__(self) -> int:
        return len(self.depths)


def smooth(series: RelevanceSeries, width: int) -> RelevanceSeries:
    """Centered moving average with the window truncated at the edges.

    width must be odd; width 1 is the identity.
    """
    if width < 1 or width % 2 == 0:
        raise EvenWidth(f"smoothing width must be odd and >= 1, got {width}")
    if width == 1:
        return series
    scores = series.scores
    half = width // 2
    out = []
    for i in range(len(scores)):
        lo = max(0, i - half)
        hi = min(len(scores), i + half + 1)
        out.append(sum(scores[lo:hi]) / (hi - lo))
    return RelevanceSeries(out)


def _climb(scores: Sequence[float], start: int, step: int) -> float:
    # Peak value reached by walking from start while scores do not drop.
    peak = scores[start]
    j = start + step
    while 0 <= j < len(scores) and scores[j] >= peak:
        peak = scores[j]
        j += step
    return peak


def depth_scores(series: RelevanceSeries) -> DepthSeries:
    """Depth of each gap: summed rises to the nearest left and right peaks.

    Gaps that are not valleys (an existing neighbor sits strictly below
    them) get depth 0; a single-gap series has depth 0.
    """
    scores = series.scores
    m = len(scores)
    depths = []
    for i in range(m):
        left_ok = i == 0 or scores[i - 1] >= scores[i]
        right_ok = i == m - 1 or scores[i + 1] >= scores[i]
        if not (left_ok and right_ok):
            depths.append(0.0)
            continue
        lpeak = _climb(scores, i, -1)
        rpeak = _climb(scores, i, +1)
        depths.append((lpeak - scores[i]) + (rpeak - scores[i]))
    return DepthSeries(depths)


def depth_threshold(depths: DepthSeries, fixed: Optional[float] = None) -> float:
    """Boundary cutoff: mean minus half the population standard deviation,
    or the fixed value when one is configured."""
    if fixed is not None:
        return fixed
    arr = np.asarray(depths.depths, dtype=np.float64)
    return float(arr.mean() - arr.std() / 2.0)


def _enforce_min_seg_len(
    candidates: list[int], depths: DepthSeries, n: int, min_len: int
) -> list[int]:
    # Keep deepest boundaries first, dropping any that would create a
    # segment shorter than min_len.
    kept: list[int] = []
    for gap in sorted(candidates, key=lambda g: (-depths.depths[g - 1], g)):
        cuts = sorted(kept + [gap])
        edges = [0] + cuts + [n]
        if all(b - a >= min_len for a, b in zip(edges, edges[1:])):
            kept.append(gap)
    return sorted(kept)


def texttiling(series: RelevanceSeries, cfg: RunConfig) -> Segmentation:
    """Depth-score boundary selection over a relevance series.

    Smooths with cfg.smoothing_width, takes depth scores, then places a
    boundary wherever depth strictly exceeds the threshold (mean minus
    half sigma by default, cfg.threshold when set). Under the
    statistical policy a boundary also needs positive depth: when most
    gaps are flat the computed cutoff can land a rounding error below
    zero, and a zero-depth gap carries no topic-shift evidence. A fixed
    cutoff is compared as given, so a negative tau can still promote
    flat gaps.
    """
    n = len(series) + 1
    smoothed = smooth(series, cfg.smoothing_width)
    depths = depth_scores(smoothed)
    cutoff = depth_threshold(depths, cfg.threshold)
    floor = 0.0 if cfg.threshold is None else -math.inf
    candidates = [
        i for i, d in enumerate(depths.depths, start=1) if d > cutoff and d > floor
    ]
    if cfg.min_seg_len > 1:
        candidates = _enforce_min_seg_len(candidates, depths, n, cfg.min_seg_len)
    return Segmentation(n, candidates)


def greedy_segment(embeddings: EmbeddingMatrix, tau: float) -> Segmentation:
    """Boundary at every gap whose adjacent-utterance cosine falls below tau."""
    n = embeddings.n
    if n < 2:
        raise DialsegError("greedy segmentation needs at least 2 utterances")
    boundaries = [
        i
        for i in range(1, n)
        if cosine(embeddings.row(i), embeddings.row(i + 1)) < tau
    ]
    return Segmentation(n, boundaries)


def mean_adjacent_cosine(embeddings: EmbeddingMatrix) -> float:
    """Default greedy threshold: the dialogue's mean adjacent cosine."""
    n = embeddings.n
    if n < 2:
        raise DialsegError("need at least 2 utterances")
    sims = [cosine(embeddings.row(i), embeddings.row(i + 1)) for i in range(1, n)]
    return float(np.mean(sims))


def random_segment(n: int, rng: np.random.Generator) -> Segmentation:
    """Random baseline.

    Draws a boundary budget b uniformly from {0, ..., n-1}, then marks
    each gap as a boundary independently with probability b/n.
    """
    if n < 1:
        raise DialsegError(f"n must be >= 1, got {n}")
    b = int(rng.integers(0, n))
    boundaries = [i for i in range(1, n) if rng.random() < b / n]
    return Segmentation(n, boundaries)
