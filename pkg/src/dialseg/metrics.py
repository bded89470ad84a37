"""Windowed segmentation error metrics.

Both metrics slide a window of width k over utterance positions and
count windows where reference and hypothesis disagree; both are error
rates in [0, 1], lower is better. Window placement follows the
Pevzner-Hearst convention: positions i in [1, n-k], giving n-k windows.
Dialogues with n <= k are scored with a single window spanning the
whole dialogue instead of erroring, since short dialogues do occur in
real corpora.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .core import LengthMismatch, Segmentation


@dataclass(frozen=True)
class MetricResult:
    value: float
    window_k: int
    comparisons: int


def default_window(reference: Segmentation) -> int:
    """Window size from the reference: half the mean true segment length.

    k = round(n / (2 * segment_count)) with ties rounded up, clamped to
    [1, n-1]. Derived from the reference only, never the hypothesis.
    """
    n = reference.n
    k = int(math.floor(n / (2.0 * reference.segment_count) + 0.5))
    return max(1, min(k, max(1, n - 1)))


def _windows(n: int, k: int) -> list[int]:
    # Window start positions; a single whole-dialogue window when n <= k.
    if n > k:
        return list(range(1, n - k + 1))
    return [1]


def pk(
    reference: Segmentation,
    hypothesis: Segmentation,
    k: Optional[int] = None,
) -> MetricResult:
    """Probability that a window of width k straddles a segmentation error.

    For each window position i, checks whether utterances i and i+k fall
    in the same segment of the reference versus the hypothesis; the value
    is the fraction of windows where the two judgments disagree.
    """
    if reference.n != hypothesis.n:
        raise LengthMismatch(
            f"reference n={reference.n} vs hypothesis n={hypothesis.n}"
        )
    n = reference.n
    if k is None:
        k = default_window(reference)
    if k < 1:
        raise LengthMismatch(f"window size must be >= 1, got {k}")
    starts = _windows(n, k)
    span = k if n > k else n - 1
    disagreements = 0
    for i in starts:
        j = i + span
        same_ref = reference.segment_of(i) == reference.segment_of(j)
        same_hyp = hypothesis.segment_of(i) == hypothesis.segment_of(j)
        if same_ref != same_hyp:
            disagreements += 1
    return MetricResult(
        value=disagreements / len(starts), window_k=k, comparisons=len(starts)
    )


def window_diff(
    reference: Segmentation,
    hypothesis: Segmentation,
    k: Optional[int] = None,
) -> MetricResult:
    """Fraction of windows whose interior boundary counts differ.

    A window starting at i spans utterances i..i+k; the boundaries
    strictly inside it are the gaps i..i+k-1. Unlike pk this penalizes
    near-misses by count, not just same/different segment judgments.
    """
    if reference.n != hypothesis.n:
        raise LengthMismatch(
            f"reference n={reference.n} vs hypothesis n={hypothesis.n}"
        )
    n = reference.n
    if k is None:
        k = default_window(reference)
    if k < 1:
        raise LengthMismatch(f"window size must be >= 1, got {k}")
    starts = _windows(n, k)
    span = k if n > k else n - 1
    disagreements = 0
    for i in starts:
        lo, hi = i, i + span - 1  # gap indices inside the window
        b_ref = sum(1 for b in reference.boundaries if lo <= b <= hi)
        b_hyp = sum(1 for b in hypothesis.boundaries if lo <= b <= hi)
        if b_ref != b_hyp:
            disagreements += 1
    return MetricResult(
        value=disagreements / len(starts), window_k=k, comparisons=len(starts)
    )


def brute_force_oracle(
    reference: Segmentation,
    hypothesis: Segmentation,
    k: int,
    metric_kind: str,
) -> float:
    """Reference implementation used as a test oracle.

    Materializes the full per-utterance segment-id assignment for every
    window and compares element-wise; intentionally naive O(n*k). Must
    agree bit-for-bit with pk / window_diff on all inputs.
    """
    if metric_kind not in ("pk", "window_diff"):
        raise ValueError(f"unknown metric kind {metric_kind!r}")
    if reference.n != hypothesis.n:
        raise LengthMismatch(
            f"reference n={reference.n} vs hypothesis n={hypothesis.n}"
        )
    n = reference.n
    starts = _windows(n, k)
    span = k if n > k else n - 1
    disagreements = 0
    for i in starts:
        # Rebuild the assignment arrays from scratch for every window.
        ref_ids = Segmentation(n, reference.boundaries).segment_ids()
        hyp_ids = Segmentation(n, hypothesis.boundaries).segment_ids()
        window = list(range(i, i + span + 1))
        if metric_kind == "pk":
            first, last = window[0], window[-1]
            same_ref = ref_ids[first - 1] == ref_ids[last - 1]
            same_hyp = hyp_ids[first - 1] == hyp_ids[last - 1]
            if same_ref != same_hyp:
                disagreements += 1
        else:
            # A boundary sits inside the window wherever consecutive
            # utterances of the window carry different segment ids.
            b_ref = sum(
                1
                for a, b in zip(window, window[1:])
                if ref_ids[a - 1] != ref_ids[b - 1]
            )
            b_hyp = sum(
                1
                for a, b in zip(window, window[1:])
                if hyp_ids[a - 1] != hyp_ids[b - 1]
            )
            if b_ref != b_hyp:
                disagreements += 1
    return disagreements / len(starts)
