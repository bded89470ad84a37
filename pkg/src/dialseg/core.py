"""Domain types shared by every stage of the segmentation pipeline.

Indexing convention: utterances are numbered 1..n, the gap between
utterance i and i+1 is gap i, so a dialogue with n utterances has n-1
gaps. Boundaries are always gap indices. External formats use the same
1-based convention; anything 0-based is an internal detail of the code
that converts at the edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np


class DialsegError(Exception):
    """Base class for all errors raised by this package."""


class EmptyDialogue(DialsegError):
    pass


class BoundaryOutOfRange(DialsegError):
    pass


class DuplicateBoundary(DialsegError):
    pass


class LengthMismatch(DialsegError):
    pass


class DimensionMismatch(DialsegError):
    pass


class GapOutOfRange(DialsegError):
    pass


class AnchorOutOfRange(DialsegError):
    pass


@dataclass(frozen=True)
class Utterance:
    """A single dialogue turn.

    ``rewritten`` holds the context-restored form of the turn when a
    rewriting pass has produced one; ``resolved_text`` is what every
    downstream consumer should read.
    """

    index: int
    text: str
    speaker: Optional[str] = None
    rewritten: Optional[str] = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise DialsegError(f"utterance index must be >= 1, got {self.index}")
        if not self.text.strip():
            raise DialsegError(f"utterance {self.index} has empty text")
        if self.rewritten is not None and not self.rewritten.strip():
            raise DialsegError(f"utterance {self.index} has empty rewritten text")

    @property
    def resolved_text(self) -> str:
        """The rewritten form when present, otherwise the original text."""
        return self.rewritten if self.rewritten is not None else self.text


@dataclass(frozen=True)
class Segmentation:
    """A set of gap indices marking topic boundaries.

    ``boundaries`` is stored sorted; k boundaries split n utterances
    into k+1 segments, and an empty boundary list means one segment.
    """

    n: int
    boundaries: tuple[int, ...]

    def __init__(self, n: int, boundaries: Sequence[int] = ()) -> None:
        if n < 1:
            raise EmptyDialogue(f"segmentation needs n >= 1, got {n}")
        bounds = tuple(sorted(boundaries))
        for b in bounds:
            if not 1 <= b <= n - 1:
                raise BoundaryOutOfRange(
                    f"boundary {b} outside valid gap range [1, {n - 1}]"
                )
        if len(set(bounds)) != len(bounds):
            raise DuplicateBoundary(f"duplicate boundary in {list(boundaries)}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "boundaries", bounds)

    @property
    def segment_count(self) -> int:
        return len(self.boundaries) + 1

    def segment_ids(self) -> list[int]:
        """Segment id (0-based) of each utterance, as a list of length n."""
        ids = []
        seg = 0
        bset = set(self.boundaries)
        for u in range(1, self.n + 1):
            ids.append(seg)
            if u in bset:
                seg += 1
        return ids

    def segment_of(self, i: int) -> int:
        """Segment id of utterance i (1-based)."""
        if not 1 <= i <= self.n:
            raise AnchorOutOfRange(f"utterance {i} outside [1, {self.n}]")
        return sum(1 for b in self.boundaries if b < i)

    def same_segment(self, i: int, j: int) -> bool:
        return self.segment_of(i) == self.segment_of(j)


@dataclass(frozen=True)
class Dialogue:
    """An ordered list of utterances with optional gold boundaries."""

    id: str
    utterances: tuple[Utterance, ...]
    gold: Optional[Segmentation] = None

    @property
    def n(self) -> int:
        return len(self.utterances)

    @property
    def gap_count(self) -> int:
        return self.n - 1

    def texts(self) -> list[str]:
        """Per-utterance resolved text (rewritten where present)."""
        return [u.resolved_text for u in self.utterances]

    def with_utterances(self, utterances: Sequence[Utterance]) -> "Dialogue":
        return replace(self, utterances=tuple(utterances))

    @staticmethod
    def from_texts(
        id: str,
        texts: Sequence[str],
        gold: Optional[Sequence[int]] = None,
        roles: Optional[Sequence[Optional[str]]] = None,
    ) -> "Dialogue":
        if roles is not None and len(roles) != len(texts):
            raise LengthMismatch(
                f"{len(roles)} roles for {len(texts)} utterances in dialogue {id!r}"
            )
        utts = tuple(
            Utterance(index=i + 1, text=t, speaker=roles[i] if roles else None)
            for i, t in enumerate(texts)
        )
        if not utts:
            raise EmptyDialogue(f"dialogue {id!r} has no utterances")
        seg = Segmentation(len(utts), gold) if gold is not None else None
        return Dialogue(id=id, utterances=utts, gold=seg)


def validate_dialogue(d: Dialogue) -> Dialogue:
    """Check every dialogue invariant, returning d unchanged when valid.

    Raises EmptyDialogue, BoundaryOutOfRange or DuplicateBoundary; a
    mis-numbered utterance list raises the base DialsegError.
    """
    if d.n == 0:
        raise EmptyDialogue(f"dialogue {d.id!r} has no utterances")
    for pos, u in enumerate(d.utterances, start=1):
        if u.index != pos:
            raise DialsegError(
                f"dialogue {d.id!r}: utterance at position {pos} has index {u.index}"
            )
    if d.gold is not None:
        if d.gold.n != d.n:
            raise LengthMismatch(
                f"dialogue {d.id!r}: gold segmentation is for n={d.gold.n}, "
                f"dialogue has n={d.n}"
            )
        # Segmentation's own constructor enforces range/duplicates; re-check
        # against this dialogue's gap count for segmentations built elsewhere.
        for b in d.gold.boundaries:
            if not 1 <= b <= d.n - 1:
                raise BoundaryOutOfRange(
                    f"dialogue {d.id!r}: gold boundary {b} outside [1, {d.n - 1}]"
                )
    return d


@dataclass(frozen=True)
class RelevanceSeries:
    """Gap scores r_1..r_{n-1} consumed by the boundary selectors."""

    scores: tuple[float, ...]

    def __init__(self, scores: Sequence[float]) -> None:
        vals = tuple(float(s) for s in scores)
        for i, s in enumerate(vals, start=1):
            if not math.isfinite(s):
                raise DialsegError(f"relevance score at gap {i} is not finite: {s}")
        object.__setattr__(self, "scores", vals)

    def __len__(self) -> int:
        return len(self.scores)


class EmbeddingMatrix:
    """Per-utterance dense vectors; row i-1 is the vector for utterance i.

    Wraps a read-only float64 numpy array. Zero rows are allowed (they
    can occur in caches written by quantized exporters) and are handled
    downstream by the cosine routines.
    """

    def __init__(self, values) -> None:
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch(f"embedding matrix must be 2-D, got {arr.ndim}-D")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"embedding matrix shape {arr.shape} is degenerate")
        if not np.all(np.isfinite(arr)):
            raise DialsegError("embedding matrix contains non-finite entries")
        arr = arr.copy()
        arr.setflags(write=False)
        self._values = arr

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def d(self) -> int:
        return self._values.shape[1]

    @property
    def values(self):
        return self._values

    def row(self, i: int):
        """Vector of utterance i (1-based)."""
        if not 1 <= i <= self.n:
            raise GapOutOfRange(f"utterance {i} outside [1, {self.n}]")
        return self._values[i - 1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self._values.shape == other._values.shape and bool(
            np.array_equal(self._values, other._values)
        )


@dataclass(frozen=True)
class RunConfig:
    """Knobs for a segmentation / training run.

    ``threshold`` of None selects the mean-minus-half-sigma policy for
    boundary selection; a float is a fixed cutoff on depth scores.
    ``min_seg_len`` of 0 disables the minimum-segment-length constraint.
    """

    w: int = 5
    margin: float = 1.0
    smoothing_width: int = 1
    threshold: Optional[float] = None
    coherence_weight: float = 1.0
    seed: int = 0
    min_seg_len: int = 0
    negatives_per_positive: int = 5

    def __post_init__(self) -> None:
        if self.w < 1:
            raise DialsegError(f"w must be >= 1, got {self.w}")
        if self.margin <= 0:
            raise DialsegError(f"margin must be > 0, got {self.margin}")
        if self.smoothing_width < 1 or self.smoothing_width % 2 == 0:
            raise DialsegError(
                f"smoothing_width must be an odd integer >= 1, got {self.smoothing_width}"
            )
        if self.min_seg_len < 0:
            raise DialsegError(f"min_seg_len must be >= 0, got {self.min_seg_len}")
        if self.negatives_per_positive < 1:
            raise DialsegError(
                f"negatives_per_positive must be >= 1, got {self.negatives_per_positive}"
            )
