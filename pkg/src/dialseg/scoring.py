"""Gap relevance scoring from utterance embeddings plus coherence.

The relevance score of gap i is the cosine similarity between the mean
of the two utterance vectors left of the gap and the mean of the two
right of it, plus a weighted coherence score for the gap. Windows are
clamped at dialogue edges, so gap 1 compares utterance 1 against the
mean of utterances 2 and 3.

Embeddings and coherence arrive through provider interfaces; the
transformer-backed providers live in a separate exporter that writes
the cache files consumed here, which keeps this module free of any ML
runtime.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    DialsegError,
    Dialogue,
    DimensionMismatch,
    EmbeddingMatrix,
    GapOutOfRange,
    LengthMismatch,
    RelevanceSeries,
)


class ZeroVectorWarning(UserWarning):
    """A cosine input had (near-)zero norm and was scored as 0."""


class CoherenceRangeWarning(UserWarning):
    """A coherence value fell outside the expected [0, 1] range."""


_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class CoherenceSeries:
    """Per-gap coherence scores c_1..c_{n-1}.

    Values are expected in [0, 1] when produced by a next-sentence
    probability model; out-of-range values warn but do not fail.
    """

    values: tuple[float, ...]

    def __init__(self, values: Sequence[float]) -> None:
        vals = tuple(float(v) for v in values)
        for i, v in enumerate(vals, start=1):
            if not math.isfinite(v):
                raise DialsegError(f"coherence value at gap {i} is not finite: {v}")
            if v < 0.0 or v > 1.0:
                warnings.warn(
                    f"coherence value {v} at gap {i} outside [0, 1]",
                    CoherenceRangeWarning,
                    stacklevel=2,
                )
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @staticmethod
    def zeros(n_gaps: int) -> "CoherenceSeries":
        return CoherenceSeries((0.0,) * n_gaps)


def cosine(a, b) -> float:
    """Cosine similarity in [-1, 1].

    A (near-)zero-norm input maps to 0.0 with a ZeroVectorWarning
    rather than erroring: cache files from quantized exports can
    legitimately contain near-zero rows.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1 or av.shape[0] != bv.shape[0]:
        raise DimensionMismatch(f"cosine needs equal-length vectors, got {av.shape} and {bv.shape}")
    if av.shape[0] < 1:
        raise DimensionMismatch("cosine needs vectors of length >= 1")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na < _NORM_FLOOR or nb < _NORM_FLOOR:
        warnings.warn("zero-norm vector in cosine, scoring 0.0", ZeroVectorWarning, stacklevel=2)
        return 0.0
    return float(np.dot(av, bv) / (na * nb))


def topic_similarity(embeddings: EmbeddingMatrix, i: int) -> float:
    """Windowed similarity across gap i.

    Left window is utterances {i-1, i} and right window {i+1, i+2},
    each clamped to [1, n]; the score is the cosine of the two window
    means.
    """
    n = embeddings.n
    if n < 2:
        raise GapOutOfRange(f"no gaps in a dialogue of {n} utterance(s)")
    if not 1 <= i <= n - 1:
        raise GapOutOfRange(f"gap {i} outside [1, {n - 1}]")
    left = [u for u in (i - 1, i) if 1 <= u <= n]
    right = [u for u in (i + 1, i + 2) if 1 <= u <= n]
    left_mean = np.mean([embeddings.row(u) for u in left], axis=0)
    right_mean = np.mean([embeddings.row(u) for u in right], axis=0)
    return cosine(left_mean, right_mean)


def relevance_series(
    embeddings: EmbeddingMatrix,
    coherence: CoherenceSeries,
    coherence_weight: float = 1.0,
) -> RelevanceSeries:
    """Per-gap relevance: topic similarity plus weighted coherence.

    A weight of 0 gives the pure-similarity ablation without a second
    code path.
    """
    n_gaps = embeddings.n - 1
    if len(coherence) != n_gaps:
        raise LengthMismatch(
            f"{len(coherence)} coherence values for {n_gaps} gaps"
        )
    scores = [
        topic_similarity(embeddings, i) + coherence_weight * coherence.values[i - 1]
        for i in range(1, n_gaps + 1)
    ]
    return RelevanceSeries(scores)


class EmbeddingProvider(ABC):
    """Yields one embedding row per utterance of a dialogue.

    Providers must read the rewritten text when present (identity
    rewriting makes that the original text) and be safe to share
    across threads once constructed.
    """

    @abstractmethod
    def embed(self, dialogue: Dialogue) -> EmbeddingMatrix:
        ...


class CoherenceProvider(ABC):
    """Yields the per-gap coherence series for a dialogue."""

    @abstractmethod
    def coherence(self, dialogue: Dialogue) -> CoherenceSeries:
        ...


class CachedEmbeddingProvider(EmbeddingProvider):
    """Serves precomputed matrices keyed by dialogue id."""

    def __init__(self, matrices: Mapping[str, EmbeddingMatrix]) -> None:
        self._matrices = dict(matrices)

    def embed(self, dialogue: Dialogue) -> EmbeddingMatrix:
        try:
            matrix = self._matrices[dialogue.id]
        except KeyError:
            raise DialsegError(f"no cached embeddings for dialogue {dialogue.id!r}") from None
        if matrix.n != dialogue.n:
            raise LengthMismatch(
                f"cached matrix for {dialogue.id!r} has {matrix.n} rows, "
                f"dialogue has {dialogue.n} utterances"
            )
        return matrix


class CachedCoherenceProvider(CoherenceProvider):
    """Serves precomputed coherence series keyed by dialogue id."""

    def __init__(self, series: Mapping[str, CoherenceSeries]) -> None:
        self._series = dict(series)

    def coherence(self, dialogue: Dialogue) -> CoherenceSeries:
        try:
            values = self._series[dialogue.id]
        except KeyError:
            raise DialsegError(f"no cached coherence for dialogue {dialogue.id!r}") from None
        if len(values) != dialogue.gap_count:
            raise LengthMismatch(
                f"cached coherence for {dialogue.id!r} has {len(values)} values, "
                f"dialogue has {dialogue.gap_count} gaps"
            )
        return values


class ZeroCoherenceProvider(CoherenceProvider):
    """All-zero coherence, for the pure-similarity ablation."""

    def coherence(self, dialogue: Dialogue) -> CoherenceSeries:
        return CoherenceSeries.zeros(dialogue.gap_count)


class HashEmbeddingProvider(EmbeddingProvider):
    """Deterministic synthetic embeddings derived from utterance text.

    Each resolved utterance text is hashed into an RNG seed and mapped
    to a unit vector, so identical texts always share a row and runs
    are reproducible across processes. Intended for tests and for
    exercising the pipeline without a real encoder.
    """

    def __init__(self, dim: int = 16, salt: str = "") -> None:
        if dim < 1:
            raise DimensionMismatch(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.salt = salt

    def _vector(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.salt}\x00{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vec = rng.standard_normal(self.dim)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed(self, dialogue: Dialogue) -> EmbeddingMatrix:
        rows = [self._vector(text) for text in dialogue.texts()]
        return EmbeddingMatrix(np.stack(rows))
