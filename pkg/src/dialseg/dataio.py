"""File formats: corpora, binary caches, rewrite files, and reports.

Formats are normative and versioned. All indices in external formats
are 1-based, matching the domain model; loaders reject malformed input
outright (with a line number or byte offset in the message) instead of
repairing it.

Binary cache layout (little-endian): magic (4 bytes), version u32,
entry count u32, then per entry an id (u16 length + UTF-8 bytes)
followed by the payload. Embedding caches ("DTSE") carry n u32, d u32
and n*d float32 row-major; coherence caches ("DTSC") carry m u32 and m
float32 values; head files ("DTSH") carry d u32, a trained flag u8,
d*d float64 weights row-major and d float64 biases. Floats round-trip
bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    DialsegError,
    Dialogue,
    EmbeddingMatrix,
    Segmentation,
    validate_dialogue,
)
from .mining import ProjectionHead
from .rewrite import RewriteMap
from .scoring import CoherenceSeries

PathLike = Union[str, Path]

EMBEDDING_MAGIC = b"DTSE"
COHERENCE_MAGIC = b"DTSC"
HEAD_MAGIC = b"DTSH"
FORMAT_VERSION = 1

PLAINTEXT_SEPARATOR = "====="


class EmptyFile(DialsegError):
    pass


class SeparatorAtEdge(DialsegError):
    pass


class MalformedRecord(DialsegError):
    pass


class DuplicateId(DialsegError):
    pass


class DuplicateKey(DialsegError):
    pass


class BadMagic(DialsegError):
    pass


class VersionUnsupported(DialsegError):
    pass


class TruncatedFile(DialsegError):
    pass


class DimensionMismatchAcrossEntries(DialsegError):
    pass


class IoFailure(DialsegError):
    pass


@dataclass(frozen=True)
class Corpus:
    """A list of dialogues with unique ids and a source-format tag."""

    dialogues: tuple[Dialogue, ...]
    source_format: str = "memory"

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for d in self.dialogues:
            if d.id in seen:
                raise DuplicateId(f"duplicate dialogue id {d.id!r}")
            seen.add(d.id)

    def __len__(self) -> int:
        return len(self.dialogues)

    def by_id(self) -> dict[str, Dialogue]:
        return {d.id: d for d in self.dialogues}


# ---------------------------------------------------------------------------
# plaintext corpus

def load_plaintext(path: PathLike) -> Corpus:
    """Parse a plaintext corpus.

    One utterance per line; a line of exactly "=====" marks a gold
    topic boundary between the surrounding utterances; a blank line
    ends the current dialogue. Dialogue ids are "<file stem>-<ordinal>"
    with ordinals starting at 1.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    stem = path.stem
    dialogues: list[Dialogue] = []
    texts: list[str] = []
    boundaries: list[int] = []
    last_was_separator = False

    def flush(line_no: int) -> None:
        nonlocal texts, boundaries, last_was_separator
        if last_was_separator:
            raise SeparatorAtEdge(
                f"{path}:{line_no}: separator at end of dialogue"
            )
        if texts:
            dialogues.append(
                Dialogue.from_texts(
                    f"{stem}-{len(dialogues) + 1}", texts, gold=boundaries
                )
            )
        texts, boundaries = [], []
        last_was_separator = False

    for line_no, line in enumerate(raw.splitlines(), start=1):
        stripped = line.rstrip()
        if not stripped.strip():
            flush(line_no)
            continue
        if stripped == PLAINTEXT_SEPARATOR:
            if not texts:
                raise SeparatorAtEdge(
                    f"{path}:{line_no}: separator at start of dialogue"
                )
            try:
                Segmentation(len(texts) + 1, boundaries + [len(texts)])
            except DialsegError as exc:
                raise type(exc)(f"{path}:{line_no}: {exc}") from None
            boundaries.append(len(texts))
            last_was_separator = True
            continue
        texts.append(stripped)
        last_was_separator = False
    flush(len(raw.splitlines()) + 1)

    if not dialogues:
        raise EmptyFile(f"{path}: no dialogues found")
    return Corpus(tuple(validate_dialogue(d) for d in dialogues), source_format="plain")


def write_plaintext(corpus: Corpus, path: PathLike) -> None:
    """Serialize a corpus back to the plaintext format."""
    lines: list[str] = []
    for k, d in enumerate(corpus.dialogues):
        if k > 0:
            lines.append("")
        bset = set(d.gold.boundaries) if d.gold else set()
        for u in d.utterances:
            lines.append(u.text)
            if u.index in bset:
                lines.append(PLAINTEXT_SEPARATOR)
    write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# structured corpus (JSON lines)

def load_structured(path: PathLike) -> Corpus:
    """Parse a JSON-lines corpus.

    One dialogue per line with fields "id", "utterances", and optional
    "boundaries" (1-based gap indices) and "roles".
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    dialogues: list[Dialogue] = []
    seen: set[str] = set()
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}:{line_no}: invalid JSON: {exc}") from None
        dialogues.append(_dialogue_from_record(record, f"{path}:{line_no}"))
        if dialogues[-1].id in seen:
            raise DuplicateId(f"{path}:{line_no}: duplicate dialogue id {dialogues[-1].id!r}")
        seen.add(dialogues[-1].id)
    if not dialogues:
        raise EmptyFile(f"{path}: no dialogues found")
    return Corpus(tuple(validate_dialogue(d) for d in dialogues), source_format="structured")


def _dialogue_from_record(record: object, where: str) -> Dialogue:
    if not isinstance(record, dict):
        raise MalformedRecord(f"{where}: record must be a JSON object")
    did = record.get("id")
    utterances = record.get("utterances")
    if not isinstance(did, str) or not did:
        raise MalformedRecord(f"{where}: missing or invalid 'id'")
    if not isinstance(utterances, list) or not all(
        isinstance(u, str) for u in utterances
    ):
        raise MalformedRecord(f"{where}: 'utterances' must be a list of strings")
    boundaries = record.get("boundaries")
    if boundaries is not None and (
        not isinstance(boundaries, list)
        or not all(isinstance(b, int) and not isinstance(b, bool) for b in boundaries)
    ):
        raise MalformedRecord(f"{where}: 'boundaries' must be a list of integers")
    roles = record.get("roles")
    if roles is not None and (
        not isinstance(roles, list)
        or not all(r is None or isinstance(r, str) for r in roles)
    ):
        raise MalformedRecord(f"{where}: 'roles' must be a list of strings or nulls")
    try:
        return Dialogue.from_texts(did, utterances, gold=boundaries, roles=roles)
    except DialsegError as exc:
        raise type(exc)(f"{where}: {exc}") from None


def write_structured(corpus: Corpus, path: PathLike) -> None:
    lines = []
    for d in corpus.dialogues:
        record: dict[str, object] = {
            "id": d.id,
            "utterances": [u.text for u in d.utterances],
        }
        if d.gold is not None:
            record["boundaries"] = list(d.gold.boundaries)
        if any(u.speaker is not None for u in d.utterances):
            record["roles"] = [u.speaker for u in d.utterances]
        lines.append(json.dumps(record, ensure_ascii=False))
    write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# binary caches

class _Cursor:
    """Byte reader that reports the offset of any shortage."""

    def __init__(self, data: bytes, path: Path) -> None:
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise TruncatedFile(
                f"{self.path}: needed {count} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def done(self) -> None:
        if self.pos != len(self.data):
            raise MalformedRecord(
                f"{self.path}: {len(self.data) - self.pos} trailing bytes at offset {self.pos}"
            )


def _read_envelope(path: Path, magic: bytes) -> _Cursor:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    cur = _Cursor(data, path)
    got = cur.take(4)
    if got != magic:
        raise BadMagic(f"{path}: expected magic {magic!r}, got {got!r}")
    version = cur.u32()
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"{path}: version {version} not supported")
    return cur


def load_embedding_cache(path: PathLike) -> dict[str, EmbeddingMatrix]:
    """Read a DTSE cache into per-dialogue embedding matrices.

    Every entry in one cache must share the same dimension; a mixed
    cache is a hard error.
    """
    path = Path(path)
    cur = _read_envelope(path, EMBEDDING_MAGIC)
    count = cur.u32()
    out: dict[str, EmbeddingMatrix] = {}
    shared_d: Optional[int] = None
    for _ in range(count):
        did = cur.take(cur.u16()).decode("utf-8")
        n = cur.u32()
        d = cur.u32()
        if n < 1 or d < 1:
            raise MalformedRecord(f"{path}: entry {did!r} has degenerate shape {n}x{d}")
        if shared_d is None:
            shared_d = d
        elif d != shared_d:
            raise DimensionMismatchAcrossEntries(
                f"{path}: entry {did!r} has d={d}, earlier entries have d={shared_d}"
            )
        payload = cur.take(n * d * 4)
        values = np.frombuffer(payload, dtype="<f4").reshape(n, d)
        if did in out:
            raise DuplicateKey(f"{path}: duplicate cache entry {did!r}")
        out[did] = EmbeddingMatrix(values)
    cur.done()
    return out


def write_embedding_cache(
    matrices: dict[str, EmbeddingMatrix], path: PathLike
) -> None:
    """Write a DTSE cache; float32 payloads round-trip bit-exactly."""
    dims = {m.d for m in matrices.values()}
    if len(dims) > 1:
        raise DimensionMismatchAcrossEntries(
            f"matrices have mixed dimensions {sorted(dims)}"
        )
    blob = bytearray()
    blob += EMBEDDING_MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    blob += struct.pack("<I", len(matrices))
    for did, matrix in matrices.items():
        encoded = did.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<II", matrix.n, matrix.d)
        blob += matrix.values.astype("<f4").tobytes(order="C")
    write_bytes(path, bytes(blob))


def load_coherence_cache(path: PathLike) -> dict[str, CoherenceSeries]:
    """Read a DTSC cache into per-dialogue coherence series."""
    path = Path(path)
    cur = _read_envelope(path, COHERENCE_MAGIC)
    count = cur.u32()
    out: dict[str, CoherenceSeries] = {}
    for _ in range(count):
        did = cur.take(cur.u16()).decode("utf-8")
        m = cur.u32()
        payload = cur.take(m * 4)
        values = np.frombuffer(payload, dtype="<f4")
        if did in out:
            raise DuplicateKey(f"{path}: duplicate cache entry {did!r}")
        out[did] = CoherenceSeries(values.tolist())
    cur.done()
    return out


def write_coherence_cache(series: dict[str, CoherenceSeries], path: PathLike) -> None:
    blob = bytearray()
    blob += COHERENCE_MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    blob += struct.pack("<I", len(series))
    for did, values in series.items():
        encoded = did.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<I", len(values))
        blob += np.asarray(values.values, dtype="<f4").tobytes(order="C")
    write_bytes(path, bytes(blob))


def load_head(path: PathLike) -> ProjectionHead:
    """Read a DTSH projection-head file."""
    path = Path(path)
    cur = _read_envelope(path, HEAD_MAGIC)
    d = cur.u32()
    if d < 1:
        raise MalformedRecord(f"{path}: head dimension must be >= 1, got {d}")
    trained = cur.u8()
    weight = np.frombuffer(cur.take(d * d * 8), dtype="<f8").reshape(d, d)
    bias = np.frombuffer(cur.take(d * 8), dtype="<f8")
    cur.done()
    return ProjectionHead(weight.copy(), bias.copy(), trained=bool(trained))


def write_head(head: ProjectionHead, path: PathLike) -> None:
    blob = bytearray()
    blob += HEAD_MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    blob += struct.pack("<I", head.dim)
    blob += struct.pack("<B", 1 if head.trained else 0)
    blob += head.weight.astype("<f8").tobytes(order="C")
    blob += head.bias.astype("<f8").tobytes(order="C")
    write_bytes(path, bytes(blob))


# ---------------------------------------------------------------------------
# rewrite files (JSON lines)

def load_rewrites(path: PathLike) -> RewriteMap:
    """Parse a JSON-lines rewrite file with fields "id", "index", "text"."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    entries: dict[tuple[str, int], str] = {}
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}:{line_no}: invalid JSON: {exc}") from None
        if not isinstance(record, dict):
            raise MalformedRecord(f"{path}:{line_no}: record must be a JSON object")
        did = record.get("id")
        index = record.get("index")
        text = record.get("text")
        if not isinstance(did, str) or not did:
            raise MalformedRecord(f"{path}:{line_no}: missing or invalid 'id'")
        if not isinstance(index, int) or isinstance(index, bool) or index < 1:
            raise MalformedRecord(
                f"{path}:{line_no}: 'index' must be a 1-based integer, got {index!r}"
            )
        if not isinstance(text, str) or not text.strip():
            raise MalformedRecord(f"{path}:{line_no}: missing or empty 'text'")
        key = (did, index)
        if key in entries:
            raise DuplicateKey(f"{path}:{line_no}: duplicate rewrite for {key}")
        entries[key] = text
    return RewriteMap(entries)


def write_rewrites(rewrites: RewriteMap, path: PathLike) -> None:
    lines = [
        json.dumps({"id": did, "index": idx, "text": text}, ensure_ascii=False)
        for (did, idx), text in sorted(rewrites.entries.items())
    ]
    write_text(path, "\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# hypothesis files (JSON lines)

def load_hypotheses(path: PathLike) -> dict[str, list[int]]:
    """Parse per-dialogue predicted boundaries: fields "id", "boundaries"."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    out: dict[str, list[int]] = {}
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}:{line_no}: invalid JSON: {exc}") from None
        did = record.get("id") if isinstance(record, dict) else None
        boundaries = record.get("boundaries") if isinstance(record, dict) else None
        if not isinstance(did, str) or not isinstance(boundaries, list):
            raise MalformedRecord(f"{path}:{line_no}: need 'id' and 'boundaries'")
        if not all(isinstance(b, int) and not isinstance(b, bool) for b in boundaries):
            raise MalformedRecord(f"{path}:{line_no}: boundaries must be integers")
        if did in out:
            raise DuplicateId(f"{path}:{line_no}: duplicate hypothesis for {did!r}")
        out[did] = boundaries
    return out


def write_hypotheses(hypotheses: dict[str, Sequence[int]], path: PathLike) -> None:
    lines = [
        json.dumps({"id": did, "boundaries": list(bounds)})
        for did, bounds in sorted(hypotheses.items())
    ]
    write_text(path, "\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# evaluation reports

@dataclass(frozen=True)
class EvalResult:
    """Corpus-level evaluation of one method: mean Pk / WindowDiff."""

    method: str
    corpus: str
    pk: float
    wd: float
    dialogues: int = 0
    extras: dict = field(default_factory=dict)


def write_report(results: Sequence[EvalResult], path: PathLike) -> None:
    """Write a human-readable table plus a machine-readable record stream.

    The table lands at ``path`` with Pk and WindowDiff as percentages to
    two decimals, rows sorted by Pk ascending; the records go to
    ``path`` + ".jsonl" with full-precision fractions.
    """
    if not results:
        raise DialsegError("cannot write a report with no results")
    rows = sorted(results, key=lambda r: (r.pk, r.wd, r.method, r.corpus))
    method_w = max(6, *(len(r.method) for r in rows))
    corpus_w = max(6, *(len(r.corpus) for r in rows))
    lines = [
        "Pk and WD are error percentages; lower is better.",
        f"{'method':<{method_w}}  {'corpus':<{corpus_w}}  {'Pk':>6}  {'WD':>6}  {'dialogues':>9}",
    ]
    for r in rows:
        lines.append(
            f"{r.method:<{method_w}}  {r.corpus:<{corpus_w}}  "
            f"{100.0 * r.pk:>6.2f}  {100.0 * r.wd:>6.2f}  {r.dialogues:>9}"
        )
    write_text(path, "\n".join(lines) + "\n")
    records = [
        json.dumps(
            {
                "method": r.method,
                "corpus": r.corpus,
                "pk": r.pk,
                "wd": r.wd,
                "dialogues": r.dialogues,
                **r.extras,
            },
            sort_keys=True,
        )
        for r in rows
    ]
    write_text(str(path) + ".jsonl", "\n".join(records) + "\n")


# ---------------------------------------------------------------------------

def write_text(path: PathLike, content: str) -> None:
    """Write text, wrapping OS errors in IoFailure."""
    try:
        Path(path).write_text(content, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_bytes(path: PathLike, content: bytes) -> None:
    try:
        Path(path).write_bytes(content)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
