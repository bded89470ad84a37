"""Corpus and rewrite-file reading for the export scripts.

Mirrors the toolkit's on-disk conventions: plaintext corpora use one
utterance per line with "=====" separator rows and blank-line dialogue
breaks (ids are "<stem>-<ordinal>" from 1); structured corpora are JSON
lines with "id" and "utterances" fields. Gold boundaries are ignored
here, exports never look at them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

PathLike = Union[str, Path]

SEPARATOR = "====="


@dataclass(frozen=True)
class DialogueRecord:
    id: str
    texts: tuple[str, ...]


def read_plaintext(path: PathLike) -> list[DialogueRecord]:
    path = Path(path)
    stem = path.stem
    records: list[DialogueRecord] = []
    texts: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        stripped = line.rstrip()
        if not stripped.strip():
            if texts:
                records.append(DialogueRecord(f"{stem}-{len(records) + 1}", tuple(texts)))
                texts = []
            continue
        if stripped == SEPARATOR:
            continue
        texts.append(stripped)
    if texts:
        records.append(DialogueRecord(f"{stem}-{len(records) + 1}", tuple(texts)))
    if not records:
        raise ValueError(f"{path}: no dialogues found")
    return records


def read_structured(path: PathLike) -> list[DialogueRecord]:
    path = Path(path)
    records: list[DialogueRecord] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        did = record.get("id")
        utterances = record.get("utterances")
        if not isinstance(did, str) or not isinstance(utterances, list):
            raise ValueError(f"{path}:{line_no}: need 'id' and 'utterances'")
        records.append(DialogueRecord(did, tuple(utterances)))
    if not records:
        raise ValueError(f"{path}: no dialogues found")
    return records


def read_corpus(path: PathLike, fmt: str) -> list[DialogueRecord]:
    if fmt == "plain":
        return read_plaintext(path)
    if fmt == "structured":
        return read_structured(path)
    raise ValueError(f"unknown corpus format {fmt!r}")


def read_rewrite_file(path: PathLike) -> dict[tuple[str, int], str]:
    rewrites: dict[tuple[str, int], str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        rewrites[(record["id"], record["index"])] = record["text"]
    return rewrites


def resolve_texts(
    record: DialogueRecord, rewrites: dict[tuple[str, int], str] | None
) -> list[str]:
    """Rewritten-if-present text per utterance, 1-based indices."""
    if not rewrites:
        return list(record.texts)
    return [
        rewrites.get((record.id, index), text)
        for index, text in enumerate(record.texts, start=1)
    ]
