"""Resolution of rewritten utterance text.

Rewriting restores coreferences and ellipses so a turn can be scored
standalone; generation happens offline in the exporter, and this module
only applies the resulting (dialogue id, utterance index) -> text map.
The pipeline convention is rewritten-if-available: utterances without
an entry keep their original text, which also serves as the no-rewrite
ablation via the identity transform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .core import DialsegError, Dialogue


class MissingRewrite(DialsegError):
    pass


class UnknownDialogue(DialsegError):
    pass


@dataclass(frozen=True)
class RewriteMap:
    """Rewritten text keyed by (dialogue id, 1-based utterance index)."""

    entries: Mapping[tuple[str, int], str]

    def __post_init__(self) -> None:
        for (did, idx), text in self.entries.items():
            if idx < 1:
                raise DialsegError(f"rewrite index must be >= 1, got {idx} for {did!r}")
            if not text.strip():
                raise DialsegError(f"empty rewrite for ({did!r}, {idx})")

    def __len__(self) -> int:
        return len(self.entries)

    def dialogue_ids(self) -> set[str]:
        return {did for did, _ in self.entries}

    def get(self, dialogue_id: str, index: int) -> str | None:
        return self.entries.get((dialogue_id, index))


def apply_identity(dialogue: Dialogue) -> Dialogue:
    """Set every utterance's rewritten text to its original text."""
    utts = tuple(replace(u, rewritten=u.text) for u in dialogue.utterances)
    return dialogue.with_utterances(utts)


def apply_map(
    dialogue: Dialogue, rewrites: RewriteMap, strict: bool = False
) -> Dialogue:
    """Attach rewritten text from the map, falling back to the identity.

    With strict=True every utterance must have a map entry; the default
    tolerates partial coverage, since long dialogues typically rewrite
    only the pronoun-bearing turns. Utterance count, order, and gold
    boundaries are never touched.
    """
    utts = []
    for u in dialogue.utterances:
        text = rewrites.get(dialogue.id, u.index)
        if text is None:
            if strict:
                raise MissingRewrite(
                    f"no rewrite for utterance {u.index} of dialogue {dialogue.id!r}"
                )
            text = u.text
        utts.append(replace(u, rewritten=text))
    return dialogue.with_utterances(tuple(utts))


def check_map_targets(rewrites: RewriteMap, dialogues: Mapping[str, Dialogue]) -> None:
    """Reject map entries that reference unknown dialogues or indices."""
    for (did, idx) in rewrites.entries:
        d = dialogues.get(did)
        if d is None:
            raise UnknownDialogue(f"rewrite references unknown dialogue {did!r}")
        if idx > d.n:
            raise DialsegError(
                f"rewrite references utterance {idx} of dialogue {did!r} (n={d.n})"
            )
