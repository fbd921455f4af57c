"""Word/subword alignment and subword-state pooling.

A contextual encoder's tokenizer splits words into subwords and brackets the
sequence with start/end markers. ``tokenize_with_alignment`` records, per
word, the inclusive range of content subwords it produced; ``pool_subwords``
averages the encoder states of each range back into one row per word.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import torch

from .errors import AlignmentError

log = logging.getLogger(__name__)


@runtime_checkable
class SubwordTokenizer(Protocol):
    """Minimal tokenizer surface the alignment layer needs."""

    @property
    def start_id(self) -> int: ...

    @property
    def end_id(self) -> int: ...

    @property
    def unk_id(self) -> int: ...

    @property
    def max_subwords(self) -> int: ...

    def subword_ids(self, word: str) -> list[int]:
        """Content subword ids for one word (no markers; may be empty)."""
        ...


@dataclass(frozen=True)
class AlignmentMap:
    """Per-word inclusive [i, j] ranges over the content subword sequence.

    ``leading``/``trailing`` count marker states surrounding the content rows
    in the encoder output; ranges themselves never include markers.
    """

    spans: tuple[tuple[int, int], ...]
    leading: int = 0
    trailing: int = 0

    def __post_init__(self):
        expected = 0
        for i, j in self.spans:
            if i != expected or j < i:
                raise AlignmentError(f"spans {self.spans} do not tile the subword range")
            expected = j + 1

    @property
    def n_words(self) -> int:
        return len(self.spans)

    @property
    def n_subwords(self) -> int:
        return self.spans[-1][1] + 1 if self.spans else 0


def tokenize_with_alignment(
    tokens: Sequence[str], tokenizer: SubwordTokenizer
) -> tuple[list[int], AlignmentMap]:
    """Subword-encode a word sequence, bracketed by start/end markers.

    Words that tokenize to zero subwords are substituted by the unknown id so
    every word keeps a non-empty span.
    """
    if not tokens:
        raise AlignmentError("cannot tokenize an empty sentence")
    ids = [tokenizer.start_id]
    spans = []
    cursor = 0
    for word in tokens:
        pieces = tokenizer.subword_ids(word)
        if not pieces:
            log.warning("word %r produced no subwords; substituting unk", word)
            pieces = [tokenizer.unk_id]
        ids.extend(pieces)
        spans.append((cursor, cursor + len(pieces) - 1))
        cursor += len(pieces)
    ids.append(tokenizer.end_id)
    if len(ids) > tokenizer.max_subwords:
        raise AlignmentError(
            f"sentence of {len(tokens)} words needs {len(ids)} subword slots, "
            f"over the encoder limit of {tokenizer.max_subwords}"
        )
    return ids, AlignmentMap(spans=tuple(spans), leading=1, trailing=1)


def pool_subwords(subword_states: torch.Tensor, alignment: AlignmentMap) -> torch.Tensor:
    """Mean-pool subword states into word states; marker states are dropped.

    ``subword_states`` is (leading + n_subwords + trailing) x d.
    """
    m = subword_states.shape[0]
    expected = alignment.leading + alignment.n_subwords + alignment.trailing
    if m != expected:
        raise AlignmentError(f"got {m} subword states, alignment expects {expected}")
    rows = []
    off = alignment.leading
    for i, j in alignment.spans:
        rows.append(subword_states[off + i : off + j + 1].mean(dim=0))
    return torch.stack(rows, dim=0)
