"""Corpus loading: ASTE triplet files, annotation sidecars, dependency graphs.

Corpus format: UTF-8 text, one sentence per line,

    The keyboard is comfortable .####[([1], [3], 'POS')]

where the part left of ``####`` is the whitespace-tokenized sentence and the
part right of it is a Python-literal list of ``([aspect indices], [opinion
indices], 'POS'|'NEU'|'NEG')`` entries with 0-based contiguous word indices.

Annotation sidecar: JSON lines, one record per sentence:

    {"id": ..., "tokens": [...], "pos": ["NOUN", ...], "heads": [...]}

with raw universal POS tags and 0-based head indices (root = -1).
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import AlignmentError, CorpusParseError, DataError, GraphError

SEPARATOR = "####"

Span = tuple[int, int]


class Sentiment(IntEnum):
    POS = 0
    NEU = 1
    NEG = 2

    @classmethod
    def from_label(cls, label: str) -> "Sentiment":
        try:
            return cls[label]
        except KeyError:
            raise DataError(f"unknown sentiment label {label!r}") from None


class PosClass(IntEnum):
    """Coarse POS categories; ordinals index the learnable POS embedding."""

    NOUN_C = 0
    VERB_C = 1
    ADJ_C = 2
    ADV_C = 3
    OTHER_C = 4


_POS_MAP = {
    "NOUN": PosClass.NOUN_C,
    "PROPN": PosClass.NOUN_C,
    "VERB": PosClass.VERB_C,
    "AUX": PosClass.VERB_C,
    "ADJ": PosClass.ADJ_C,
    "ADV": PosClass.ADV_C,
}


def map_pos_tag(raw_tag: str) -> PosClass:
    """Collapse a raw universal POS tag into the 5-way coarse set.

    Total: unknown tags fall into OTHER_C.
    """
    return _POS_MAP.get(str(raw_tag).upper(), PosClass.OTHER_C)


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise DataError(f"sentence {self.id}: empty token list")
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise DataError(
                    f"sentence {self.id}: token {tok!r} is empty or contains whitespace"
                )

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class GoldTriplet:
    aspect: Span
    opinion: Span
    sentiment: Sentiment

    def validate(self, n: int) -> None:
        for name, (s, e) in (("aspect", self.aspect), ("opinion", self.opinion)):
            if not (0 <= s <= e < n):
                raise DataError(f"{name} span [{s}, {e}] out of range for n={n}")
        a_s, a_e = self.aspect
        o_s, o_e = self.opinion
        if a_s <= o_e and o_s <= a_e:
            raise DataError(
                f"aspect span {self.aspect} overlaps opinion span {self.opinion}"
            )


@dataclass(frozen=True)
class AnnotatedSentence:
    sentence: Sentence
    pos: tuple[PosClass, ...] = ()
    heads: tuple[int, ...] = ()
    gold: tuple[GoldTriplet, ...] = ()

    @property
    def id(self) -> str:
        return self.sentence.id

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.sentence.tokens

    def __len__(self) -> int:
        return len(self.sentence)

    @property
    def is_annotated(self) -> bool:
        return bool(self.pos)

    def validate(self) -> None:
        n = len(self)
        for t in self.gold:
            t.validate(n)
        if not self.pos and not self.heads:
            return
        if len(self.pos) != n or len(self.heads) != n:
            raise AlignmentError(
                f"sentence {self.id}: {len(self.pos)} POS tags / {len(self.heads)} "
                f"heads for {n} tokens"
            )
        roots = [i for i, h in enumerate(self.heads) if h == -1]
        if len(roots) != 1:
            raise GraphError(f"sentence {self.id}: expected exactly one root, got {len(roots)}")
        for i, h in enumerate(self.heads):
            if h != -1 and not (0 <= h < n):
                raise GraphError(f"sentence {self.id}: head {h} of token {i} out of range")


def _spans_from_indices(indices, n: int, line_no: int) -> Span:
    if not indices:
        raise CorpusParseError("empty index list in triplet", line_no)
    idx = sorted(int(i) for i in indices)
    if idx != list(range(idx[0], idx[-1] + 1)):
        raise CorpusParseError(f"non-contiguous index list {indices}", line_no)
    if idx[0] < 0 or idx[-1] >= n:
        raise CorpusParseError(f"index list {indices} out of range for n={n}", line_no)
    return (idx[0], idx[-1])


def _parse_triplet_list(payload: str, n: int, line_no: int) -> tuple[GoldTriplet, ...]:
    try:
        raw = ast.literal_eval(payload.strip())
    except (ValueError, SyntaxError) as exc:
        raise CorpusParseError(f"unparseable triplet list: {exc}", line_no) from None
    if not isinstance(raw, list):
        raise CorpusParseError(f"triplet list is not a list: {payload!r}", line_no)
    triplets = []
    for entry in raw:
        if not (isinstance(entry, (tuple, list)) and len(entry) == 3):
            raise CorpusParseError(f"malformed triplet entry {entry!r}", line_no)
        a_idx, o_idx, label = entry
        aspect = _spans_from_indices(a_idx, n, line_no)
        opinion = _spans_from_indices(o_idx, n, line_no)
        if not isinstance(label, str):
            raise CorpusParseError(f"sentiment label {label!r} is not a string", line_no)
        try:
            triplet = GoldTriplet(aspect, opinion, Sentiment.from_label(label))
            triplet.validate(n)
        except CorpusParseError:
            raise
        except DataError as exc:
            raise CorpusParseError(str(exc), line_no) from None
        triplets.append(triplet)
    return tuple(triplets)


def parse_aste_file(text: str, id_prefix: str = "s") -> list[AnnotatedSentence]:
    """Parse corpus file contents into sentences with gold triplets.

    POS tags and heads stay empty until an annotation sidecar is merged in.
    Sentence ids are ``{id_prefix}-{k:04d}`` in file order.
    """
    sentences = []
    count = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if SEPARATOR not in line:
            raise CorpusParseError(f"missing {SEPARATOR!r} separator", line_no)
        left, _, right = line.partition(SEPARATOR)
        tokens = tuple(left.split())
        if not tokens:
            raise CorpusParseError("empty sentence before separator", line_no)
        sent = Sentence(id=f"{id_prefix}-{count:04d}", tokens=tokens)
        gold = _parse_triplet_list(right, len(tokens), line_no)
        sentences.append(AnnotatedSentence(sentence=sent, gold=gold))
        count += 1
    return sentences


def serialize_aste(sentences) -> str:
    """Inverse of parse_aste_file (up to whitespace and generated ids)."""
    lines = []
    for sent in sentences:
        entries = []
        for t in sent.gold:
            a = list(range(t.aspect[0], t.aspect[1] + 1))
            o = list(range(t.opinion[0], t.opinion[1] + 1))
            entries.append((a, o, t.sentiment.name))
        lines.append(" ".join(sent.tokens) + SEPARATOR + repr(entries))
    return "\n".join(lines) + "\n"


def load_corpus(path) -> list[AnnotatedSentence]:
    path = Path(path)
    return parse_aste_file(path.read_text(encoding="utf-8"), id_prefix=path.stem)


# --- annotation sidecar ---


def write_sidecar(path, records) -> None:
    """records: iterable of dicts {id, tokens, pos (raw tags), heads}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_sidecar(path) -> dict[str, dict]:
    records = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(f"bad sidecar record: {exc}", line_no) from None
            for key in ("id", "tokens", "pos", "heads"):
                if key not in rec:
                    raise CorpusParseError(f"sidecar record missing {key!r}", line_no)
            records[rec["id"]] = rec
    return records


def merge_annotations(sentences, sidecar: dict[str, dict]) -> list[AnnotatedSentence]:
    """Attach POS classes and head indices from sidecar records, matched by id.

    Sidecar tokens must be byte-identical to corpus tokens.
    """
    merged = []
    for sent in sentences:
        rec = sidecar.get(sent.id)
        if rec is None:
            raise AlignmentError(f"sentence {sent.id}: no sidecar record")
        if tuple(rec["tokens"]) != sent.tokens:
            raise AlignmentError(
                f"sentence {sent.id}: sidecar tokens differ from corpus tokens"
            )
        if len(rec["pos"]) != len(sent) or len(rec["heads"]) != len(sent):
            raise AlignmentError(
                f"sentence {sent.id}: sidecar has {len(rec['pos'])} tags / "
                f"{len(rec['heads'])} heads for {len(sent)} tokens"
            )
        out = replace(
            sent,
            pos=tuple(map_pos_tag(tag) for tag in rec["pos"]),
            heads=tuple(int(h) for h in rec["heads"]),
        )
        out.validate()
        merged.append(out)
    return merged


# --- dependency graph ---


@dataclass(frozen=True)
class DependencyGraph:
    adjacency: np.ndarray  # n x n, {0,1}, symmetric
    degree: np.ndarray  # n x n diagonal
    normalized: np.ndarray  # D^{-1/2} A D^{-1/2}

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]


def _check_acyclic(heads, n: int) -> None:
    # Walk parent pointers; every node must reach the root in <= n steps.
    for start in range(n):
        node, steps = start, 0
        while heads[node] != -1:
            node = heads[node]
            steps += 1
            if steps > n:
                raise GraphError(f"cycle among heads reachable from token {start}")


def build_dependency_graph(heads, n: int, self_loops: bool = True) -> DependencyGraph:
    """Undirected adjacency over dependency edges, with optional self-loops,
    plus its degree matrix and the symmetric normalization D^{-1/2} A D^{-1/2}.

    Without self-loops an isolated node has degree 0 and no valid
    normalization, hence the default.
    """
    if n <= 0:
        raise GraphError(f"n must be positive, got {n}")
    heads = list(heads)
    if len(heads) != n:
        raise GraphError(f"{len(heads)} heads for n={n}")
    roots = [i for i, h in enumerate(heads) if h == -1]
    if len(roots) != 1:
        raise GraphError(f"expected exactly one root, got {len(roots)}")
    for i, h in enumerate(heads):
        if h != -1 and not (0 <= h < n):
            raise GraphError(f"head {h} of token {i} out of range")
        if h == i:
            raise GraphError(f"token {i} is its own head")
    _check_acyclic(heads, n)

    adj = np.zeros((n, n), dtype=np.float64)
    for i, h in enumerate(heads):
        if h != -1:
            adj[i, h] = adj[h, i] = 1.0
    if self_loops:
        np.fill_diagonal(adj, 1.0)
    deg = adj.sum(axis=1)
    if np.any(deg == 0):
        raise GraphError("isolated node with zero degree (self_loops disabled)")
    inv_sqrt = 1.0 / np.sqrt(deg)
    normalized = adj * inv_sqrt[:, None] * inv_sqrt[None, :]
    return DependencyGraph(adjacency=adj, degree=np.diag(deg), normalized=normalized)


@dataclass(frozen=True)
class PredictionRecord:
    """One sentence worth of decoded triplets, as emitted by predict."""

    id: str
    triplets: tuple[GoldTriplet, ...] = ()
    error: str | None = None

    def to_json(self) -> str:
        if self.error is not None:
            return json.dumps({"id": self.id, "error": self.error})
        payload = {
            "id": self.id,
            "triplets": [
                {
                    "aspect": list(t.aspect),
                    "opinion": list(t.opinion),
                    "sentiment": t.sentiment.name,
                }
                for t in self.triplets
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, line: str) -> "PredictionRecord":
        rec = json.loads(line)
        if "error" in rec:
            return cls(id=rec["id"], error=rec["error"])
        triplets = tuple(
            GoldTriplet(
                tuple(t["aspect"]), tuple(t["opinion"]), Sentiment.from_label(t["sentiment"])
            )
            for t in rec["triplets"]
        )
        return cls(id=rec["id"], triplets=triplets)
