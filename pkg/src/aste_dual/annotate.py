"""Pluggable linguistic annotation backends.

A backend turns a pre-tokenized sentence into raw universal POS tags and
0-based dependency-head indices (root = -1). The built-in backend wraps
spaCy in pre-tokenized mode; tests and other integrations can register their
own with ``register_backend``.
"""

from __future__ import annotations

from typing import Callable, Protocol

from .errors import AnnotatorError


class Annotator(Protocol):
    def annotate(self, tokens: list[str]) -> tuple[list[str], list[int]]:
        """Return (raw POS tags, head indices) aligned to ``tokens``."""
        ...


class SpacyAnnotator:
    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy
        except ImportError as exc:
            raise AnnotatorError(
                "the spacy backend needs the 'spacy' package (pip install aste-dual[spacy])"
            ) from exc
        try:
            self._nlp = spacy.load(model)
        except OSError as exc:
            raise AnnotatorError(f"cannot load spaCy model {model!r}: {exc}") from exc
        self._make_doc = spacy.tokens.Doc

    def annotate(self, tokens: list[str]) -> tuple[list[str], list[int]]:
        doc = self._make_doc(self._nlp.vocab, words=list(tokens))
        for _, proc in self._nlp.pipeline:
            doc = proc(doc)
        if len(doc) != len(tokens):
            raise AnnotatorError(
                f"backend retokenized the sentence ({len(doc)} != {len(tokens)} tokens)"
            )
        pos = [t.pos_ for t in doc]
        heads = [t.head.i if t.head.i != t.i else -1 for t in doc]
        # multi-sentence parses give several roots; keep the first and attach
        # the rest to it so the result is a single tree
        roots = [i for i, h in enumerate(heads) if h == -1]
        for extra in roots[1:]:
            heads[extra] = roots[0]
        return pos, heads


_BACKENDS: dict[str, Callable[[], Annotator]] = {"spacy": SpacyAnnotator}


def register_backend(name: str, factory: Callable[[], Annotator]) -> None:
    _BACKENDS[name] = factory


def get_backend(name: str) -> Annotator:
    factory = _BACKENDS.get(name)
    if factory is None:
        raise AnnotatorError(
            f"unknown annotation backend {name!r}; available: {sorted(_BACKENDS)}"
        )
    return factory()


def annotate_corpus(sentences, annotator: Annotator) -> list[dict]:
    """One sidecar record per sentence, token-aligned to the corpus."""
    records = []
    for sent in sentences:
        pos, heads = annotator.annotate(list(sent.tokens))
        if len(pos) != len(sent) or len(heads) != len(sent):
            raise AnnotatorError(
                f"sentence {sent.id}: backend returned {len(pos)} tags / "
                f"{len(heads)} heads for {len(sent)} tokens"
            )
        records.append(
            {"id": sent.id, "tokens": list(sent.tokens), "pos": pos, "heads": heads}
        )
    return records
