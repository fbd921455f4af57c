"""Exact-match triplet scoring.

A predicted triplet counts as a true positive iff its aspect span, opinion
span, and sentiment all equal a gold triplet of the same sentence; each gold
triplet matches at most once. Counts are micro-averaged over the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import GoldTriplet
from .errors import DataError


@dataclass(frozen=True)
class Metrics:
    tp: int
    n_pred: int
    n_gold: int

    @property
    def precision(self) -> float:
        return self.tp / self.n_pred if self.n_pred else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.n_gold if self.n_gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "n_pred": self.n_pred,
            "n_gold": self.n_gold,
        }


def _match_count(pred: Sequence[GoldTriplet], gold: Sequence[GoldTriplet]) -> int:
    remaining = list(gold)
    tp = 0
    for p in pred:
        if p in remaining:
            remaining.remove(p)
            tp += 1
    return tp


def score_corpus(
    pred: Mapping[str, Sequence[GoldTriplet]],
    gold: Mapping[str, Sequence[GoldTriplet]],
) -> Metrics:
    """Micro-averaged exact-match precision/recall/F1 over sentence ids."""
    if set(pred) != set(gold):
        missing = set(gold) ^ set(pred)
        raise DataError(f"prediction/gold sentence ids differ: {sorted(missing)[:5]}")
    tp = n_pred = n_gold = 0
    for sid in gold:
        tp += _match_count(pred[sid], gold[sid])
        n_pred += len(pred[sid])
        n_gold += len(gold[sid])
    return Metrics(tp=tp, n_pred=n_pred, n_gold=n_gold)


def macro_scores(
    pred: Mapping[str, Sequence[GoldTriplet]],
    gold: Mapping[str, Sequence[GoldTriplet]],
) -> dict:
    """Per-sentence P/R/F1 averaged uniformly over sentences."""
    if set(pred) != set(gold):
        raise DataError("prediction/gold sentence ids differ")
    per = [Metrics(_match_count(pred[s], gold[s]), len(pred[s]), len(gold[s])) for s in gold]
    if not per:
        raise DataError("empty corpus")
    return {
        "precision": sum(m.precision for m in per) / len(per),
        "recall": sum(m.recall for m in per) / len(per),
        "f1": sum(m.f1 for m in per) / len(per),
        "sentences": len(per),
    }
