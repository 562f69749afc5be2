"""Baseline label aggregation: majority vote, soft vote, reliability filtering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .encoding import AnnotationRecord, label_vector
from .opinions import ConstraintError

__all__ = [
    "AggregationMethod",
    "majority_vote",
    "soft_vote",
    "filter_by_reliability",
]

METHOD_VARIANTS = ("majority_vote", "soft_vote", "sle_fusion")


@dataclass(frozen=True)
class AggregationMethod:
    """Named aggregation strategy with an optional reliability filter."""

    variant: str
    filter_threshold: Optional[float] = None

    def __post_init__(self):
        if self.variant not in METHOD_VARIANTS:
            raise ConstraintError(
                f"unknown aggregation variant {self.variant!r}; "
                f"expected one of {METHOD_VARIANTS}"
            )
        t = self.filter_threshold
        if t is not None and not (0.0 <= float(t) <= 1.0):
            raise ConstraintError(f"filter_threshold must lie in [0, 1]: {t}")


def majority_vote(records: Sequence[AnnotationRecord], k: int,
                  rng: np.random.Generator) -> np.ndarray:
    """One-hot vector of the modal class among the annotations.

    Probabilistic labels are hardened by argmax before counting. Ties are
    broken uniformly at random among the tied classes using `rng`.
    """
    records = list(records)
    if not records:
        raise ConstraintError("majority_vote requires at least one annotation")
    counts = np.zeros(k)
    for rec in records:
        counts[int(np.argmax(label_vector(rec.label, k)))] += 1
    tied = np.flatnonzero(counts == counts.max())
    winner = int(tied[0]) if tied.size == 1 else int(rng.choice(tied))
    out = np.zeros(k)
    out[winner] = 1.0
    return out


def soft_vote(records: Sequence[AnnotationRecord], k: int) -> np.ndarray:
    """Mean of the annotation label vectors (label frequencies)."""
    records = list(records)
    if not records:
        raise ConstraintError("soft_vote requires at least one annotation")
    return np.mean([label_vector(rec.label, k) for rec in records], axis=0)


def filter_by_reliability(records: Sequence[AnnotationRecord],
                          threshold: float) -> List[AnnotationRecord]:
    """Keep annotations with reliability >= threshold.

    Missing reliability counts as 1. If filtering would leave an item with
    no annotations, its single most reliable record is kept instead, so no
    item ever loses all of its annotations.
    """
    if not (0.0 <= float(threshold) <= 1.0):
        raise ConstraintError(f"threshold must lie in [0, 1]: {threshold}")

    def rel(rec):
        return 1.0 if rec.reliability is None else float(rec.reliability)

    by_item: dict = {}
    order: list = []
    for rec in records:
        if rec.item_id not in by_item:
            order.append(rec.item_id)
        by_item.setdefault(rec.item_id, []).append(rec)
    kept: List[AnnotationRecord] = []
    for item in order:
        group = by_item[item]
        passing = [rec for rec in group if rel(rec) >= threshold]
        if not passing:
            passing = [max(group, key=rel)]
        kept.extend(passing)
    return kept
