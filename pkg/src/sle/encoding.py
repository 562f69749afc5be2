"""Encode crowd annotations as opinions and aggregate them per item.

Each annotation carries an optional confidence c and reliability r. The
annotation becomes an opinion with uncertainty u = 1 - c and belief
b = (1 - u) * y_tilde, is discounted by r, and the per-item target is the
cumulative fusion of the discounted opinions in annotator-id order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .opinions import (
    ADDITIVITY_TOL,
    ConstraintError,
    Opinion,
    fuse_many,
    opinion_new,
    smooth,
    trust_discount,
    uniform_base_rate,
)

__all__ = [
    "AnnotationRecord",
    "EncodedTarget",
    "DEFAULT_EPSILON",
    "encode_annotation",
    "build_sle",
    "label_vector",
]

DEFAULT_EPSILON = 1e-3

# Threshold below which a discounted opinion is treated as dogmatic and
# smoothed before fusion.
_DOGMATIC_U = 1e-12


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's judgment on one item, with optional metadata."""

    item_id: Union[int, str]
    annotator_id: Union[int, str]
    label: Union[int, Sequence[float], np.ndarray]
    confidence: Optional[float] = None
    reliability: Optional[float] = None

    def __post_init__(self):
        for name in ("confidence", "reliability"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= float(v) <= 1.0):
                raise ConstraintError(f"{name} must lie in [0, 1]: {v}")


@dataclass(frozen=True)
class EncodedTarget:
    """The fused per-item opinion and the annotators that produced it."""

    item_id: Union[int, str]
    opinion: Opinion
    contributing_annotators: tuple = field(default_factory=tuple)


def label_vector(label, k: int) -> np.ndarray:
    """Turn a class index or probability vector into a length-k vector."""
    if np.isscalar(label) and not isinstance(label, (list, tuple, np.ndarray)):
        idx = int(label)
        if not 0 <= idx < k:
            raise ConstraintError(f"label index {idx} out of range for K={k}")
        y = np.zeros(k)
        y[idx] = 1.0
        return y
    y = np.asarray(label, dtype=np.float64)
    if y.shape != (k,):
        raise ConstraintError(f"label vector has shape {y.shape}, expected ({k},)")
    if np.any(y < -ADDITIVITY_TOL) or abs(y.sum() - 1.0) > ADDITIVITY_TOL:
        raise ConstraintError(
            f"label vector must be a probability vector (sum {y.sum():.12g})"
        )
    return np.maximum(y, 0.0)


def encode_annotation(
    record: AnnotationRecord,
    k: int,
    confidence_map: Callable[[float], float] = None,
) -> Opinion:
    """Encode a single annotation as an opinion with a uniform base rate.

    Missing confidence means full confidence (u = 0, a dogmatic opinion).
    confidence_map overrides the default u = 1 - c mapping; it must return
    a value in [0, 1].
    """
    y = label_vector(record.label, k)
    c = 1.0 if record.confidence is None else float(record.confidence)
    u = (1.0 - c) if confidence_map is None else float(confidence_map(c))
    if not 0.0 <= u <= 1.0:
        raise ConstraintError(f"confidence map produced u = {u} outside [0, 1]")
    b = y - u * y
    return opinion_new(b, 1.0 - float(b.sum()), uniform_base_rate(k))


def build_sle(
    records: Sequence[AnnotationRecord],
    k: int,
    epsilon: float = DEFAULT_EPSILON,
    confidence_map: Callable[[float], float] = None,
) -> EncodedTarget:
    """Fuse one item's annotations into a single target opinion.

    Each record is encoded, trust-discounted by its reliability (missing
    reliability means full trust), smoothed with epsilon if dogmatic, and
    the results are fused left-to-right in ascending annotator-id order.
    """
    records = list(records)
    if not records:
        raise ConstraintError("build_sle requires at least one annotation")
    item_ids = {r.item_id for r in records}
    if len(item_ids) != 1:
        raise ConstraintError(f"records span multiple items: {sorted(map(str, item_ids))}")
    ordered = sorted(records, key=lambda r: r.annotator_id)
    opinions = []
    for rec in ordered:
        op = encode_annotation(rec, k, confidence_map=confidence_map)
        r = 1.0 if rec.reliability is None else float(rec.reliability)
        op = trust_discount(op, r)
        if op.uncertainty <= _DOGMATIC_U:
            op = smooth(op, epsilon)
        opinions.append(op)
    fused = fuse_many(opinions)
    return EncodedTarget(
        item_id=records[0].item_id,
        opinion=fused,
        contributing_annotators=tuple(r.annotator_id for r in ordered),
    )
