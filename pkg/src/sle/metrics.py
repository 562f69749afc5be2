"""Hard and soft evaluation metrics, plus label extraction from opinions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .opinions import (
    ConstraintError,
    Opinion,
    dirichlet_mode,
    to_dirichlet,
)

__all__ = [
    "MetricReport",
    "NES_VARIANT",
    "predict_label",
    "micro_f1",
    "jsd",
    "nes",
    "entropy_bits",
]

# How NES is computed; logged in every report so an alternative definition
# (e.g. an entropy ratio) can be swapped in and told apart downstream.
NES_VARIANT = "entropy_gap"


@dataclass(frozen=True)
class MetricReport:
    """Per-method metric results for one sweep point."""

    method: str
    f1: float
    jsd: float
    nes: float
    n_items: int
    sweep_point: str
    nes_variant: str = NES_VARIANT

    def __post_init__(self):
        for name in ("f1", "jsd", "nes"):
            v = getattr(self, name)
            if not (-1e-9 <= v <= 1.0 + 1e-9):
                raise ConstraintError(f"{name} = {v} outside [0, 1]")


def predict_label(op: Opinion) -> int:
    """Class prediction: argmax of the Dirichlet mode of the opinion.

    Dogmatic opinions are classified by their belief vector directly.
    Ties resolve to the lowest index.
    """
    if op.uncertainty <= 0.0:
        return int(np.argmax(op.belief))
    return int(np.argmax(dirichlet_mode(to_dirichlet(op))))


def micro_f1(predictions, truths) -> float:
    """Micro-averaged F1, which for single-label multiclass is accuracy."""
    preds = np.asarray(predictions)
    true = np.asarray(truths)
    if preds.shape != true.shape:
        raise ConstraintError(
            f"length mismatch: {preds.shape} predictions vs {true.shape} truths"
        )
    if preds.size == 0:
        raise ConstraintError("micro_f1 requires at least one prediction")
    return float(np.mean(preds == true))


def _check_dist(p, name: str) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or np.any(v < -1e-9) or abs(v.sum() - 1.0) > 1e-6:
        raise ConstraintError(f"{name} is not a probability vector: {v}")
    return np.maximum(v, 0.0)


def entropy_bits(p) -> float:
    """Shannon entropy in bits, with 0 * log 0 = 0."""
    p = _check_dist(p, "p")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def jsd(p, q) -> float:
    """Jensen-Shannon divergence, base-2 logs, so the range is [0, 1]."""
    p = _check_dist(p, "p")
    q = _check_dist(q, "q")
    if p.size != q.size:
        raise ConstraintError(f"dimension mismatch: {p.size} vs {q.size}")
    m = 0.5 * (p + q)
    val = entropy_bits(m) - 0.5 * entropy_bits(p) - 0.5 * entropy_bits(q)
    return float(min(max(val, 0.0), 1.0))


def nes(p, q) -> float:
    """Normalized entropy similarity: 1 - |H(p) - H(q)| / log2(K)."""
    p = _check_dist(p, "p")
    q = _check_dist(q, "q")
    if p.size != q.size:
        raise ConstraintError(f"dimension mismatch: {p.size} vs {q.size}")
    gap = abs(entropy_bits(p) - entropy_bits(q)) / np.log2(p.size)
    return float(min(max(1.0 - gap, 0.0), 1.0))
