"""Synthetic crowd-annotation generator.

True labels are evenly spaced points on the probability simplex. Each of
M annotators draws a confidence c and a reliability r from Beta
distributions once per run, then corrupts every true label: the label is
permuted with probability 1 - r and temperature-smoothed towards uniform
according to c. The whole process is deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .encoding import AnnotationRecord
from .opinions import ConstraintError

__all__ = [
    "SyntheticConfig",
    "SyntheticDataset",
    "simplex_grid",
    "sample_profile",
    "permute_label",
    "recalibrate",
    "generate",
]

_CLAMP = 1e-12


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the annotation generative process."""

    k: int = 5
    m: int = 10
    grid_resolution: int = 6
    confidence_beta: Tuple[float, float] = (10.0, 0.0)
    reliability_beta: Tuple[float, float] = (10.0, 0.0)
    seed: int = 0
    runs: int = 10
    # Flip to permute with probability r instead of 1 - r (the literal
    # reading of the generative pseudo-code; not the default semantics).
    permute_literal: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ConstraintError(f"need K >= 2 classes, got {self.k}")
        if self.m < 1:
            raise ConstraintError(f"need M >= 1 annotators, got {self.m}")
        if self.grid_resolution < 1:
            raise ConstraintError(
                f"grid_resolution must be >= 1, got {self.grid_resolution}"
            )
        if self.runs < 1:
            raise ConstraintError(f"runs must be >= 1, got {self.runs}")
        for name in ("confidence_beta", "reliability_beta"):
            a, b = getattr(self, name)
            if a < 0 or b < 0:
                raise ConstraintError(f"{name} parameters must be >= 0: ({a}, {b})")
            if a == 0 and b == 0:
                raise ConstraintError(f"{name} = (0, 0) is degenerate in both parameters")


@dataclass(frozen=True)
class SyntheticDataset:
    """True labels, corrupted annotations, and the annotator profiles."""

    true_labels: np.ndarray
    annotations: List[AnnotationRecord]
    annotator_profiles: List[Tuple[float, float]]
    config: SyntheticConfig


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def simplex_grid(k: int, resolution: int) -> np.ndarray:
    """Evenly spaced points on the (k-1)-simplex.

    Enumerates all compositions of `resolution` into k non-negative
    integers and divides by `resolution`; there are
    C(resolution + k - 1, k - 1) points, in lexicographic order.
    """
    if resolution < 1:
        raise ConstraintError(f"resolution must be >= 1, got {resolution}")
    points = np.array(list(_compositions(resolution, k)), dtype=np.float64)
    return points / resolution


def _beta_draw(a: float, b: float, rng: np.random.Generator) -> float:
    # Beta(x, 0) is taken as the point mass at 1 (no uncertainty at all);
    # Beta(0, x) symmetrically as the point mass at 0.
    if a == 0 and b == 0:
        raise ConstraintError("Beta(0, 0) is degenerate in both parameters")
    if b == 0:
        return 1.0
    if a == 0:
        return 0.0
    return float(rng.beta(a, b))


def sample_profile(confidence_beta, reliability_beta, rng: np.random.Generator):
    """Draw one annotator's (confidence, reliability) pair."""
    c = _beta_draw(confidence_beta[0], confidence_beta[1], rng)
    r = _beta_draw(reliability_beta[0], reliability_beta[1], rng)
    return c, r


def permute_label(y: np.ndarray, r: float, rng: np.random.Generator,
                  literal: bool = False) -> np.ndarray:
    """Corrupt a label by shuffling its components, with probability 1 - r.

    With literal=True the probability is r instead. A draw is consumed on
    every call so the stream stays aligned regardless of the outcome.
    """
    y = np.asarray(y, dtype=np.float64)
    p_permute = float(r) if literal else 1.0 - float(r)
    if rng.random() < p_permute:
        return y[rng.permutation(y.size)]
    return y.copy()


def recalibrate(y: np.ndarray, c: float) -> np.ndarray:
    """Temperature-smooth a probability vector according to confidence c.

    Computes y_k^c renormalized: the identity at c = 1 and the uniform
    vector at c = 0 (both returned exactly). Zero components are clamped
    to 1e-12 before exponentiation.
    """
    y = np.asarray(y, dtype=np.float64)
    c = float(c)
    if c == 1.0:
        return y.copy()
    if c == 0.0:
        return np.full(y.size, 1.0 / y.size)
    w = np.exp(np.log(np.maximum(y, _CLAMP)) * c)
    return w / w.sum()


def generate(config: SyntheticConfig) -> SyntheticDataset:
    """Run the generative process once for the configured seed.

    Per-annotator RNG streams are spawned from the seed, so annotators
    could be generated in parallel without changing the output.
    """
    grid = simplex_grid(config.k, config.grid_resolution)
    streams = np.random.SeedSequence(config.seed).spawn(config.m)
    profiles = []
    annotations = []
    for m, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        c, r = sample_profile(config.confidence_beta, config.reliability_beta, rng)
        profiles.append((c, r))
        for i, y in enumerate(grid):
            label = recalibrate(
                permute_label(y, r, rng, literal=config.permute_literal), c
            )
            annotations.append(
                AnnotationRecord(
                    item_id=i, annotator_id=m, label=label,
                    confidence=c, reliability=r,
                )
            )
    return SyntheticDataset(
        true_labels=grid,
        annotations=annotations,
        annotator_profiles=profiles,
        config=config,
    )
