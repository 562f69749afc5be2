"""Subjective logic opinion algebra.

An opinion over K classes is a triple (b, u, a): a belief vector b, an
uncertainty mass u with u + sum(b) = 1, and a base rate (prior) vector a.
Opinions with u > 0 are in bijection with Dirichlet distributions via

    alpha = 2 * b / u + K * a

All operations here are pure functions on immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

ADDITIVITY_TOL = 1e-9

__all__ = [
    "ADDITIVITY_TOL",
    "ConstraintError",
    "DogmaticOpinionError",
    "DegenerateFusionError",
    "Opinion",
    "DirichletParams",
    "ReliabilityScore",
    "opinion_new",
    "uniform_base_rate",
    "vacuous_opinion",
    "to_dirichlet",
    "from_dirichlet",
    "project_probability",
    "cumulative_fuse",
    "fuse_many",
    "trust_discount",
    "smooth",
    "dirichlet_kl",
    "dirichlet_mode",
    "lgamma",
    "digamma",
    "trigamma",
]


class ConstraintError(ValueError):
    """A value violates one of the structural invariants of the algebra."""


class DogmaticOpinionError(ConstraintError):
    """An operation requiring u > 0 received a dogmatic (u = 0) opinion."""


class DegenerateFusionError(ConstraintError):
    """Cumulative fusion of two dogmatic opinions: the denominator vanishes."""


def _as_prob_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ConstraintError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ConstraintError(f"{name} contains non-finite entries: {v}")
    return v


def _freeze(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class Opinion:
    """A subjective opinion (b, u, a) over K >= 2 classes."""

    belief: np.ndarray
    uncertainty: float
    base_rate: np.ndarray

    def __post_init__(self):
        b = _as_prob_vector(self.belief, "belief")
        a = _as_prob_vector(self.base_rate, "base_rate")
        u = float(self.uncertainty)
        if b.shape != a.shape:
            raise ConstraintError(
                f"belief and base_rate must share K: {b.shape} vs {a.shape}"
            )
        if b.size < 2:
            raise ConstraintError(f"opinions need K >= 2 classes, got K={b.size}")
        if not math.isfinite(u):
            raise ConstraintError(f"uncertainty is not finite: {u}")
        if np.any(b < -ADDITIVITY_TOL) or np.any(b > 1 + ADDITIVITY_TOL):
            raise ConstraintError(f"belief components must lie in [0, 1]: {b}")
        if u < -ADDITIVITY_TOL or u > 1 + ADDITIVITY_TOL:
            raise ConstraintError(f"uncertainty must lie in [0, 1]: {u}")
        residual = u + float(b.sum()) - 1.0
        if abs(residual) > ADDITIVITY_TOL:
            raise ConstraintError(
                f"additivity violated: u + sum(b) = {u + b.sum():.12g} "
                f"(residual {residual:.3g} exceeds {ADDITIVITY_TOL})"
            )
        if np.any(a < -ADDITIVITY_TOL) or abs(a.sum() - 1.0) > ADDITIVITY_TOL:
            raise ConstraintError(
                f"base_rate must be a probability vector (sum {a.sum():.12g})"
            )
        object.__setattr__(self, "belief", _freeze(b))
        object.__setattr__(self, "base_rate", _freeze(a))
        object.__setattr__(self, "uncertainty", u)

    @property
    def k(self) -> int:
        return self.belief.size

    @property
    def is_dogmatic(self) -> bool:
        return self.uncertainty == 0.0

    @property
    def is_vacuous(self) -> bool:
        return self.uncertainty == 1.0


@dataclass(frozen=True)
class DirichletParams:
    """Concentration parameters of a Dirichlet distribution."""

    alpha: np.ndarray

    def __post_init__(self):
        a = _as_prob_vector(self.alpha, "alpha")
        if a.size < 2:
            raise ConstraintError(f"Dirichlet needs K >= 2, got K={a.size}")
        if np.any(a <= 0):
            raise ConstraintError(f"all concentration parameters must be > 0: {a}")
        object.__setattr__(self, "alpha", _freeze(a))

    @property
    def k(self) -> int:
        return self.alpha.size

    @property
    def total(self) -> float:
        return float(self.alpha.sum())


@dataclass(frozen=True)
class ReliabilityScore:
    """Scalar trust in an information source, in [0, 1]."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (math.isfinite(v) and 0.0 <= v <= 1.0):
            raise ConstraintError(f"reliability must lie in [0, 1]: {v}")
        object.__setattr__(self, "value", v)


def uniform_base_rate(k: int) -> np.ndarray:
    """Uniform prior over k classes."""
    return np.full(k, 1.0 / k)


def opinion_new(belief, uncertainty, base_rate) -> Opinion:
    """Construct and validate an opinion."""
    return Opinion(np.asarray(belief, dtype=np.float64), float(uncertainty),
                   np.asarray(base_rate, dtype=np.float64))


def vacuous_opinion(k: int, base_rate=None) -> Opinion:
    """The totally uncertain opinion: zero belief, u = 1."""
    a = uniform_base_rate(k) if base_rate is None else base_rate
    return Opinion(np.zeros(k), 1.0, np.asarray(a, dtype=np.float64))


def to_dirichlet(op: Opinion) -> DirichletParams:
    """Map an opinion to its Dirichlet parameters: alpha = 2b/u + K*a.

    Requires u > 0; dogmatic opinions must be smoothed first.
    """
    if op.uncertainty <= 0.0:
        raise DogmaticOpinionError(
            "cannot map a dogmatic opinion (u = 0) to Dirichlet parameters; "
            "apply smooth() first"
        )
    alpha = 2.0 * op.belief / op.uncertainty + op.k * op.base_rate
    return DirichletParams(alpha)


def from_dirichlet(params: DirichletParams, base_rate=None) -> Opinion:
    """Invert the opinion -> Dirichlet mapping.

    Requires alpha_k >= K * a_k for all k so the implied beliefs are
    non-negative.
    """
    k = params.k
    a = uniform_base_rate(k) if base_rate is None else _as_prob_vector(base_rate, "base_rate")
    alpha = params.alpha
    evidence = alpha - k * a
    if np.any(evidence < -ADDITIVITY_TOL):
        bad = int(np.argmin(evidence))
        raise ConstraintError(
            f"alpha[{bad}] = {alpha[bad]:.6g} < K*a[{bad}] = {k * a[bad]:.6g}: "
            "implied belief would be negative"
        )
    evidence = np.maximum(evidence, 0.0)
    u = 2.0 / (float(alpha.sum()) - k + 2.0)
    b = u * evidence / 2.0
    return Opinion(b, 1.0 - float(b.sum()), a)


def project_probability(op: Opinion) -> np.ndarray:
    """Projected (expected) probability of an opinion: P = b + u * a."""
    return op.belief + op.uncertainty * op.base_rate


def _fused_base_rate(left: Opinion, right: Opinion) -> np.ndarray:
    # Equal base rates (the only case this artifact uses) fuse to themselves
    # exactly; the general formula is kept for completeness.
    if np.array_equal(left.base_rate, right.base_rate):
        return left.base_rate
    um, uq = left.uncertainty, right.uncertainty
    denom = um + uq - 2.0 * um * uq
    if denom <= 0.0:
        # both vacuous: no evidence either way, keep the left prior
        return left.base_rate
    num = (left.base_rate * uq + right.base_rate * um
           - (left.base_rate + right.base_rate) * um * uq)
    return num / denom


def cumulative_fuse(left: Opinion, right: Opinion) -> Opinion:
    """Cumulative belief fusion of two opinions on the same frame.

    Treats the operands as independent bodies of evidence; the fused
    uncertainty never exceeds either operand's.
    """
    if left.k != right.k:
        raise ConstraintError(f"frame mismatch: K={left.k} vs K={right.k}")
    um, uq = left.uncertainty, right.uncertainty
    denom = um + uq - um * uq
    if denom <= 0.0:
        raise DegenerateFusionError(
            "cumulative fusion of two dogmatic opinions is undefined "
            "(denominator u_m + u_q - u_m*u_q = 0); smooth the operands first"
        )
    b = (left.belief * uq + right.belief * um) / denom
    u = um * uq / denom
    a = _fused_base_rate(left, right)
    return Opinion(b, u, a)


def fuse_many(opinions) -> Opinion:
    """Left-fold of cumulative fusion over an ordered sequence of opinions."""
    ops = list(opinions)
    if not ops:
        raise ConstraintError("cannot fuse an empty sequence of opinions")
    fused = ops[0]
    for op in ops[1:]:
        fused = cumulative_fuse(fused, op)
    return fused


def trust_discount(op: Opinion, trust) -> Opinion:
    """Discount an opinion by the trust placed in its source.

    Beliefs are scaled by the trust probability and the freed mass moves
    to uncertainty; the base rate is unchanged.
    """
    t = trust.value if isinstance(trust, ReliabilityScore) else ReliabilityScore(float(trust)).value
    b = t * op.belief
    u = 1.0 - t * float(op.belief.sum())
    return Opinion(b, u, op.base_rate)


def smooth(op: Opinion, epsilon: float) -> Opinion:
    """Move a small amount of belief mass to uncertainty.

    The mass epsilon is removed proportionally from the nonzero belief
    components, so b_k -> b_k * (1 - eps / sum(b)) and u -> u + eps.
    Requires 0 < epsilon < sum(b).
    """
    eps = float(epsilon)
    total = float(op.belief.sum())
    if not (0.0 < eps < total):
        raise ConstraintError(
            f"epsilon must satisfy 0 < epsilon < sum(belief) = {total:.6g}, "
            f"got {eps:.6g}"
        )
    b = op.belief * (1.0 - eps / total)
    return Opinion(b, op.uncertainty + eps, op.base_rate)


def lgamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if not (x > 0):
        raise ConstraintError(f"lgamma requires x > 0, got {x}")
    return float(special.gammaln(x))


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function for x > 0."""
    if not (x > 0):
        raise ConstraintError(f"digamma requires x > 0, got {x}")
    return float(special.psi(x))


def trigamma(x: float) -> float:
    """Second derivative of lgamma for x > 0."""
    if not (x > 0):
        raise ConstraintError(f"trigamma requires x > 0, got {x}")
    return float(special.polygamma(1, x))


def dirichlet_kl(p: DirichletParams, q: DirichletParams) -> float:
    """KL divergence D(Dir(p) || Dir(q)) in closed form."""
    if p.k != q.k:
        raise ConstraintError(f"dimension mismatch: K={p.k} vs K={q.k}")
    pa, qa = p.alpha, q.alpha
    p0, q0 = pa.sum(), qa.sum()
    kl = (special.gammaln(p0) - special.gammaln(pa).sum()
          - special.gammaln(q0) + special.gammaln(qa).sum()
          + ((pa - qa) * (special.psi(pa) - special.psi(p0))).sum())
    return max(float(kl), 0.0)


def dirichlet_mode(params: DirichletParams) -> np.ndarray:
    """Mode of a Dirichlet, falling back to the mean when no interior mode.

    The mode (alpha_k - 1) / (alpha_0 - K) only exists when every
    alpha_k > 1; otherwise the mean alpha_k / alpha_0 is returned.
    """
    alpha = params.alpha
    if np.all(alpha > 1.0):
        return (alpha - 1.0) / (alpha.sum() - params.k)
    return alpha / alpha.sum()
