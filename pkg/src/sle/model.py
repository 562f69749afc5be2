"""A small classifier that predicts opinions, trained by distribution matching.

The network is a stack of affine layers with tanh between them; the final
layer has width K + 1 and a softmax over it yields the belief vector (first
K entries) and the uncertainty mass (last entry), so the opinion additivity
constraint holds by construction. Targets are Dirichlets, and training
minimizes cross entropy on projected probabilities or the forward/reverse
KL divergence between target and predicted Dirichlets, with exact analytic
gradients (the KL gradients need digamma and trigamma).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .opinions import (
    ConstraintError,
    DogmaticOpinionError,
    Opinion,
    dirichlet_kl,
    opinion_new,
    project_probability,
    smooth,
    to_dirichlet,
    uniform_base_rate,
)

__all__ = [
    "NumericalError",
    "ModelParams",
    "TrainConfig",
    "TrainResult",
    "LOSSES",
    "init_params",
    "forward",
    "loss_cross_entropy",
    "loss_forward_kl",
    "loss_reverse_kl",
    "batch_loss",
    "grad",
    "train",
    "targets_to_alphas",
    "targets_to_probs",
    "predict_opinions",
    "save_model",
    "load_model",
]

LOSSES = ("cross_entropy", "forward_kl", "reverse_kl")
_CLAMP = 1e-12
# Floor on the predicted uncertainty inside the KL losses: both divergences
# push u towards 0 on sharp targets, and 2b/u overflows without it.
_U_FLOOR = 1e-6
MODEL_FORMAT_VERSION = 1


class NumericalError(RuntimeError):
    """A loss or gradient became non-finite."""


@dataclass
class ModelParams:
    """Weights and biases of the affine stack; output width is K + 1."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise ConstraintError("weights and biases must be non-empty and paired")
        for w, b in zip(self.weights, self.biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ConstraintError("parameters must be finite")
            if w.shape[1] != b.shape[0]:
                raise ConstraintError(f"shape mismatch: {w.shape} vs {b.shape}")
        if self.weights[-1].shape[1] < 3:
            raise ConstraintError("output width must be K + 1 >= 3")

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1] - 1

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights],
                           [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.weights + self.biases])


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for minibatch gradient descent."""

    loss: str = "reverse_kl"
    learning_rate: float = 1e-2
    epochs: int = 100
    batch_size: int = 32
    epsilon_smooth: float = 1e-3
    seed: int = 0
    hidden: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConstraintError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if self.learning_rate <= 0:
            raise ConstraintError(f"learning_rate must be > 0: {self.learning_rate}")
        if self.loss != "cross_entropy" and self.epsilon_smooth <= 0:
            raise ConstraintError("KL losses require epsilon_smooth > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConstraintError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainResult:
    """Final parameters plus the per-epoch mean loss trace."""

    params: ModelParams
    loss_trace: List[float]
    clamp_events: int = 0


def init_params(n_features: int, k: int, hidden: Sequence[int] = (),
                seed: int = 0) -> ModelParams:
    """Small random initialization of an affine stack ending at width k + 1."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x1717)))
    sizes = [n_features, *hidden, k + 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = 1.0 / np.sqrt(fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases)


def _forward_batch(x: np.ndarray, params: ModelParams):
    """Return hidden activations and the softmax output (n, K + 1)."""
    acts = [x]
    a = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.tanh(a @ w + b)
        acts.append(a)
    logits = a @ params.weights[-1] + params.biases[-1]
    logits = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(logits)
    s = ez / ez.sum(axis=1, keepdims=True)
    return acts, s


def forward(x, params: ModelParams) -> Opinion:
    """Map one feature vector to a predicted opinion (uniform base rate)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.n_features:
        raise ConstraintError(
            f"feature vector has shape {x.shape}, expected ({params.n_features},)"
        )
    _, s = _forward_batch(x[None, :], params)
    k = params.n_classes
    b = s[0, :k]
    return opinion_new(b, 1.0 - float(b.sum()), uniform_base_rate(k))


# ---------------------------------------------------------------------------
# Loss functions on opinion pairs (the per-sample contracts).
# ---------------------------------------------------------------------------

def loss_cross_entropy(target, predicted: Opinion) -> float:
    """Cross entropy between a target distribution and the projected prediction.

    Predicted probabilities are clamped at 1e-12 where the target has
    support; for one-hot targets this is the negative log-likelihood.
    """
    t = np.asarray(target, dtype=np.float64)
    p = np.maximum(project_probability(predicted), _CLAMP)
    return float(-(t * np.log(p)).sum())


def loss_forward_kl(target: Opinion, predicted: Opinion) -> float:
    """KL(target || predicted) between the corresponding Dirichlets."""
    return dirichlet_kl(to_dirichlet(target), to_dirichlet(predicted))


def loss_reverse_kl(target: Opinion, predicted: Opinion) -> float:
    """KL(predicted || target): the arguments of the forward loss, swapped."""
    return dirichlet_kl(to_dirichlet(predicted), to_dirichlet(target))


# ---------------------------------------------------------------------------
# Batched losses and analytic gradients.
# ---------------------------------------------------------------------------

def targets_to_alphas(targets: Sequence[Opinion], epsilon: float) -> np.ndarray:
    """Dirichlet parameters of target opinions, smoothing dogmatic ones."""
    alphas = []
    for op in targets:
        if op.uncertainty <= 0.0:
            op = smooth(op, epsilon)
        alphas.append(to_dirichlet(op).alpha)
    return np.asarray(alphas)


def targets_to_probs(targets) -> np.ndarray:
    """Probability-vector targets: opinions are projected, vectors pass through."""
    rows = []
    for t in targets:
        rows.append(project_probability(t) if isinstance(t, Opinion) else
                    np.asarray(t, dtype=np.float64))
    return np.asarray(rows)


def _dirichlet_kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p0 = p.sum(axis=1, keepdims=True)
    q0 = q.sum(axis=1, keepdims=True)
    return (special.gammaln(p0[:, 0]) - special.gammaln(p).sum(axis=1)
            - special.gammaln(q0[:, 0]) + special.gammaln(q).sum(axis=1)
            + ((p - q) * (special.psi(p) - special.psi(p0))).sum(axis=1))


def _loss_and_output_grad(s: np.ndarray, targets: np.ndarray, loss: str, k: int):
    """Per-batch mean loss and its gradient w.r.t. the softmax output s."""
    n = s.shape[0]
    b = s[:, :k]
    u = s[:, k]
    if loss == "cross_entropy":
        p = b + u[:, None] / k
        clamped = p < _CLAMP
        pc = np.maximum(p, _CLAMP)
        value = float(-(targets * np.log(pc)).sum() / n)
        dp = np.where(clamped, 0.0, -targets / pc) / n
        ds = np.concatenate([dp, dp.sum(axis=1, keepdims=True) / k], axis=1)
        return value, ds, int(np.count_nonzero(clamped & (targets > 0)))

    u_clamped = u < _U_FLOOR
    u = np.maximum(u, _U_FLOOR)
    q = 2.0 * b / u[:, None] + 1.0
    q0 = q.sum(axis=1)
    if loss == "forward_kl":
        p = targets
        p0 = p.sum(axis=1)
        value = float(_dirichlet_kl_rows(p, q).mean())
        g_alpha = (special.psi(q) - special.psi(q0)[:, None]
                   - special.psi(p) + special.psi(p0)[:, None]) / n
    else:  # reverse_kl
        p = targets
        p0 = p.sum(axis=1)
        value = float(_dirichlet_kl_rows(q, p).mean())
        g_alpha = ((q - p) * special.polygamma(1, q)
                   - special.polygamma(1, q0)[:, None] * (q0 - p0)[:, None]) / n
    db = g_alpha * 2.0 / u[:, None]
    du = -(2.0 / u**2) * (g_alpha * b).sum(axis=1)
    # projected gradient at the floor: only the escape direction may flow
    du[u_clamped & (du > 0)] = 0.0
    ds = np.concatenate([db, du[:, None]], axis=1)
    return value, ds, int(np.count_nonzero(u_clamped))


def batch_loss(params: ModelParams, x: np.ndarray, targets: np.ndarray,
               loss: str) -> float:
    """Mean loss over a batch; targets are probability rows (CE) or alphas (KL)."""
    _, s = _forward_batch(np.asarray(x, dtype=np.float64), params)
    value, _, _ = _loss_and_output_grad(s, np.asarray(targets, dtype=np.float64),
                                        loss, params.n_classes)
    return value


def grad(params: ModelParams, batch, config: TrainConfig):
    """Analytic gradient of the mean batch loss, parameter-shaped.

    `batch` is (features, targets) with targets as produced by
    targets_to_probs (cross entropy) or targets_to_alphas (KL losses).
    Returns (loss_value, weight_grads, bias_grads, clamp_events).
    """
    x, targets = batch
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    acts, s = _forward_batch(x, params)
    value, ds, clamp_events = _loss_and_output_grad(s, targets, config.loss,
                                                    params.n_classes)
    # softmax backward
    dz = s * (ds - (ds * s).sum(axis=1, keepdims=True))
    w_grads = [None] * len(params.weights)
    b_grads = [None] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        a_in = acts[layer]
        w_grads[layer] = a_in.T @ dz
        b_grads[layer] = dz.sum(axis=0)
        if layer > 0:
            da = dz @ params.weights[layer].T
            dz = da * (1.0 - acts[layer] ** 2)
    for idx, g in enumerate(w_grads + b_grads):
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter block {idx}")
    return value, w_grads, b_grads, clamp_events


def train(features, targets, config: TrainConfig,
          params: Optional[ModelParams] = None) -> TrainResult:
    """Minibatch gradient descent with a constant learning rate.

    `targets` is a sequence of Opinions (any loss) or probability vectors
    (cross entropy only). Deterministic given config.seed.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ConstraintError(f"features must be 2-D, got shape {x.shape}")
    targets = list(targets)
    if len(targets) != x.shape[0]:
        raise ConstraintError(
            f"{x.shape[0]} feature rows but {len(targets)} targets"
        )
    if config.loss == "cross_entropy":
        t = targets_to_probs(targets)
    else:
        if not all(isinstance(op, Opinion) for op in targets):
            raise ConstraintError("KL losses require Opinion targets")
        t = targets_to_alphas(targets, config.epsilon_smooth)
    k = t.shape[1]
    if params is None:
        params = init_params(x.shape[1], k, hidden=config.hidden, seed=config.seed)
    else:
        params = params.copy()
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x5EED)))
    trace: List[float] = []
    clamp_events = 0
    n = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            value, w_grads, b_grads, clamps = grad(params, (x[idx], t[idx]), config)
            if not np.isfinite(value):
                raise NumericalError(f"loss diverged to {value}")
            clamp_events += clamps
            for w, gw in zip(params.weights, w_grads):
                w -= config.learning_rate * gw
            for b, gb in zip(params.biases, b_grads):
                b -= config.learning_rate * gb
            epoch_losses.append(value)
        trace.append(float(np.mean(epoch_losses)))
    return TrainResult(params=params, loss_trace=trace, clamp_events=clamp_events)


def predict_opinions(features, params: ModelParams) -> List[Opinion]:
    """Batch version of forward()."""
    x = np.asarray(features, dtype=np.float64)
    _, s = _forward_batch(x, params)
    k = params.n_classes
    a = uniform_base_rate(k)
    return [opinion_new(row[:k], 1.0 - float(row[:k].sum()), a) for row in s]


def save_model(params: ModelParams, path) -> None:
    """Write parameters as versioned JSON with an explicit shape header."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_sizes": [params.weights[0].shape[0]]
                       + [w.shape[1] for w in params.weights],
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ConstraintError(
            f"unsupported model format version {doc.get('format_version')!r}"
        )
    weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
    biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
    params = ModelParams(weights, biases)
    sizes = [params.weights[0].shape[0]] + [w.shape[1] for w in params.weights]
    if sizes != doc["layer_sizes"]:
        raise ConstraintError("shape header disagrees with stored arrays")
    return params
