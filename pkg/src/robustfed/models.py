"""Small differentiable classifiers with analytic gradients.

Two model families over flattened parameter vectors: multinomial logistic
regression and a one-hidden-layer tanh network. Training minimizes mean
cross-entropy; the gradient additionally carries an l2 penalty term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasim import LabeledDataset
from .seeding import derived_rng

MODEL_KINDS = ("softmax_linear", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    """Model family, shapes, and l2 regularization factor."""

    kind: str
    input_dim: int
    n_classes: int
    l2_reg: float = 1e-2
    hidden: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}, expected one of {MODEL_KINDS}")
        if self.input_dim < 1 or self.n_classes < 2:
            raise ValueError("need input_dim >= 1 and n_classes >= 2")
        if self.l2_reg < 0:
            raise ValueError("l2_reg must be nonnegative")
        if self.kind == "mlp" and self.hidden < 1:
            raise ValueError("mlp requires hidden >= 1")

    @property
    def param_dim(self) -> int:
        p, c, h = self.input_dim, self.n_classes, self.hidden
        if self.kind == "softmax_linear":
            return (p + 1) * c
        return (p + 1) * h + (h + 1) * c


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Small random start; scale keeps initial logits order-1."""
    rng = derived_rng(seed, "model-init")
    if spec.kind == "softmax_linear":
        return 0.01 * rng.standard_normal(spec.param_dim)
    p, c, h = spec.input_dim, spec.n_classes, spec.hidden
    w1 = rng.standard_normal((h, p)) * np.sqrt(1.0 / p)
    b1 = np.zeros(h)
    w2 = rng.standard_normal((c, h)) * np.sqrt(1.0 / h)
    b2 = np.zeros(c)
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


def _unpack_linear(spec: ModelSpec, theta: np.ndarray):
    p, c = spec.input_dim, spec.n_classes
    w = theta[: c * p].reshape(c, p)
    b = theta[c * p :]
    return w, b


def _unpack_mlp(spec: ModelSpec, theta: np.ndarray):
    p, c, h = spec.input_dim, spec.n_classes, spec.hidden
    parts = np.split(theta, np.cumsum([h * p, h, c * h]))
    return parts[0].reshape(h, p), parts[1], parts[2].reshape(c, h), parts[3]


def _forward(spec: ModelSpec, theta: np.ndarray, x: np.ndarray):
    """Logits plus the hidden activations needed for backprop.

    Overflow is not a warning here: divergence surfaces as the explicit
    non-finite-logits rejection in the callers.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        if spec.kind == "softmax_linear":
            w, b = _unpack_linear(spec, theta)
            return x @ w.T + b, None
        w1, b1, w2, b2 = _unpack_mlp(spec, theta)
        hidden = np.tanh(x @ w1.T + b1)
        return hidden @ w2.T + b2, hidden


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def model_gradient(spec: ModelSpec, theta: np.ndarray, batch: LabeledDataset) -> np.ndarray:
    """Analytic gradient of mean cross-entropy plus l2_reg * theta."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spec.param_dim,):
        raise ValueError(f"theta must have shape ({spec.param_dim},), got {theta.shape}")
    x, y = batch.features, batch.labels
    m = batch.n_samples
    logits, hidden = _forward(spec, theta, x)
    if not np.isfinite(logits).all():
        raise ValueError(
            f"non-finite logits (max |theta| = {np.abs(theta).max():.3e}); training diverged"
        )
    probs = np.exp(_log_softmax(logits))
    probs[np.arange(m), y] -= 1.0
    dlogits = probs / m

    if spec.kind == "softmax_linear":
        grad = np.concatenate([(dlogits.T @ x).ravel(), dlogits.sum(axis=0)])
    else:
        w1, b1, w2, b2 = _unpack_mlp(spec, theta)
        dhidden = (dlogits @ w2) * (1.0 - hidden**2)
        grad = np.concatenate(
            [
                (dhidden.T @ x).ravel(),
                dhidden.sum(axis=0),
                (dlogits.T @ hidden).ravel(),
                dlogits.sum(axis=0),
            ]
        )
    return grad + spec.l2_reg * theta


def model_loss(spec: ModelSpec, theta: np.ndarray, data: LabeledDataset) -> float:
    """Mean cross-entropy, without the l2 penalty."""
    logits, _ = _forward(spec, theta, data.features)
    if not np.isfinite(logits).all():
        raise ValueError("non-finite logits while computing loss")
    logp = _log_softmax(logits)
    return float(-logp[np.arange(data.n_samples), data.labels].mean())


def predict(spec: ModelSpec, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Argmax class per sample; ties resolve to the lowest class index."""
    logits, _ = _forward(spec, np.asarray(theta, dtype=np.float64), features)
    return logits.argmax(axis=1)


def evaluate(spec: ModelSpec, theta: np.ndarray, test: LabeledDataset) -> tuple[float, float]:
    """(accuracy, mean cross-entropy loss) on a held-out set."""
    if test.n_samples < 1:
        raise ValueError("test set must be nonempty")
    accuracy = float((predict(spec, theta, test.features) == test.labels).mean())
    return accuracy, model_loss(spec, theta, test)
