"""Three-layer sigmoid network with a single output score.

MAC accounting counts one multiply-accumulate per weight:
``d_in * d_hidden + d_hidden``. Bias adds and activations are not counted.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ContractError, DivergenceError, ShapeError


@dataclass(frozen=True)
class InferenceResult:
    score: float
    macs: int


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 40
    batch_size: int = 32
    seed: int = 0
    weight_init_scale: float | None = None  # None: 1/sqrt(d_in)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be positive")
        if self.epochs < 1:
            raise ContractError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ContractError("batch_size must be at least 1")

    def init_scale(self, d_in: int) -> float:
        if self.weight_init_scale is None:
            return 1.0 / math.sqrt(d_in)
        return float(self.weight_init_scale)


@dataclass
class MlpClassifier:
    weights_ih: np.ndarray  # (d_hidden, d_in)
    bias_h: np.ndarray  # (d_hidden,)
    weights_ho: np.ndarray  # (d_hidden,)
    bias_o: float
    provenance: dict = field(default_factory=dict)

    @property
    def d_in(self) -> int:
        return self.weights_ih.shape[1]

    @property
    def d_hidden(self) -> int:
        return self.weights_ih.shape[0]

    @property
    def macs_per_inference(self) -> int:
        return self.d_in * self.d_hidden + self.d_hidden

    def copy(self) -> "MlpClassifier":
        return MlpClassifier(
            self.weights_ih.copy(), self.bias_h.copy(), self.weights_ho.copy(),
            float(self.bias_o), dict(self.provenance),
        )

    def logits(self, X: np.ndarray) -> np.ndarray:
        hidden = expit(X @ self.weights_ih.T + self.bias_h)
        return hidden @ self.weights_ho + self.bias_o

    def scores(self, X) -> np.ndarray:
        """Output scores for a batch ``(n, d_in)``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.d_in:
            raise ShapeError(f"expected (n, {self.d_in}) inputs, got {X.shape}")
        return expit(self.logits(X))

    def forward(self, x) -> InferenceResult:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.d_in:
            raise ShapeError(f"expected a vector of length {self.d_in}, got shape {x.shape}")
        return InferenceResult(float(self.scores(x[None, :])[0]), self.macs_per_inference)

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "format": "semcascade.mlp/1",
            "d_in": self.d_in,
            "d_hidden": self.d_hidden,
            "activation": "sigmoid",
            "provenance": self.provenance,
            "weights_ih": self.weights_ih.ravel().tolist(),
            "bias_h": self.bias_h.tolist(),
            "weights_ho": self.weights_ho.tolist(),
            "bias_o": float(self.bias_o),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpClassifier":
        d_in, d_hidden = int(data["d_in"]), int(data["d_hidden"])
        w = np.array(data["weights_ih"], dtype=np.float64)
        if w.size != d_in * d_hidden:
            raise ShapeError("weights_ih length does not match declared dims")
        return cls(
            w.reshape(d_hidden, d_in),
            np.array(data["bias_h"], dtype=np.float64),
            np.array(data["weights_ho"], dtype=np.float64),
            float(data["bias_o"]),
            dict(data.get("provenance", {})),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "MlpClassifier":
        return cls.from_dict(json.loads(text))


def init(d_in: int, d_hidden: int, seed: int, scale: float) -> MlpClassifier:
    if d_in < 1 or d_hidden < 1:
        raise ContractError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    w_ih = rng.uniform(-scale, scale, (d_hidden, d_in))
    w_ho = rng.uniform(-scale, scale, d_hidden)
    return MlpClassifier(
        w_ih, np.zeros(d_hidden), w_ho, 0.0,
        {"init_seed": int(seed), "init_scale": float(scale)},
    )


def forward(net: MlpClassifier, x) -> InferenceResult:
    return net.forward(x)


def bce_from_logits(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z) - y * z


def loss(net: MlpClassifier, X: np.ndarray, y: np.ndarray) -> float:
    return float(bce_from_logits(net.logits(X), y).mean())


def gradients(net: MlpClassifier, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy gradients ``(dW_ih, db_h, dW_ho, db_o)``."""
    hidden = expit(X @ net.weights_ih.T + net.bias_h)
    out = expit(hidden @ net.weights_ho + net.bias_o)
    n = X.shape[0]
    d_out = (out - y) / n
    d_w_ho = hidden.T @ d_out
    d_b_o = d_out.sum()
    d_hidden = np.outer(d_out, net.weights_ho) * hidden * (1.0 - hidden)
    d_w_ih = d_hidden.T @ X
    d_b_h = d_hidden.sum(axis=0)
    return d_w_ih, d_b_h, d_w_ho, d_b_o


def train(net: MlpClassifier, X, y, config: TrainConfig):
    """Minibatch gradient descent on binary cross-entropy.

    Returns ``(trained_net, final_epoch_mean_loss)``; ``net`` is not modified.
    The reported loss is the epoch mean of the per-batch losses seen before
    each update.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.d_in:
        raise ShapeError(f"expected (n, {net.d_in}) inputs, got {X.shape}")
    if y.shape != (X.shape[0],):
        raise ShapeError("targets must be a vector matching the inputs")
    if not ((y == 1).any() and (y == 0).any()):
        raise ContractError("training needs at least one example of each target")
    trained = net.copy()
    rng = np.random.default_rng(config.seed)
    n = X.shape[0]
    lr = config.learning_rate
    epoch_loss = math.nan
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = X[idx], y[idx]
            total += float(bce_from_logits(trained.logits(xb), yb).sum())
            d_w_ih, d_b_h, d_w_ho, d_b_o = gradients(trained, xb, yb)
            trained.weights_ih -= lr * d_w_ih
            trained.bias_h -= lr * d_b_h
            trained.weights_ho -= lr * d_w_ho
            trained.bias_o -= lr * float(d_b_o)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise DivergenceError(epoch)
    trained.provenance.update(
        {"train_seed": int(config.seed), "epochs": config.epochs,
         "learning_rate": config.learning_rate, "batch_size": config.batch_size}
    )
    return trained, epoch_loss


def fit(X, y, d_hidden: int, config: TrainConfig, init_seed: int | None = None):
    """Initialise and train a fresh network; returns ``(net, loss)``."""
    X = np.asarray(X, dtype=np.float64)
    seed = config.seed if init_seed is None else init_seed
    net = init(X.shape[1], d_hidden, seed, config.init_scale(X.shape[1]))
    return train(net, X, y, config)


# ------------------------------------------------------------ gradient check


def _flatten(net: MlpClassifier) -> np.ndarray:
    return np.concatenate(
        [net.weights_ih.ravel(), net.bias_h, net.weights_ho, [net.bias_o]]
    )


def _unflatten(net: MlpClassifier, theta: np.ndarray) -> MlpClassifier:
    h, d = net.d_hidden, net.d_in
    i = 0
    w_ih = theta[i : i + h * d].reshape(h, d); i += h * d
    b_h = theta[i : i + h]; i += h
    w_ho = theta[i : i + h]; i += h
    return MlpClassifier(w_ih.copy(), b_h.copy(), w_ho.copy(), float(theta[i]))


def analytic_gradient(net: MlpClassifier, x, target: float) -> np.ndarray:
    X = np.asarray(x, dtype=np.float64).reshape(1, -1)
    d_w_ih, d_b_h, d_w_ho, d_b_o = gradients(net, X, np.array([float(target)]))
    return np.concatenate([d_w_ih.ravel(), d_b_h, d_w_ho, [d_b_o]])


def numeric_gradient(net: MlpClassifier, x, target: float, step: float = 1e-5) -> np.ndarray:
    X = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.array([float(target)])
    theta = _flatten(net)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + step
        up = loss(_unflatten(net, theta), X, y)
        theta[i] = orig - step
        down = loss(_unflatten(net, theta), X, y)
        theta[i] = orig
        grad[i] = (up - down) / (2.0 * step)
    return grad


def gradient_check(net: MlpClassifier, x, target: float, step: float = 1e-5) -> float:
    """Max relative error between backprop and central differences.

    Relative error is ``|a - n| / max(|a| + |n|, 1e-6)``; the floor keeps
    components that are zero on both routes from dominating.
    """
    a = analytic_gradient(net, x, target)
    n = numeric_gradient(net, x, target, step)
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-6)))
