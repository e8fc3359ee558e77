"""The network to be explained: a small ReLU feed-forward net with a
deterministic numpy trainer, plus the generic predictor contract.

Any deterministic callable mapping an (n, p) feature matrix to an (n,)
output vector can stand in for the built-in net anywhere downstream; for
binary heads the output is the positive-class probability so that the
variance machinery always sees a real-valued target.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLoss, ParseError, ShapeMismatch

WEIGHT_FORMAT_VERSION = 1


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Mlp:
    """Fully connected ReLU net. weights[i] has shape (out_i, in_i)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = "regression"  # or "binary"

    def __post_init__(self):
        if self.head not in ("regression", "binary"):
            raise ValueError("head must be 'regression' or 'binary'")
        for i in range(len(self.weights) - 1):
            if self.weights[i + 1].shape[1] != self.weights[i].shape[0]:
                raise ShapeMismatch(
                    f"layer {i + 1} expects {self.weights[i + 1].shape[1]} inputs, "
                    f"layer {i} emits {self.weights[i].shape[0]}"
                )
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[0],):
                raise ShapeMismatch("bias length must match layer output size")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("parameters must be finite")

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.input_size:
            raise ShapeMismatch(
                f"input has {x.shape[1]} features, net expects {self.input_size}"
            )
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = np.maximum(z, 0.0) if i < last else z
        out = a[:, 0]
        if self.head == "binary":
            out = _sigmoid(out)
        return out[0] if squeeze else out

    __call__ = forward


def init_mlp(input_size: int, hidden=(256, 128), head: str = "regression",
             seed: int = 0) -> Mlp:
    rng = np.random.default_rng(seed)
    sizes = [input_size, *hidden, 1]
    weights = [_glorot(rng, sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]
    biases = [np.zeros(s) for s in sizes[1:]]
    return Mlp(weights, biases, head)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 3e-4
    seed: int = 0
    loss: str = "squared_error"  # or "cross_entropy"
    hidden: tuple[int, ...] = (256, 128)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    record_history: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs/batch_size must be >= 1 and learning_rate > 0")
        if self.loss not in ("squared_error", "cross_entropy"):
            raise ValueError("loss must be squared_error or cross_entropy")


def loss_and_gradients(m: Mlp, x: np.ndarray, y: np.ndarray, loss: str):
    """Mean loss over the batch plus gradients for every weight and bias."""
    acts = [np.asarray(x, dtype=np.float64)]
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = acts[-1] @ w.T + b
        acts.append(np.maximum(z, 0.0) if i < last else z)
    logits = acts[-1][:, 0]
    n = len(y)
    if loss == "squared_error":
        diff = logits - y
        value = float(np.mean(diff**2))
        dlogits = 2.0 * diff / n
    else:
        prob = _sigmoid(logits)
        eps = 1e-12
        value = float(-np.mean(y * np.log(prob + eps) + (1 - y) * np.log(1 - prob + eps)))
        dlogits = (prob - y) / n
    grad_w = [None] * len(m.weights)
    grad_b = [None] * len(m.weights)
    delta = dlogits[:, None]
    for i in range(last, -1, -1):
        grad_w[i] = delta.T @ acts[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ m.weights[i]) * (acts[i] > 0)
    return value, grad_w, grad_b


def train(data: tuple[np.ndarray, np.ndarray], cfg: TrainConfig = TrainConfig(),
          head: str | None = None) -> Mlp:
    """Minibatch Adam training, deterministic given cfg.seed.

    Returns the trained net; raises NonFiniteLoss on divergence. The loss
    selects the head unless overridden (cross_entropy -> binary).
    """
    x, y = np.asarray(data[0], dtype=np.float64), np.asarray(data[1], dtype=np.float64)
    if x.ndim != 2 or len(x) != len(y):
        raise ShapeMismatch("features must be 2-D with one target per row")
    if len(x) < 2:
        raise ValueError("need at least 2 training rows")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("training data must be finite")
    if head is None:
        head = "binary" if cfg.loss == "cross_entropy" else "regression"
    m = init_mlp(x.shape[1], cfg.hidden, head, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)

    mom_w = [np.zeros_like(w) for w in m.weights]
    vel_w = [np.zeros_like(w) for w in m.weights]
    mom_b = [np.zeros_like(b) for b in m.biases]
    vel_b = [np.zeros_like(b) for b in m.biases]
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    step = 0
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(x))
        epoch_loss = 0.0
        for s in range(0, len(x), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            value, gw, gb = loss_and_gradients(m, x[idx], y[idx], cfg.loss)
            if not np.isfinite(value):
                raise NonFiniteLoss(f"loss diverged at step {step}")
            epoch_loss += value * len(idx)
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step
            for params, grads, moms, vels in (
                (m.weights, gw, mom_w, vel_w),
                (m.biases, gb, mom_b, vel_b),
            ):
                for p_, g_, mo, ve in zip(params, grads, moms, vels):
                    mo *= b1
                    mo += (1 - b1) * g_
                    ve *= b2
                    ve += (1 - b2) * g_ * g_
                    p_ -= cfg.learning_rate * (mo / c1) / (np.sqrt(ve / c2) + eps)
        history.append(epoch_loss / len(x))
    if cfg.record_history:
        m.history = history
    return m


# ---------------------------------------------------------------------------
# portable weight files


def weights_to_json(m: Mlp) -> dict:
    last = len(m.weights) - 1
    return {
        "version": WEIGHT_FORMAT_VERSION,
        "layers": [
            {
                "rows": int(w.shape[0]),
                "cols": int(w.shape[1]),
                "weights": [float(v) for v in w.ravel()],  # row-major
                "bias": [float(v) for v in b],
                "activation": "relu" if i < last else "identity",
            }
            for i, (w, b) in enumerate(zip(m.weights, m.biases))
        ],
        "head": m.head,
    }


def save_weights(m: Mlp, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(weights_to_json(m), fh)
        fh.write("\n")


def weights_from_json(payload) -> Mlp:
    if not isinstance(payload, dict) or "version" not in payload:
        raise ParseError("weight file missing version field")
    if payload["version"] != WEIGHT_FORMAT_VERSION:
        raise ParseError(
            f"weight file version {payload['version']} unsupported "
            f"(expected {WEIGHT_FORMAT_VERSION})"
        )
    try:
        weights, biases = [], []
        for layer in payload["layers"]:
            rows, cols = int(layer["rows"]), int(layer["cols"])
            w = np.asarray(layer["weights"], dtype=np.float64)
            if w.size != rows * cols:
                raise ShapeMismatch(
                    f"layer declares {rows}x{cols} but carries {w.size} weights"
                )
            weights.append(w.reshape(rows, cols))
            biases.append(np.asarray(layer["bias"], dtype=np.float64))
        head = payload["head"]
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"malformed weight file: {err}") from None
    return Mlp(weights, biases, head)


def load_weights(path: str) -> Mlp:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise ParseError(f"cannot parse weight file {path}: {err}") from None
    return weights_from_json(payload)
