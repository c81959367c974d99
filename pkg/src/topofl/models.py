"""Small differentiable models with hand-written gradients, and local SGD."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .params import ParameterVector

MODEL_KINDS = ("linear_regression", "softmax_classifier", "mlp1")
ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ModelSpec:
    """Model family and shape.

    ``task`` defaults to regression for ``linear_regression`` and to
    classification otherwise; ``mlp1`` may be used for either.
    """

    kind: str
    input_dim: int
    output_dim: int
    hidden_dim: Optional[int] = None
    activation: str = "relu"
    task: Optional[str] = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("model dimensions must be >= 1")
        if self.kind == "mlp1":
            if self.hidden_dim is None or self.hidden_dim < 1:
                raise ValueError("mlp1 needs hidden_dim >= 1")
            if self.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")
        task = self.task
        if task is None:
            task = "regression" if self.kind == "linear_regression" else "classification"
            object.__setattr__(self, "task", task)
        if task not in ("regression", "classification"):
            raise ValueError(f"unknown task {task!r}")
        if self.kind == "linear_regression" and task != "regression":
            raise ValueError("linear_regression is a regression model")
        if self.kind == "softmax_classifier" and task != "classification":
            raise ValueError("softmax_classifier is a classification model")

    def layer_shapes(self):
        if self.kind == "mlp1":
            h = self.hidden_dim
            return [("w0", (self.input_dim, h)), ("b0", (h,)),
                    ("w1", (h, self.output_dim)), ("b1", (self.output_dim,))]
        return [("w0", (self.input_dim, self.output_dim)), ("b0", (self.output_dim,))]

    def layer_index(self):
        index, pos = {}, 0
        for name, shape in self.layer_shapes():
            size = int(np.prod(shape))
            index[name] = (pos, pos + size)
            pos += size
        return index

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.layer_shapes())


@dataclass(frozen=True)
class LocalTrainConfig:
    """Local SGD settings. ``epochs = 0`` makes local training a no-op."""

    epochs: int = 1
    batch_size: int = 32
    eta_theta: float = 0.1
    prox_mu: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.eta_theta > 0:
            raise ValueError("eta_theta must be > 0")
        if self.prox_mu < 0:
            raise ValueError("prox_mu must be >= 0")


def init_params(spec: ModelSpec, seed=0) -> ParameterVector:
    """Uniform init in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` for every layer."""
    rng = np.random.default_rng(seed)
    chunks = []
    for name, shape in spec.layer_shapes():
        fan_in = shape[0] if name.startswith("w") else _fan_in_of_bias(spec, name)
        s = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-s, s, size=int(np.prod(shape))))
    return ParameterVector(np.concatenate(chunks), spec.layer_index())


def _fan_in_of_bias(spec, name):
    return spec.input_dim if name == "b0" else spec.hidden_dim


def _unpack(spec, params):
    shapes = dict(spec.layer_shapes())
    if len(params) != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {len(params)}")
    return {name: params.layer(name).reshape(shapes[name]) for name in shapes}


def _check_batch(spec, x, y):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if x.shape[1] != spec.input_dim:
        raise ValueError(f"expected {spec.input_dim} features, got {x.shape[1]}")
    if spec.task == "classification":
        y = np.asarray(y)
        if not np.issubdtype(y.dtype, np.integer):
            if np.any(y != np.round(y)):
                raise ValueError("class labels must be integers")
            y = y.astype(int)
        if y.min() < 0 or y.max() >= spec.output_dim:
            raise ValueError(f"label out of range [0, {spec.output_dim})")
    else:
        y = np.asarray(y, dtype=np.float64).reshape(x.shape[0], spec.output_dim)
    return x, y


def _activate(spec, z):
    return np.maximum(z, 0.0) if spec.activation == "relu" else np.tanh(z)


def _activate_grad(spec, z, a):
    return (z > 0).astype(np.float64) if spec.activation == "relu" else 1.0 - a ** 2


def _forward(spec, w, x):
    if spec.kind == "mlp1":
        z = x @ w["w0"] + w["b0"]
        a = _activate(spec, z)
        return a @ w["w1"] + w["b1"], (z, a)
    return x @ w["w0"] + w["b0"], None


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _loss_and_dout(spec, out, y, need_grad):
    if spec.task == "classification":
        logp = _log_softmax(out)
        n = out.shape[0]
        loss = -logp[np.arange(n), y].mean()
        if not need_grad:
            return loss, None
        d = np.exp(logp)
        d[np.arange(n), y] -= 1.0
        return loss, d / n
    r = out - y
    loss = np.mean(r ** 2)
    return loss, (2.0 / r.size) * r if need_grad else None


def predict(spec: ModelSpec, params: ParameterVector, x) -> np.ndarray:
    """Regression outputs, or class probabilities for classifiers."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out, _ = _forward(spec, _unpack(spec, params), x)
    if spec.task == "classification":
        return np.exp(_log_softmax(out))
    return out


def loss(spec: ModelSpec, params: ParameterVector, batch) -> float:
    x, y = _check_batch(spec, *batch)
    out, _ = _forward(spec, _unpack(spec, params), x)
    return float(_loss_and_dout(spec, out, y, False)[0])


def loss_and_gradient(spec: ModelSpec, params: ParameterVector, batch) -> Tuple[float, ParameterVector]:
    x, y = _check_batch(spec, *batch)
    w = _unpack(spec, params)
    out, cache = _forward(spec, w, x)
    value, dout = _loss_and_dout(spec, out, y, True)
    grads = {}
    if spec.kind == "mlp1":
        z, a = cache
        grads["w1"] = a.T @ dout
        grads["b1"] = dout.sum(axis=0)
        dz = (dout @ w["w1"].T) * _activate_grad(spec, z, a)
        grads["w0"] = x.T @ dz
        grads["b0"] = dz.sum(axis=0)
    else:
        grads["w0"] = x.T @ dout
        grads["b0"] = dout.sum(axis=0)
    flat = np.concatenate([grads[name].ravel() for name, _ in spec.layer_shapes()])
    return float(value), params.with_values(flat)


def gradient(spec: ModelSpec, params: ParameterVector, batch) -> ParameterVector:
    return loss_and_gradient(spec, params, batch)[1]


def local_train(spec: ModelSpec, start: ParameterVector, data, cfg: LocalTrainConfig,
                anchor: Optional[ParameterVector] = None, seed=None):
    """Minibatch SGD from ``start`` on ``data = (x, y)``.

    With ``cfg.prox_mu > 0`` every step adds ``prox_mu * (theta - anchor)``
    (the proximal pull toward the global model). Returns the final parameters
    and the sample-weighted mean minibatch loss of the last epoch, each loss
    taken before its step.
    """
    x, y = _check_batch(spec, *data)
    n = x.shape[0]
    if cfg.prox_mu > 0:
        if anchor is None or not anchor.same_shape(start):
            raise ValueError("proximal training needs an anchor shaped like start")
        anchor_values = anchor.values
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    theta = start.values.copy()
    if cfg.epochs == 0:
        return start.copy(), loss(spec, start, (x, y))
    epoch_loss = 0.0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            value, g = loss_and_gradient(spec, start.with_values(theta), (x[idx], y[idx]))
            step = g.values
            if cfg.prox_mu > 0:
                step = step + cfg.prox_mu * (theta - anchor_values)
            theta = theta - cfg.eta_theta * step
            epoch_loss += value * idx.size
        epoch_loss /= n
    return start.with_values(theta), float(epoch_loss)
