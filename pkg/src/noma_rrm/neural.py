"""Small numpy feed-forward regression network: forward, backprop, Adam/RMSProp, dropout, FLOPs.

Hidden layers use ReLU, the output layer is linear. Dropout is inverted dropout
on the outputs of hidden layers, so inference needs no rescaling. Inputs are
standardised with constants stored on the model.
"""
from __future__ import annotations

import copy
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ChecksumError, ConfigError, TruncatedFileError,
                     VersionMismatchError)

RELU = "relu"
IDENTITY = "identity"


@dataclass
class Layer:
    weight: np.ndarray      # [n_in, n_out]
    bias: np.ndarray        # [n_out]
    activation: str = RELU
    keep: float = 1.0       # keep probability applied to this layer's output in train mode

    @property
    def shape(self):
        return self.weight.shape


@dataclass
class MlpModel:
    layers: list
    in_mean: np.ndarray | None = None
    in_std: np.ndarray | None = None

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.shape[1] != nxt.shape[0]:
                raise ConfigError(f"layer dims do not chain: {prev.shape} -> {nxt.shape}")
        for layer in self.layers:
            if not 0.0 < layer.keep <= 1.0:
                raise ConfigError("keep probability must be in (0, 1]")
        if self.layers and self.layers[-1].activation != IDENTITY:
            raise ConfigError("the output layer must be linear")

    @property
    def input_dim(self):
        return self.layers[0].shape[0]

    @property
    def output_dim(self):
        return self.layers[-1].shape[1]

    @property
    def dims(self):
        return [self.input_dim] + [layer.shape[1] for layer in self.layers]

    def copy(self):
        return copy.deepcopy(self)

    def set_normalization(self, mean, std):
        std = np.where(np.asarray(std) > 0, std, 1.0)
        self.in_mean = np.asarray(mean, dtype=float)
        self.in_std = np.asarray(std, dtype=float)

    def normalize(self, x):
        if self.in_mean is None:
            return x
        return (x - self.in_mean) / self.in_std

    def params(self):
        for layer in self.layers:
            yield layer.weight
            yield layer.bias


def build_mlp(input_dim, hidden, output_dim, keep=1.0, seed=0):
    """Fan-in scaled uniform init: He bound for ReLU layers, LeCun bound for the linear output."""
    rng = np.random.default_rng(seed)
    dims = [input_dim, *hidden, output_dim]
    layers = []
    for i, (n_in, n_out) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        bound = np.sqrt((3.0 if last else 6.0) / n_in)
        w = rng.uniform(-bound, bound, size=(n_in, n_out))
        layers.append(Layer(w, np.zeros(n_out), IDENTITY if last else RELU,
                            1.0 if last else float(keep)))
    return MlpModel(layers)


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == RELU else z


def dropout_masks(model: MlpModel, n_rows, rng):
    masks = []
    for layer in model.layers:
        if layer.keep < 1.0:
            masks.append((rng.random((n_rows, layer.shape[1])) < layer.keep) / layer.keep)
        else:
            masks.append(None)
    return masks


def _forward(model: MlpModel, x, masks=None):
    """Forward pass keeping every layer's input for backprop."""
    h = model.normalize(x)
    cache = []
    for i, layer in enumerate(model.layers):
        z = h @ layer.weight + layer.bias
        a = _act(z, layer.activation)
        mask = masks[i] if masks is not None else None
        if mask is not None:
            a = a * mask
        cache.append((h, z, mask))
        h = a
    return h, cache


def forward(model: MlpModel, x, mode="infer", seed=None, dtype=None):
    """Evaluate the network on one input vector or a batch ``[n, input_dim]``.

    ``mode="train"`` applies seeded inverted dropout; ``dtype=np.float32``
    runs inference in single precision.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.shape[1] != model.input_dim:
        raise ConfigError(f"input has {xb.shape[1]} features, model expects {model.input_dim}")
    if mode == "train":
        masks = dropout_masks(model, xb.shape[0], np.random.default_rng(seed))
    elif mode == "infer":
        masks = None
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    if dtype is not None and mode == "infer":
        h = model.normalize(xb).astype(dtype)
        for layer in model.layers:
            h = _act(h @ layer.weight.astype(dtype) + layer.bias.astype(dtype), layer.activation)
        out = h.astype(float)
    else:
        out, _ = _forward(model, xb, masks)
    return out[0] if single else out


def mse_loss(pred, label):
    pred = np.asarray(pred, dtype=float)
    label = np.asarray(label, dtype=float)
    if pred.shape != label.shape:
        raise ConfigError(f"shape mismatch {pred.shape} vs {label.shape}")
    return float(np.mean((pred - label) ** 2))


def backward(model: MlpModel, x, y, masks=None):
    """Gradients of the batch MSE with respect to every weight and bias.

    Returns ``(loss, grads)`` with ``grads[i] = (dW_i, db_i)``. ``masks`` fixes
    the dropout pattern; ``None`` differentiates the inference graph.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != model.input_dim or y.shape[1] != model.output_dim:
        raise ConfigError("input/label dimensions do not match the model")
    out, cache = _forward(model, x, masks)
    diff = out - y
    loss = float(np.mean(diff ** 2))
    delta = 2.0 * diff / diff.size
    grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        h, z, mask = cache[i]
        if mask is not None:
            delta = delta * mask
        if layer.activation == RELU:
            delta = delta * (z > 0)
        grads[i] = (h.T @ delta, delta.sum(axis=0))
        if i:
            delta = delta @ layer.weight.T
    return loss, grads


# ---------------------------------------------------------------------------
# Optimisers

class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class RMSProp:
    def __init__(self, lr, decay=0.9, eps=1e-8):
        self.lr, self.decay, self.eps = lr, decay, eps
        self.v = None

    def step(self, params, grads):
        if self.v is None:
            self.v = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.v):
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            p -= self.lr * g / (np.sqrt(v) + self.eps)


OPTIMIZERS = {"adam": Adam, "rmsprop": RMSProp}


@dataclass(frozen=True)
class TrainConfig:
    learn_rate: float = 0.01
    batch_size: int = 200
    epochs: int = 100
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.learn_rate < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("need learn_rate >= 0, batch_size >= 1, epochs >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class Architecture:
    hidden: tuple
    keep: float
    train: TrainConfig


# Reference presets: hidden widths, keep probability, training schedule (a linear output head is added)
SUBCHANNEL_NET1 = Architecture((700, 700), 0.8, TrainConfig(0.01, 200, 100, "rmsprop"))
SUBCHANNEL_NET2 = Architecture((80, 80, 80), 1.0, TrainConfig(0.05, 500, 100, "rmsprop"))
POWER_NET = Architecture((800, 800), 1.0, TrainConfig(0.01, 200, 100, "adam"))


@dataclass
class TrainState:
    """Optimiser and RNG carried across calls so training can be resumed."""
    optimizer: object
    rng: np.random.Generator
    history: list = field(default_factory=list)


def new_train_state(cfg: TrainConfig):
    return TrainState(OPTIMIZERS[cfg.optimizer](cfg.learn_rate), np.random.default_rng(cfg.seed))


def train(model: MlpModel, x, y, cfg: TrainConfig, state: TrainState | None = None,
          epochs=None, callback=None):
    """Minibatch training on a copy of ``model``. Returns ``(model, per-epoch loss history)``.

    The loss recorded for an epoch is the mean minibatch loss seen during it.
    ``callback(epoch, model)`` runs after each epoch.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) == 0:
        raise ConfigError("cannot train on an empty dataset")
    if x.shape[1] != model.input_dim or y.shape[1] != model.output_dim:
        raise ConfigError("dataset dimensions do not match the model")
    model = model.copy()
    state = state or new_train_state(cfg)
    params = list(model.params())
    n = len(x)
    history = []
    for epoch in range(cfg.epochs if epochs is None else epochs):
        order = state.rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            masks = dropout_masks(model, len(idx), state.rng)
            loss, grads = backward(model, x[idx], y[idx], masks)
            if cfg.learn_rate > 0:
                state.optimizer.step(params, [g for pair in grads for g in pair])
            total += loss * len(idx)
            count += len(idx)
        history.append(total / count)
        if callback is not None:
            callback(epoch, model)
    state.history.extend(history)
    return model, history


def flops_count(model: MlpModel, include_output=True):
    """Forward-pass FLOPs, 2 * n_in * n_out per dense layer."""
    layers = model.layers if include_output else model.layers[:-1]
    return int(sum(2 * layer.shape[0] * layer.shape[1] for layer in layers))


def flops_for_dims(dims):
    return int(sum(2 * a * b for a, b in zip(dims, dims[1:])))


# ---------------------------------------------------------------------------
# Checkpoints

_MLP_MAGIC = b"NOMAMLP\0"
_MLP_VERSION = 1


def save_model(model: MlpModel, path):
    header = {
        "version": _MLP_VERSION,
        "dims": model.dims,
        "activations": [layer.activation for layer in model.layers],
        "keep": [layer.keep for layer in model.layers],
        "normalized": model.in_mean is not None,
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    body = bytearray(struct.pack("<II", _MLP_VERSION, len(hbytes)) + hbytes)
    if model.in_mean is not None:
        body += np.ascontiguousarray(model.in_mean, "<f8").tobytes()
        body += np.ascontiguousarray(model.in_std, "<f8").tobytes()
    for layer in model.layers:
        body += np.ascontiguousarray(layer.weight, "<f8").tobytes()
        body += np.ascontiguousarray(layer.bias, "<f8").tobytes()
    data = _MLP_MAGIC + bytes(body)
    Path(path).write_bytes(data + hashlib.sha256(data).digest())


def load_model(path) -> MlpModel:
    raw = Path(path).read_bytes()
    if raw[:8] != _MLP_MAGIC:
        raise VersionMismatchError("not a model checkpoint")
    if len(raw) < 16 + 32:
        raise TruncatedFileError("checkpoint truncated")
    version, hlen = struct.unpack_from("<II", raw, 8)
    if version != _MLP_VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, expected {_MLP_VERSION}")
    try:
        header = json.loads(raw[16:16 + hlen])
    except ValueError as exc:
        raise TruncatedFileError("checkpoint header unreadable") from exc
    dims = header["dims"]
    n_vals = sum(a * b + b for a, b in zip(dims, dims[1:])) + (2 * dims[0] if header["normalized"] else 0)
    if len(raw) < 16 + hlen + 8 * n_vals + 32:
        raise TruncatedFileError("checkpoint truncated")
    if hashlib.sha256(raw[:-32]).digest() != raw[-32:]:
        raise ChecksumError("checkpoint checksum mismatch")
    off = 16 + hlen

    def take(count):
        nonlocal off
        arr = np.frombuffer(raw, "<f8", count=count, offset=off).astype(float)
        off += 8 * count
        return arr

    mean = std = None
    if header["normalized"]:
        mean, std = take(dims[0]), take(dims[0])
    layers = []
    for (a, b), act, keep in zip(zip(dims, dims[1:]), header["activations"], header["keep"]):
        w = take(a * b).reshape(a, b)
        layers.append(Layer(w, take(b), act, keep))
    model = MlpModel(layers)
    model.in_mean, model.in_std = mean, std
    return model
