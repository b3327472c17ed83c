"""Flat-parameter classifiers: softmax regression and a one-hidden-layer MLP.

Parameters live in a single float64 vector laid out layer by layer; within a
layer the weight matrix (fan_in x fan_out, row-major) comes first, then the
bias.  Everything that aggregates, compares or attacks models works on these
raw vectors.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .errors import ConfigurationError, NumericalError

MAGIC = b"FCAP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBQ")
ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class ModelArch:
    input_dim: int
    hidden_dim: int
    num_classes: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {ACTIVATIONS}")
        if self.input_dim < 1:
            raise ConfigurationError(f"input_dim must be positive, got {self.input_dim}")
        if self.hidden_dim < 0:
            raise ConfigurationError(f"hidden_dim must be >= 0, got {self.hidden_dim}")
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def layers(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per dense layer."""
        if self.hidden_dim == 0:
            return [(self.input_dim, self.num_classes)]
        return [(self.input_dim, self.hidden_dim), (self.hidden_dim, self.num_classes)]

    @property
    def num_params(self) -> int:
        return sum(i * o + o for i, o in self.layers)


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ConfigurationError(f"bad batch shapes {x.shape} / {y.shape}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, idx) -> "Batch":
        return Batch(self.features[idx], self.labels[idx])


def _check(arch: ModelArch, w: np.ndarray, batch: Batch | None = None) -> None:
    if w.ndim != 1 or w.shape[0] != arch.num_params:
        raise ConfigurationError(
            f"parameter vector has shape {w.shape}, architecture needs ({arch.num_params},)")
    if batch is not None:
        if len(batch) < 1:
            raise ConfigurationError("empty batch")
        if batch.features.shape[1] != arch.input_dim:
            raise ConfigurationError(
                f"batch has {batch.features.shape[1]} features, model expects {arch.input_dim}")
        if batch.labels.min() < 0 or batch.labels.max() >= arch.num_classes:
            raise ConfigurationError("label out of range")


def unflatten(arch: ModelArch, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (W, b) into ``w`` for each layer."""
    out = []
    pos = 0
    for fan_in, fan_out in arch.layers:
        W = w[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = w[pos:pos + fan_out]
        pos += fan_out
        out.append((W, b))
    return out


def init_params(arch: ModelArch, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    w = np.zeros(arch.num_params)
    for W, _ in unflatten(arch, w):
        a = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
        W[...] = rng.uniform(-a, a, size=W.shape)
    return w


def _act(arch: ModelArch, z: np.ndarray) -> np.ndarray:
    return np.tanh(z) if arch.activation == "tanh" else np.maximum(z, 0.0)


def _act_grad(arch: ModelArch, h: np.ndarray) -> np.ndarray:
    """Derivative of the activation expressed through its output ``h``."""
    return 1.0 - h * h if arch.activation == "tanh" else (h > 0).astype(h.dtype)


def logits(arch: ModelArch, w: np.ndarray, features: np.ndarray) -> np.ndarray:
    layers = unflatten(arch, w)
    h = features
    for W, b in layers[:-1]:
        h = _act(arch, h @ W + b)
    W, b = layers[-1]
    return h @ W + b


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def forward_loss(arch: ModelArch, w: np.ndarray, batch: Batch) -> float:
    """Mean cross-entropy of the model over ``batch``."""
    _check(arch, w, batch)
    logp = _log_softmax(logits(arch, w, batch.features))
    return float(-logp[np.arange(len(batch)), batch.labels].mean())


def gradient(arch: ModelArch, w: np.ndarray, batch: Batch) -> np.ndarray:
    """Analytic gradient of :func:`forward_loss` with respect to ``w``."""
    _check(arch, w, batch)
    layers = unflatten(arch, w)
    n = len(batch)
    acts = [batch.features]
    for W, b in layers[:-1]:
        acts.append(_act(arch, acts[-1] @ W + b))
    W_out, b_out = layers[-1]
    z = acts[-1] @ W_out + b_out
    delta = np.exp(_log_softmax(z))
    delta[np.arange(n), batch.labels] -= 1.0
    delta /= n

    g = np.empty_like(w)
    grads = unflatten(arch, g)
    for li in range(len(layers) - 1, -1, -1):
        gW, gb = grads[li]
        gW[...] = acts[li].T @ delta
        gb[...] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ layers[li][0].T) * _act_grad(arch, acts[li])
    return g


def sgd_step(w: np.ndarray, g: np.ndarray, lr: float) -> np.ndarray:
    if w.shape != g.shape:
        raise ConfigurationError(f"shape mismatch {w.shape} vs {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericalError("non-finite gradient")
    return w - lr * g


def predict(arch: ModelArch, w: np.ndarray, features: np.ndarray) -> np.ndarray:
    # argmax returns the first maximum, so ties go to the lowest class id
    return np.argmax(logits(arch, w, features), axis=1)


# -- serialization ---------------------------------------------------------

def write_params(fh: BinaryIO, w: np.ndarray) -> None:
    w = np.ascontiguousarray(w, dtype="<f8")
    if w.ndim != 1 or w.size == 0:
        raise ConfigurationError("only non-empty 1-D vectors can be serialized")
    fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, w.size))
    fh.write(w.tobytes())


def read_params(fh: BinaryIO) -> np.ndarray | None:
    """Read one vector; returns None at a clean end of stream."""
    head = fh.read(_HEADER.size)
    if not head:
        return None
    if len(head) != _HEADER.size:
        raise ConfigurationError("truncated header")
    magic, version, dim = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ConfigurationError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported version {version}")
    body = fh.read(8 * dim)
    if len(body) != 8 * dim:
        raise ConfigurationError("truncated body")
    return np.frombuffer(body, dtype="<f8").astype(np.float64)


def save_params(path: str | Path, *vectors: np.ndarray) -> None:
    with open(path, "wb") as fh:
        for w in vectors:
            write_params(fh, w)


def iter_params(path: str | Path) -> Iterator[np.ndarray]:
    with open(path, "rb") as fh:
        while (w := read_params(fh)) is not None:
            yield w


def load_params(path: str | Path) -> np.ndarray:
    """Load the first (usually only) vector stored at ``path``."""
    for w in iter_params(path):
        return w
    raise ConfigurationError(f"{path} holds no vectors")
