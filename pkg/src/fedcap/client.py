"""Client-side local training, personalization and evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .model import Batch, ModelArch, gradient, predict, sgd_step


@dataclass(frozen=True)
class LocalConfig:
    epochs: int = 5
    batch_size: int = 10
    lr: float = 0.01
    lam: float = 0.5

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be positive")
        if not self.lr > 0:
            raise ConfigurationError("lr must be positive")
        if self.lam < 0:
            raise ConfigurationError("lambda must be non-negative")


@dataclass
class ClientRecord:
    id: int
    train: Batch
    test: Batch
    v: np.ndarray

    @property
    def num_train_samples(self) -> int:
        return len(self.train)


def minibatches(n: int, batch_size: int, epochs: int, rng: np.random.Generator):
    """Index arrays for each mini-batch; a fresh permutation per epoch, short tail kept."""
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start:start + batch_size]


def _finite(w: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(w)):
        raise NumericalError(f"non-finite {what} during local training")
    return w


def proximal_gradient(v: np.ndarray, anchor: np.ndarray, lam: float) -> np.ndarray:
    """Gradient of (lam/2)*||v - anchor||^2 with respect to v."""
    return lam * (v - anchor)


def local_sgd(arch: ModelArch, w: np.ndarray, data: Batch, cfg: LocalConfig, seed) -> np.ndarray:
    """Plain mini-batch SGD on the local loss, starting from ``w``."""
    rng = np.random.default_rng(seed)
    w = np.array(w, dtype=np.float64)
    for idx in minibatches(len(data), cfg.batch_size, cfg.epochs, rng):
        w = _finite(sgd_step(w, gradient(arch, w, data.subset(idx)), cfg.lr), "model")
    return w


def client_update(arch: ModelArch, client: ClientRecord, w_hat: np.ndarray, cfg: LocalConfig,
                  seed, data: Batch | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Alternate a personalized step on v and a local step on the customized model.

    Per mini-batch, v moves along grad L(v) + lam*(v - w_cur) with ``w_cur``
    frozen, then ``w_cur`` moves along grad L(w_cur).  ``data`` overrides the
    training shard (label-flipping clients train on poisoned labels).

    Returns (locally updated model, next personalized model).
    """
    data = client.train if data is None else data
    if len(data) == 0:
        raise ConfigurationError(f"client {client.id} has an empty training shard")
    if w_hat.shape != client.v.shape:
        raise ConfigurationError("customized and personalized models differ in shape")
    rng = np.random.default_rng(seed)
    w = np.array(w_hat, dtype=np.float64)
    v = np.array(client.v, dtype=np.float64)
    for idx in minibatches(len(data), cfg.batch_size, cfg.epochs, rng):
        b = data.subset(idx)
        gv = gradient(arch, v, b) + proximal_gradient(v, w, cfg.lam)
        v = _finite(sgd_step(v, gv, cfg.lr), "personalized model")
        w = _finite(sgd_step(w, gradient(arch, w, b), cfg.lr), "customized model")
    return w, v


def compute_update(w_local: np.ndarray, w_start: np.ndarray) -> np.ndarray:
    if w_local.shape != w_start.shape:
        raise ConfigurationError("shape mismatch in compute_update")
    return w_local - w_start


def accuracy(arch: ModelArch, model: np.ndarray, data: Batch) -> float:
    if len(data) == 0:
        raise ConfigurationError("cannot evaluate on an empty shard")
    return float(np.mean(predict(arch, model, data.features) == data.labels))


def evaluate(arch: ModelArch, client: ClientRecord, model: np.ndarray) -> float:
    """Test accuracy of ``model`` on the client's held-out shard."""
    return accuracy(arch, model, client.test)
