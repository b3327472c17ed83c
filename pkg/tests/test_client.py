import numpy as np
import pytest

from fedcap.client import (ClientRecord, LocalConfig, accuracy, client_update, compute_update,
                           evaluate, local_sgd, minibatches, proximal_gradient)
from fedcap.errors import ConfigurationError, NumericalError
from fedcap.model import Batch, ModelArch, gradient, init_params, sgd_step
from fedcap.server import recover

ARCH = ModelArch(4, 5, 3)


def make_client(rng, n=23, arch=ARCH):
    tr = Batch(rng.standard_normal((n, arch.input_dim)), rng.integers(0, arch.num_classes, n))
    te = Batch(rng.standard_normal((8, arch.input_dim)), rng.integers(0, arch.num_classes, 8))
    return ClientRecord(0, tr, te, init_params(arch, rng))


def test_minibatches_cover_each_epoch(rng):
    batches = list(minibatches(23, 10, 3, rng))
    assert [len(b) for b in batches] == [10, 10, 3] * 3
    for e in range(3):
        assert sorted(np.concatenate(batches[3 * e:3 * e + 3]).tolist()) == list(range(23))


def test_lambda_zero_v_tracks_plain_sgd(rng):
    c = make_client(rng)
    w_hat = init_params(ARCH, rng)
    c.v = w_hat.copy()
    cfg = LocalConfig(epochs=2, batch_size=5, lr=0.05, lam=0.0)
    w, v = client_update(ARCH, c, w_hat, cfg, 99)
    ref = local_sgd(ARCH, w_hat, c.train, cfg, 99)
    assert v.tobytes() == ref.tobytes()
    assert w.tobytes() == ref.tobytes()


def test_proximal_term_zero_at_anchor(rng):
    v = rng.standard_normal(6)
    assert np.all(proximal_gradient(v, v.copy(), 0.7) == 0.0)


def test_proximal_gradient_finite_differences(rng):
    h = 1e-5
    for _ in range(10):
        v, anchor, lam = rng.standard_normal(7), rng.standard_normal(7), rng.uniform(0.1, 2.0)
        f = lambda u: 0.5 * lam * np.sum((u - anchor) ** 2)
        fd = np.array([(f(v + h * e) - f(v - h * e)) / (2 * h) for e in np.eye(7)])
        np.testing.assert_allclose(proximal_gradient(v, anchor, lam), fd, atol=1e-6, rtol=0)


def test_personal_step_uses_current_local_model(rng):
    # one mini-batch: v' = v - lr * (grad(v) + lam * (v - w_hat)), w' = w_hat - lr * grad(w_hat)
    c = make_client(rng, n=4)
    w_hat = init_params(ARCH, rng)
    cfg = LocalConfig(epochs=1, batch_size=4, lr=0.1, lam=0.5)
    w, v = client_update(ARCH, c, w_hat, cfg, 0)
    b = c.train.subset(np.random.default_rng(0).permutation(4))
    np.testing.assert_allclose(v, c.v - 0.1 * (gradient(ARCH, c.v, b) + 0.5 * (c.v - w_hat)), rtol=1e-13)
    np.testing.assert_allclose(w, w_hat - 0.1 * gradient(ARCH, w_hat, b), rtol=1e-13)


def test_client_update_deterministic(rng):
    c = make_client(rng)
    w_hat = init_params(ARCH, rng)
    a = client_update(ARCH, c, w_hat, LocalConfig(), 5)
    b = client_update(ARCH, c, w_hat, LocalConfig(), 5)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_client_update_diverges_loudly(rng):
    c = make_client(rng)
    with pytest.raises(NumericalError):
        client_update(ARCH, c, np.full(ARCH.num_params, 1e308), LocalConfig(lr=1e10), 0)


def test_compute_update_examples(rng):
    w = rng.standard_normal(5)
    assert np.all(compute_update(w, w) == 0)
    np.testing.assert_array_equal(compute_update(np.array([2.0, 3.0]), np.array([1.0, 1.0])), [1.0, 2.0])
    with pytest.raises(ConfigurationError):
        compute_update(np.zeros(2), np.zeros(3))


def test_recovery_inverts_compute_update():
    # exact for dyadic values, where subtraction then addition loses nothing
    rng = np.random.default_rng(1)
    w_hat = np.round(rng.standard_normal(50) * 1024) / 1024
    w_k = np.round(rng.standard_normal(50) * 1024) / 1024
    assert recover(w_hat, compute_update(w_k, w_hat)).tobytes() == w_k.tobytes()


def test_accuracy_examples():
    arch = ModelArch(2, 0, 2)
    x = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.1], [0.1, 3.0]])
    y = np.array([0, 1, 0, 1])
    perfect = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    assert accuracy(arch, perfect, Batch(x, y)) == 1.0
    const = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    assert accuracy(arch, const, Batch(x, y)) == 0.5
    odd = Batch(np.zeros((5, 2)), [0, 1, 0, 1, 1])
    assert abs(accuracy(arch, const, odd) - 0.5) <= 1 / 5


def test_accuracy_matches_straight_line(rng):
    arch = ModelArch(4, 0, 3)
    c = make_client(rng, arch=arch)
    for _ in range(5):
        w = rng.standard_normal(arch.num_params)
        W, b = w[:12].reshape(4, 3), w[12:]
        hits = 0
        for x, y in zip(c.test.features, c.test.labels):
            scores = [sum(x[i] * W[i, j] for i in range(4)) + b[j] for j in range(3)]
            hits += scores.index(max(scores)) == y
        assert evaluate(arch, c, w) == hits / len(c.test)


def test_local_sgd_is_sgd(rng):
    c = make_client(rng, n=6)
    w0 = init_params(ARCH, rng)
    cfg = LocalConfig(epochs=2, batch_size=4, lr=0.2)
    w = w0.copy()
    for idx in minibatches(6, 4, 2, np.random.default_rng(3)):
        w = sgd_step(w, gradient(ARCH, w, c.train.subset(idx)), 0.2)
    assert local_sgd(ARCH, w0, c.train, cfg, 3).tobytes() == w.tobytes()


def test_local_config_validation():
    with pytest.raises(ConfigurationError):
        LocalConfig(lam=-1)
    with pytest.raises(ConfigurationError):
        LocalConfig(batch_size=0)
    with pytest.raises(ConfigurationError):
        LocalConfig(lr=0)
