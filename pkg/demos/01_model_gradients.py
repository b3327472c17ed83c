"""Flat-parameter classifiers and their gradients.

Every model in the simulator is one float64 vector.  This walk-through
builds a small relu MLP, checks its analytic gradient against central
finite differences and trains it on one synthetic shard.
"""
import io

import numpy as np

from fedcap.data import DatasetSpec, generate
from fedcap.model import (ModelArch, forward_loss, gradient, init_params, predict,
                          read_params, sgd_step, write_params)

rng = np.random.default_rng(0)
arch = ModelArch(input_dim=20, hidden_dim=32, num_classes=10, activation="relu")
w = init_params(arch, rng)
print("parameters:", arch.num_params, "layers:", arch.layers)

batch = generate(DatasetSpec(), 200, seed=1)
print("loss at init: %.4f (ln 10 = %.4f)" % (forward_loss(arch, w, batch), np.log(10)))

# central differences on a handful of coordinates
g = gradient(arch, w, batch)
h = 1e-5
for i in rng.choice(arch.num_params, size=5, replace=False):
    e = np.zeros_like(w)
    e[i] = h
    fd = (forward_loss(arch, w + e, batch) - forward_loss(arch, w - e, batch)) / (2 * h)
    print(f"  coord {i:4d}: analytic {g[i]: .6e}  finite diff {fd: .6e}")

# plain full-batch gradient descent
for step in range(300):
    w = sgd_step(w, gradient(arch, w, batch), lr=0.5)
acc = np.mean(predict(arch, w, batch.features) == batch.labels)
print("loss after 300 steps: %.4f, train accuracy %.3f" % (forward_loss(arch, w, batch), acc))

# the FCAP binary layout: magic, version byte, length, little-endian doubles
buf = io.BytesIO()
write_params(buf, w)
print("serialized bytes:", len(buf.getvalue()), "=", 13, "+ 8 *", w.size)
buf.seek(0)
assert np.array_equal(read_params(buf), w)
