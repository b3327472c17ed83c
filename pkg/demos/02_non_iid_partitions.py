"""Synthetic Gaussian-mixture data and the three ways to split it across clients."""
import numpy as np

from fedcap.data import DatasetSpec, PartitionPlan, generate, partition

spec = DatasetSpec()
K = 20
pool = generate(spec, 2 * K * spec.samples_per_client, seed=0)
print("pool:", pool.features.shape, "class counts:", np.bincount(pool.labels))


def histogram(shard):
    return np.bincount(shard.train.labels, minlength=spec.num_classes)


# pathological: two classes per client, and class pairs repeat every K/2 clients
shards = partition(pool, PartitionPlan(scheme="pathological", num_clients=K), spec.samples_per_client, seed=1)
print("\npathological")
for s in shards[:3] + shards[10:13]:
    print(f"  client {s.client_id:2d} classes {s.classes}  train histogram {histogram(s)}")

# dominant mix: most samples come from one class group, the rest from anywhere
plan = PartitionPlan(scheme="dominant_mix", num_clients=K, dominant_fraction=0.8, num_groups=5)
shards = partition(pool, plan, spec.samples_per_client, seed=1)
print("\ndominant_mix")
for s in shards[:3]:
    h = histogram(s) + np.bincount(s.test.labels, minlength=spec.num_classes)
    share = h[list(s.classes)].sum() / h.sum()
    print(f"  client {s.client_id:2d} group {s.classes}  dominant share {share:.2f}")

shards = partition(pool, PartitionPlan(scheme="iid", num_clients=K), spec.samples_per_client, seed=1)
print("\niid")
print("  client 0 train histogram", histogram(shards[0]))
