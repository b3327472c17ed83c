"""Synthetic Gaussian-cluster tasks and non-IID client partitioning."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .model import Batch

SCHEMES = ("pathological", "dominant_mix", "iid")


@dataclass(frozen=True)
class DatasetSpec:
    num_classes: int = 10
    input_dim: int = 20
    samples_per_client: int = 200
    class_separation: float = 3.0
    noise_std: float = 1.0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be >= 2")
        if self.input_dim < 1:
            raise ConfigurationError("input_dim must be positive")
        if self.samples_per_client < 20:
            raise ConfigurationError("samples_per_client must be >= 20")
        if not self.class_separation > 0:
            raise ConfigurationError("class_separation must be positive")
        if not self.noise_std > 0:
            raise ConfigurationError("noise_std must be positive")


@dataclass(frozen=True)
class PartitionPlan:
    scheme: str = "pathological"
    num_clients: int = 20
    classes_per_client: int = 2
    dominant_fraction: float = 0.8
    num_groups: int = 5
    split_ratio: float = 0.75

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown partition scheme {self.scheme!r}")
        if self.num_clients < 1:
            raise ConfigurationError("num_clients must be positive")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigurationError("split_ratio must lie in (0, 1)")
        if not 0.0 < self.dominant_fraction < 1.0:
            raise ConfigurationError("dominant_fraction must lie in (0, 1)")
        if self.classes_per_client < 1 or self.num_groups < 1:
            raise ConfigurationError("classes_per_client and num_groups must be positive")


@dataclass
class ClientShard:
    client_id: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    train: Batch
    test: Batch
    classes: tuple[int, ...]  # classes assigned by the plan (all classes for iid)


def class_centroids(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    """Centroids whose pairwise distance is ``class_separation`` when input_dim >= C."""
    g = rng.standard_normal((spec.input_dim, spec.num_classes))
    if spec.input_dim >= spec.num_classes:
        q, _ = np.linalg.qr(g)
        dirs = q.T
    else:
        dirs = g.T / np.linalg.norm(g.T, axis=1, keepdims=True)
    return dirs * (spec.class_separation / np.sqrt(2.0))


def generate(spec: DatasetSpec, num_samples: int, seed) -> Batch:
    """Balanced pool of ``num_samples`` labelled points drawn around seeded centroids."""
    if num_samples < spec.num_classes:
        raise ConfigurationError("pool must hold at least one sample per class")
    rng = np.random.default_rng(seed)
    centroids = class_centroids(spec, rng)
    labels = np.arange(num_samples) % spec.num_classes
    noise = rng.standard_normal((num_samples, spec.input_dim)) * spec.noise_std
    return Batch(centroids[labels] + noise, labels)


def _largest_remainder(total: int, shares: np.ndarray) -> np.ndarray:
    raw = shares / shares.sum() * total
    out = np.floor(raw).astype(int)
    short = total - out.sum()
    # stable order keeps ties on the lowest index
    order = np.argsort(-(raw - out), kind="stable")
    out[order[:short]] += 1
    return out


def _draw(class_pools: list[list[int]], label: int, count: int) -> list[int]:
    pool = class_pools[label]
    if count > len(pool):
        raise ConfigurationError(
            f"partition infeasible: class {label} needs {count} more samples, {len(pool)} left")
    taken = pool[:count]
    del pool[:count]
    return taken


def _split(idx: np.ndarray, labels: np.ndarray, split_ratio: float,
           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/test split; test size is round((1 - split_ratio) * n)."""
    n = idx.size
    n_test = int(round((1.0 - split_ratio) * n))
    classes, counts = np.unique(labels[idx], return_counts=True)
    per_class = _largest_remainder(n_test, counts.astype(float))
    test = []
    for c, k in zip(classes, per_class):
        members = idx[labels[idx] == c]
        test.extend(rng.choice(members, size=k, replace=False).tolist())
    test = np.sort(np.array(test, dtype=np.int64))
    train = np.setdiff1d(idx, test)
    return train, test


def partition(pool: Batch, plan: PartitionPlan, samples_per_client: int, seed) -> list[ClientShard]:
    rng = np.random.default_rng(seed)
    labels = pool.labels
    C = int(labels.max()) + 1
    K = plan.num_clients
    class_pools = [rng.permutation(np.flatnonzero(labels == c)).tolist() for c in range(C)]
    perm = rng.permutation(C)

    assigned: list[list[int]] = []
    classes_of: list[tuple[int, ...]] = []
    if plan.scheme == "pathological":
        cpc = plan.classes_per_client
        if cpc > C or cpc * K < C:
            raise ConfigurationError(
                f"pathological plan needs classes_per_client <= C and classes_per_client*K >= C "
                f"(got {cpc}, K={K}, C={C})")
        for k in range(K):
            cls = tuple(int(perm[(k * cpc + j) % C]) for j in range(cpc))
            counts = _largest_remainder(samples_per_client, np.ones(cpc))
            idx = []
            for c, n in zip(cls, counts):
                idx += _draw(class_pools, c, n)
            assigned.append(idx)
            classes_of.append(cls)
    elif plan.scheme == "dominant_mix":
        if plan.num_groups > C:
            raise ConfigurationError("num_groups cannot exceed num_classes")
        groups = np.array_split(perm, plan.num_groups)
        n_dom = int(round(plan.dominant_fraction * samples_per_client))
        for k in range(K):
            group = groups[k % plan.num_groups]
            # even splits; a seeded order decides which classes get the leftover samples
            counts = np.zeros(C, dtype=int)
            g_order = rng.permutation(group)
            counts[g_order] += _largest_remainder(n_dom, np.ones(group.size))
            c_order = rng.permutation(C)
            counts[c_order] += _largest_remainder(samples_per_client - n_dom, np.ones(C))
            idx = []
            for c in range(C):
                idx += _draw(class_pools, c, counts[c])
            assigned.append(idx)
            classes_of.append(tuple(int(c) for c in sorted(group)))
    else:
        total = K * samples_per_client
        avail = np.array([len(p) for p in class_pools], dtype=float)
        if total > avail.sum():
            raise ConfigurationError(f"iid plan needs {total} samples, pool has {int(avail.sum())}")
        take = _largest_remainder(total, avail)
        dealt = [i for c in range(C) for i in _draw(class_pools, c, take[c])]
        assigned = [dealt[k::K] for k in range(K)]
        classes_of = [tuple(range(C))] * K

    shards = []
    for k, idx in enumerate(assigned):
        idx = np.sort(np.array(idx, dtype=np.int64))
        train, test = _split(idx, labels, plan.split_ratio, rng)
        shards.append(ClientShard(k, train, test, pool.subset(train), pool.subset(test), classes_of[k]))
    return shards


def unused_indices(pool: Batch, shards: list[ClientShard]) -> np.ndarray:
    used = np.concatenate([np.concatenate([s.train_idx, s.test_idx]) for s in shards])
    return np.setdiff1d(np.arange(len(pool)), used)


def export_csv(path: str | Path, shards: list[ClientShard]) -> None:
    """One row per sample: client_id, split, label, features..."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        dim = shards[0].train.features.shape[1] if shards else 0
        w.writerow(["client_id", "split", "label"] + [f"x{i}" for i in range(dim)])
        for s in shards:
            for split, b in (("train", s.train), ("test", s.test)):
                for x, y in zip(b.features, b.labels):
                    w.writerow([s.client_id, split, int(y)] + [repr(float(v)) for v in x])
