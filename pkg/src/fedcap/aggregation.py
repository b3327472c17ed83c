"""Baseline robust aggregation rules and non-IID defense wrappers.

Every rule takes an (n, dim) array of client updates whose row order is
ascending client id, and returns one aggregated vector.
"""
from __future__ import annotations

import logging
import math
from typing import Callable

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .errors import ConfigurationError

log = logging.getLogger(__name__)

Aggregator = Callable[[np.ndarray], np.ndarray]


def _stack(updates) -> np.ndarray:
    U = np.asarray(updates, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] == 0:
        raise ConfigurationError(f"expected a non-empty (n, dim) array, got shape {U.shape}")
    return U


def agg_mean(updates, weights=None) -> np.ndarray:
    U = _stack(updates)
    if weights is None:
        return U.mean(axis=0)
    p = np.asarray(weights, dtype=np.float64)
    if p.shape != (U.shape[0],) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ConfigurationError("weights must be non-negative and sum to 1")
    return p @ U


def agg_median(updates) -> np.ndarray:
    return np.median(_stack(updates), axis=0)


def agg_trimmed_mean(updates, q: int) -> np.ndarray:
    U = _stack(updates)
    n = U.shape[0]
    if q < 0 or 2 * q >= n:
        raise ConfigurationError(f"cannot trim {q} from each side of {n} values")
    S = np.sort(U, axis=0)
    return S[q:n - q].mean(axis=0)


def pairwise_sq_dists(U: np.ndarray) -> np.ndarray:
    diff = U[:, None, :] - U[None, :, :]
    return (diff * diff).sum(axis=-1)


def krum_scores(updates, num_byzantine: int) -> np.ndarray:
    """Sum of squared distances from each update to its n - f - 2 nearest others."""
    U = _stack(updates)
    n = U.shape[0]
    k = n - num_byzantine - 2
    if k < 1:
        raise ConfigurationError(f"Krum needs n - f - 2 >= 1 (n={n}, f={num_byzantine})")
    D = pairwise_sq_dists(U)
    scores = np.empty(n)
    for i in range(n):
        others = np.sort(np.delete(D[i], i))
        scores[i] = others[:k].sum()
    return scores


def agg_multikrum(updates, num_byzantine: int, q: int | None = None) -> np.ndarray:
    """Mean of the q lowest-scoring updates (q defaults to n - f)."""
    U = _stack(updates)
    q = U.shape[0] - num_byzantine if q is None else q
    if not 1 <= q <= U.shape[0]:
        raise ConfigurationError(f"Multi-Krum q={q} out of range")
    chosen = np.argsort(krum_scores(U, num_byzantine), kind="stable")[:q]
    return U[np.sort(chosen)].mean(axis=0)


def geometric_median_objective(z: np.ndarray, updates, weights=None) -> float:
    U = _stack(updates)
    w = np.full(U.shape[0], 1.0 / U.shape[0]) if weights is None else np.asarray(weights, float)
    return float(w @ np.linalg.norm(U - z, axis=1))


def agg_rfa(updates, weights=None, floor: float = 1e-8, max_iter: int = 100,
            tol: float = 1e-9) -> np.ndarray:
    """Weighted geometric median by smoothed Weiszfeld iterations.

    Weiszfeld crawls when the median sits on an input point, so the result
    is the best of the final iterate and the inputs themselves.
    """
    U = _stack(updates)
    w = np.full(U.shape[0], 1.0 / U.shape[0]) if weights is None else np.asarray(weights, float)
    w = w / w.sum()
    z = w @ U
    for _ in range(max_iter):
        beta = w / np.maximum(floor, np.linalg.norm(U - z, axis=1))
        z_new = beta @ U / beta.sum()
        moved = np.linalg.norm(z_new - z)
        z = z_new
        if moved < tol:
            break
    at_inputs = [geometric_median_objective(u, U, w) for u in U]
    best = int(np.argmin(at_inputs))
    if at_inputs[best] < geometric_median_objective(z, U, w):
        return U[best].copy()
    return z


def cosine_matrix(U: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(U, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    S = (U / safe[:, None]) @ (U / safe[:, None]).T
    S[norms == 0, :] = 0.0
    S[:, norms == 0] = 0.0
    np.fill_diagonal(S, 1.0)
    return np.clip(S, -1.0, 1.0)


def two_clusters(U: np.ndarray) -> np.ndarray | None:
    """Cluster labels (0/1) from complete-linkage agglomeration on cosine distance.

    Returns None when all updates point the same way (no meaningful split).
    """
    n = U.shape[0]
    if n < 2:
        return None
    S = cosine_matrix(U)
    D = 1.0 - S
    np.fill_diagonal(D, 0.0)
    D = (D + D.T) / 2
    if D.max() < 1e-12:
        return None
    Z = linkage(squareform(D, checks=False), method="complete")
    labels = fcluster(Z, t=2, criterion="maxclust") - 1
    if labels.max() == 0:
        return None
    return labels


def agg_clusteredfl(updates) -> tuple[np.ndarray, list[int]]:
    """Mean of the larger of two cosine clusters; returns (aggregate, flagged row indices)."""
    U = _stack(updates)
    labels = two_clusters(U)
    if labels is None:
        return U.mean(axis=0), []
    S = cosine_matrix(U)
    sizes = [int((labels == c).sum()) for c in (0, 1)]
    if sizes[0] != sizes[1]:
        bad = int(np.argmin(sizes))
    else:
        def cohesion(c):
            idx = np.flatnonzero(labels == c)
            if idx.size < 2:
                return 1.0
            sub = S[np.ix_(idx, idx)]
            return (sub.sum() - idx.size) / (idx.size * (idx.size - 1))
        bad = 0 if cohesion(0) < cohesion(1) else 1
    flagged = np.flatnonzero(labels == bad).tolist()
    keep = labels != bad
    return U[keep].mean(axis=0), flagged


def agg_fltrust(updates, server_update: np.ndarray) -> np.ndarray:
    U = _stack(updates)
    d0 = np.asarray(server_update, dtype=np.float64)
    n0 = np.linalg.norm(d0)
    norms = np.linalg.norm(U, axis=1)
    if n0 == 0:
        return d0.copy()
    ok = norms > 0
    trust = np.zeros(U.shape[0])
    trust[ok] = np.maximum(0.0, (U[ok] @ d0) / (norms[ok] * n0))
    if trust.sum() == 0:
        return d0.copy()
    rescaled = np.zeros_like(U)
    rescaled[ok] = U[ok] * (n0 / norms[ok])[:, None]
    return trust @ rescaled / trust.sum()


def wrap_bucketing(updates, s: int, inner: Aggregator, rng: np.random.Generator) -> np.ndarray:
    """Average shuffled groups of ``s`` updates, then aggregate the bucket means."""
    U = _stack(updates)
    if s < 1:
        raise ConfigurationError("bucket size must be positive")
    order = rng.permutation(U.shape[0])
    means = np.stack([U[order[i:i + s]].mean(axis=0) for i in range(0, U.shape[0], s)])
    return inner(means)


def gas_scores(updates, p: int, inner: Aggregator) -> np.ndarray:
    U = _stack(updates)
    if not 1 <= p <= U.shape[1]:
        raise ConfigurationError(f"GAS needs 1 <= p <= dim (p={p}, dim={U.shape[1]})")
    scores = np.zeros(U.shape[0])
    for part in np.array_split(np.arange(U.shape[1]), p):
        sub = U[:, part]
        scores += np.linalg.norm(sub - inner(sub), axis=1)
    return scores


def gas_selection(updates, p: int, inner: Aggregator) -> np.ndarray:
    """Row indices of the ceil(n/2) lowest-scoring updates, ties by lower index."""
    scores = gas_scores(updates, p, inner)
    keep = math.ceil(scores.size / 2)
    return np.sort(np.argsort(scores, kind="stable")[:keep])


def wrap_gas(updates, p: int, inner: Aggregator) -> np.ndarray:
    U = _stack(updates)
    return U[gas_selection(U, p, inner)].mean(axis=0)
