"""Untargeted poisoning attacks on client updates.

Label flipping corrupts training data; every other attack rewrites the
honestly computed update after local training.  View-based attacks (LIE,
Min-Max, Min-Sum, IPM) see the updates in a :class:`BenignView`: only the
malicious clients' own updates under partial knowledge, all participants'
updates under full knowledge.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import ConfigurationError
from .model import Batch

log = logging.getLogger(__name__)

KINDS = ("none", "LF", "SF", "MR", "LIE", "MinMax", "MinSum", "IPM")
VIEW_KINDS = ("LIE", "MinMax", "MinSum", "IPM")


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    malicious_fraction: float = 0.3
    mr_scale: float | None = None  # None -> participants per round
    ipm_epsilon: float | None = None  # None -> participants per round
    knowledge: str = "partial"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown attack {self.kind!r}; choose from {KINDS}")
        if not 0.0 <= self.malicious_fraction < 0.5:
            raise ConfigurationError("malicious_fraction must lie in [0, 0.5)")
        if self.knowledge not in ("partial", "full"):
            raise ConfigurationError("knowledge must be 'partial' or 'full'")
        for name in ("mr_scale", "ipm_epsilon"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigurationError(f"{name} must be positive")


@dataclass
class BenignView:
    """Updates visible to the adversary in one round, ordered by client id."""
    updates: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def matrix(self) -> np.ndarray:
        return np.stack([u for _, u in self.updates])

    def __len__(self) -> int:
        return len(self.updates)


def select_malicious(num_clients: int, fraction: float, rng: np.random.Generator) -> list[int]:
    """The first ceil(fraction*K) ids of a seeded shuffle, returned sorted."""
    m = math.ceil(fraction * num_clients - 1e-12)
    return sorted(int(i) for i in rng.permutation(num_clients)[:m])


def build_view(honest: dict[int, np.ndarray], malicious: set[int], knowledge: str) -> BenignView:
    ids = sorted(honest) if knowledge == "full" else sorted(i for i in honest if i in malicious)
    return BenignView([(i, honest[i]) for i in ids])


def poison_labels(batch: Batch, num_classes: int) -> Batch:
    return Batch(batch.features, (batch.labels + 1) % num_classes)


def poison_sf(d: np.ndarray) -> np.ndarray:
    return -d


def poison_mr(d: np.ndarray, scale: float) -> np.ndarray:
    if not scale > 0:
        raise ConfigurationError("MR scale must be positive")
    return scale * d


def lie_z_max(n: int, m: int) -> float:
    """Deviation multiplier of the LIE attack for n participants, m of them malicious.

    Falls back to 0 (pure mean) when the attack is infeasible, i.e. n - m <= s.
    A malicious majority (s <= 0) is treated as s = 1 so that z_max stays finite.
    """
    s = max(math.floor(n / 2 + 1) - m, 1)
    if n - m <= s:
        log.warning("LIE infeasible for n=%d, m=%d; using z_max=0", n, m)
        return 0.0
    return float(norm.ppf((n - m - s) / (n - m)))


def poison_lie(view: BenignView, n: int, m: int) -> np.ndarray:
    if len(view) < 2:
        raise ConfigurationError("LIE needs at least two updates in view")
    U = view.matrix()
    mu = U.mean(axis=0)
    sigma = U.std(axis=0)
    return mu - lie_z_max(n, m) * sigma


def minmax_violation(d_m: np.ndarray, U: np.ndarray) -> float:
    """Largest distance to any view update minus the largest pairwise distance (<= 0 is feasible)."""
    pair = np.sqrt(((U[:, None, :] - U[None, :, :]) ** 2).sum(-1))
    return float(np.linalg.norm(U - d_m, axis=1).max() - pair.max())


def minsum_violation(d_m: np.ndarray, U: np.ndarray) -> float:
    """Sum of squared distances to the view minus the largest such sum of any view member."""
    pair_sq = ((U[:, None, :] - U[None, :, :]) ** 2).sum(-1)
    return float(((U - d_m) ** 2).sum() - pair_sq.sum(axis=1).max())


def halving_search(feasible, gamma: float = 10.0, tol: float = 1e-3) -> float:
    """Largest gamma found feasible by the step-halving search (0 if none)."""
    step = gamma / 2
    best = 0.0
    while step >= tol:
        if feasible(gamma):
            best = gamma
            gamma += step
        else:
            gamma -= step
        step /= 2
    return best


def _optimized(view: BenignView, violation) -> tuple[np.ndarray, float]:
    if len(view) < 2:
        raise ConfigurationError("Min-Max/Min-Sum need at least two updates in view")
    U = view.matrix()
    mu = U.mean(axis=0)
    d_p = -U.std(axis=0)
    if not np.any(d_p):
        return mu, 0.0
    gamma = halving_search(lambda g: violation(mu + g * d_p, U) <= 0.0)
    return mu + gamma * d_p, gamma


def poison_minmax(view: BenignView) -> np.ndarray:
    return _optimized(view, minmax_violation)[0]


def poison_minsum(view: BenignView) -> np.ndarray:
    return _optimized(view, minsum_violation)[0]


def ipm_coefficient(n: int, m: int, eps: float) -> float:
    """Factor relating the poisoned plain mean to the sum of honest updates."""
    if not n > m >= 1:
        raise ConfigurationError(f"IPM needs N > M >= 1 (got N={n}, M={m})")
    return (n - m * (1 + eps)) / (n * (n - m))


def poison_ipm(view: BenignView, n: int, m: int, eps: float) -> np.ndarray:
    """Update each of the m malicious clients submits.

    The honest updates are estimated by the view mean; with n - m honest
    clients near that mean, the plain average over all n participants equals
    ipm_coefficient(n, m, eps) times the honest sum.  The required malicious
    sum is split evenly, giving -eps times the honest mean per attacker.
    """
    ipm_coefficient(n, m, eps)
    if len(view) < 1:
        raise ConfigurationError("IPM needs a non-empty view")
    return -eps * view.matrix().mean(axis=0)


def apply_attack(spec: AttackSpec, honest: dict[int, np.ndarray], malicious: set[int],
                 num_participants: int) -> dict[int, np.ndarray]:
    """Uploaded updates for one round; benign entries pass through untouched."""
    out = dict(honest)
    bad = sorted(i for i in honest if i in malicious)
    if not bad or spec.kind in ("none", "LF"):
        return out
    n = num_participants
    if spec.kind == "SF":
        for i in bad:
            out[i] = poison_sf(honest[i])
        return out
    if spec.kind == "MR":
        scale = spec.mr_scale if spec.mr_scale is not None else float(n)
        for i in bad:
            out[i] = poison_mr(honest[i], scale)
        return out

    view = build_view(honest, malicious, spec.knowledge)
    m = len(bad)
    if spec.kind == "IPM":
        if m >= n:
            raise ConfigurationError("IPM needs at least one honest participant")
        eps = spec.ipm_epsilon if spec.ipm_epsilon is not None else float(n)
        if spec.knowledge == "full":
            # the adversary knows which participants are its own
            view = BenignView([(i, u) for i, u in view.updates if i not in malicious])
        d_m = poison_ipm(view, n, m, eps)
    elif len(view) < 2:
        # a lone attacker has no spread to exploit; it submits its honest update
        return out
    elif spec.kind == "LIE":
        d_m = poison_lie(view, n, m)
    elif spec.kind == "MinMax":
        d_m = poison_minmax(view)
    else:
        d_m = poison_minsum(view)
    for i in bad:
        out[i] = d_m.copy()
    return out
