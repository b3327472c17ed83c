"""FedCAP server: customized aggregation, calibration, detection and the round loop.

Round ``t`` in brief:

1. For each participant ``k`` the server takes a reference update (the
   stored calibrated update if ``k`` took part in round ``t-1``, otherwise a
   probe update computed by the client from the previous global model),
   scores it by cosine similarity against the calibrated pool, turns the
   scores into softmax weights and mixes the recovered pool into a
   customized model.
2. The new global model is the sample-weighted mean of the recovered pool.
3. Clients train (customized model + personalized model), attackers poison.
4. The server recovers each local model, calibrates it against the new
   global model and blacklists anything whose calibrated norm exceeds
   ``t_norm``.  Survivors form the pools for round ``t+1``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import attacks
from .attacks import AttackSpec
from .client import ClientRecord, LocalConfig, client_update, compute_update, evaluate, local_sgd
from .errors import ConfigurationError, NumericalError, ProtocolError
from .model import ModelArch

log = logging.getLogger(__name__)

BENIGN = "benign"
MALICIOUS = "malicious"


@dataclass(frozen=True)
class CustomizationParams:
    alpha: float = 10.0
    phi: float = 0.1
    t_norm: float = 10.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError("alpha must be non-negative")
        if not 0.0 <= self.phi < 1.0:
            raise ConfigurationError("phi must lie in [0, 1)")
        if not self.t_norm > 0:
            raise ConfigurationError("t_norm must be positive")


@dataclass
class ServerState:
    global_model: np.ndarray
    sample_counts: dict[int, int]
    round: int = 0
    recovered: dict[int, np.ndarray] = field(default_factory=dict)
    calibrated: dict[int, np.ndarray] = field(default_factory=dict)
    blacklist: list[int] = field(default_factory=list)
    exchanges: int = 0

    def check(self) -> None:
        if set(self.recovered) != set(self.calibrated):
            raise ProtocolError("recovered and calibrated pools disagree on membership")
        if set(self.blacklist) & set(self.recovered):
            raise ProtocolError("blacklisted client still in the pools")

    def is_blacklisted(self, k: int) -> bool:
        return k in self.blacklist


@dataclass
class ClientRound:
    round: int
    client_id: int
    role: str
    verdict: str
    update_norm: float
    calibrated_norm: float
    acc_customized: float
    acc_personalized: float


@dataclass
class RoundReport:
    round: int
    rows: list[ClientRound]
    weights: dict[int, dict[int, float]]
    new_blacklist: list[int]
    degenerate: bool = False


# -- customization ---------------------------------------------------------

def collect(state: ServerState, k: int, probe_update: np.ndarray | None = None) -> np.ndarray:
    """Reference update for client ``k``: pooled calibrated update or a fresh probe."""
    if state.is_blacklisted(k):
        raise ProtocolError(f"client {k} is blacklisted")
    if k in state.calibrated:
        return state.calibrated[k]
    if probe_update is None:
        raise ProtocolError(f"client {k} is new this round and sent no probe update")
    state.exchanges += 1
    return np.asarray(probe_update, dtype=np.float64)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        log.debug("zero-norm vector in cosine similarity; using 0")
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def similarity_row(d_k: np.ndarray, pool: dict[int, np.ndarray], k: int | None = None) -> dict[int, float]:
    return {i: cosine(d_k, pool[i]) for i in sorted(pool) if i != k}


def normalize_weights(sims: dict[int, float], alpha: float, phi: float,
                      self_id: int | None = None) -> dict[int, float]:
    """Softmax of alpha * similarity; with ``self_id`` that entry gets phi and the rest share 1 - phi."""
    ids = sorted(sims)
    out: dict[int, float] = {}
    if ids:
        z = alpha * np.array([sims[i] for i in ids])
        e = np.exp(z - z.max())
        p = e / e.sum()
        mass = 1.0 if self_id is None else 1.0 - phi
        out = {i: float(mass * pi) for i, pi in zip(ids, p)}
    if self_id is not None:
        out[self_id] = phi if ids else 1.0
    if not out:
        raise ConfigurationError("nothing to weight")
    return out


def customization_weights(state: ServerState, k: int, d_k: np.ndarray,
                          params: CustomizationParams) -> dict[int, float]:
    if not state.recovered:
        raise ProtocolError("empty pools; use the global model instead")
    returning = k in state.calibrated
    sims = similarity_row(d_k, state.calibrated, k)
    return normalize_weights(sims, params.alpha, params.phi, k if returning else None)


def mix(pool: dict[int, np.ndarray], weights: dict[int, float]) -> np.ndarray:
    out = np.zeros_like(next(iter(pool.values())))
    for i in sorted(weights):
        out += weights[i] * pool[i]
    return out


def customize(state: ServerState, k: int, d_k: np.ndarray, params: CustomizationParams) -> np.ndarray:
    return mix(state.recovered, customization_weights(state, k, d_k, params))


def customize_future_client(state: ServerState, probe_update: np.ndarray,
                            params: CustomizationParams) -> tuple[np.ndarray, dict[int, float]]:
    """Customized model for a client that never trained with the federation.

    The client trains on ``state.global_model`` and sends the difference;
    the server mixes its final pools exactly as for a new participant.
    """
    sims = similarity_row(np.asarray(probe_update, dtype=np.float64), state.calibrated)
    weights = normalize_weights(sims, params.alpha, params.phi)
    return mix(state.recovered, weights), weights


def update_global(state: ServerState) -> np.ndarray:
    ids = sorted(state.recovered)
    if not ids:
        raise ProtocolError("empty recovered pool")
    total = sum(state.sample_counts[i] for i in ids)
    out = np.zeros_like(state.recovered[ids[0]])
    for i in ids:
        out += (state.sample_counts[i] / total) * state.recovered[i]
    return out


# -- calibration and detection ---------------------------------------------

def recover(w_hat: np.ndarray, d_k: np.ndarray) -> np.ndarray:
    return w_hat + d_k


def calibrate(w_rec: np.ndarray, w_global: np.ndarray) -> np.ndarray:
    return w_rec - w_global


def detect(state: ServerState, k: int, w_rec: np.ndarray, d_cal: np.ndarray, t_norm: float) -> str:
    """Blacklist ``k`` if its calibrated update is too long, else pool it."""
    norm = np.linalg.norm(d_cal)
    if not np.isfinite(norm) or norm > t_norm:
        if k not in state.blacklist:
            state.blacklist.append(k)
        state.recovered.pop(k, None)
        state.calibrated.pop(k, None)
        return MALICIOUS
    state.recovered[k] = w_rec
    state.calibrated[k] = d_cal
    return BENIGN


# -- the round loop ----------------------------------------------------------

def sample_participants(candidates: list[int], ratio: float, rng: np.random.Generator) -> list[int]:
    if not candidates:
        return []
    n = max(1, int(round(ratio * len(candidates))))
    return sorted(int(i) for i in rng.choice(candidates, size=n, replace=False))


def _client_seed(seed, *keys) -> np.random.SeedSequence:
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(keys))


def run_round(state: ServerState, clients: dict[int, ClientRecord], participants: list[int],
              arch: ModelArch, cfg: LocalConfig, params: CustomizationParams,
              attack: AttackSpec = AttackSpec(), malicious: set[int] = frozenset(),
              seed=0) -> RoundReport:
    """Run one FedCAP round in place on ``state`` and the client records."""
    t = state.round
    participants = sorted(participants)
    for k in participants:
        if state.is_blacklisted(k):
            raise ProtocolError(f"blacklisted client {k} selected")
    C = arch.num_classes

    def train_data(k):
        data = clients[k].train
        if k in malicious and attack.kind == "LF":
            data = attacks.poison_labels(data, C)
        return data

    prev_global = state.global_model
    weights: dict[int, dict[int, float]] = {}
    w_hat: dict[int, np.ndarray] = {}
    degenerate = False
    if state.recovered:
        probes = {}
        for k in participants:
            if k not in state.calibrated:
                w_probe = local_sgd(arch, prev_global, train_data(k), cfg, _client_seed(seed, k, 1))
                probes[k] = compute_update(w_probe, prev_global)
        if probes and attack.kind in ("SF", "MR"):
            probes = attacks.apply_attack(attack, probes, malicious, len(participants))
        for k in participants:
            d_ref = collect(state, k, probes.get(k))
            weights[k] = customization_weights(state, k, d_ref, params)
            w_hat[k] = mix(state.recovered, weights[k])
        state.global_model = update_global(state)
    else:
        if t > 0:
            degenerate = True
            log.warning("round %d: empty pools, falling back to the last global model", t)
        for k in participants:
            w_hat[k] = prev_global.copy()
    w_glob = state.global_model

    honest: dict[int, np.ndarray] = {}
    acc_cust: dict[int, float] = {}
    acc_pers: dict[int, float] = {}
    failed: set[int] = set()
    for k in participants:
        c = clients[k]
        acc_cust[k] = evaluate(arch, c, w_hat[k])
        try:
            w_k, v_next = client_update(arch, c, w_hat[k], cfg, _client_seed(seed, k, 0), train_data(k))
        except NumericalError:
            if k not in malicious:
                raise NumericalError(f"round {t}: benign client {k} diverged") from None
            failed.add(k)
            acc_pers[k] = float("nan")
            continue
        c.v = v_next
        acc_pers[k] = evaluate(arch, c, v_next)
        honest[k] = compute_update(w_k, w_hat[k])
        state.exchanges += 1

    uploaded = attacks.apply_attack(attack, honest, malicious, len(participants))

    state.recovered = {}
    state.calibrated = {}
    rows = []
    new_black = []
    for k in participants:
        if k in failed:
            d_k = np.full_like(w_glob, np.inf)
        else:
            d_k = uploaded[k]
        w_rec = recover(w_hat[k], d_k)
        d_cal = calibrate(w_rec, w_glob)
        cal_norm = float(np.linalg.norm(d_cal))
        if k not in malicious and not np.isfinite(cal_norm):
            raise NumericalError(f"round {t}: non-finite calibrated update for benign client {k}")
        verdict = detect(state, k, w_rec, d_cal, params.t_norm)
        if verdict == MALICIOUS:
            new_black.append(k)
        rows.append(ClientRound(t, k, MALICIOUS if k in malicious else BENIGN, verdict,
                                float(np.linalg.norm(d_k)), cal_norm, acc_cust[k], acc_pers[k]))
    state.check()
    state.round = t + 1
    return RoundReport(t, rows, weights, new_black, degenerate)


def init_state(w0: np.ndarray, clients: dict[int, ClientRecord]) -> ServerState:
    return ServerState(global_model=np.array(w0, dtype=np.float64),
                       sample_counts={k: c.num_train_samples for k, c in clients.items()})
