"""Config-driven experiment runner.

Seeds: a single root seed feeds ``numpy.random.SeedSequence([root, stream,
*keys])`` where ``stream`` is a fixed integer per purpose (see ``STREAMS``)
and ``keys`` are round / client counters.  The attack stream can be given
its own root (``attack.seed``) so that re-drawing the malicious set leaves
data, initialization, sampling and batching untouched.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import aggregation as agg
from . import attacks
from .attacks import AttackSpec
from .client import ClientRecord, LocalConfig, accuracy, compute_update, local_sgd
from .data import DatasetSpec, PartitionPlan, generate, partition, unused_indices
from .errors import ConfigurationError, NumericalError
from .metrics import (ConfusionCounts, detection_metrics, flagged_ids, norm_series, r2acc,
                      round_tacc, tacc_series)
from .model import ModelArch, init_params, save_params
from .server import (BENIGN, MALICIOUS, ClientRound, CustomizationParams, RoundReport,
                     ServerState, init_state, run_round, sample_participants)

log = logging.getLogger(__name__)

STREAMS = {"data": 0, "init": 1, "sampling": 2, "batching": 3, "attack": 4, "aggregation": 5}
METHODS = ("fedcap", "mean", "multikrum", "median", "rfa", "trimmed", "clusteredfl", "fltrust")
WRAPPERS = ("none", "bucketing", "gas")
WRAPPABLE = ("mean", "multikrum", "median", "rfa", "trimmed")
FLTRUST_ROOT_SIZE = 100

ROUNDS_CSV = "rounds.csv"
SUMMARY_JSON = "summary.json"
STATE_FCAP = "state.fcap"
STATE_JSON = "state.json"
CONFIG_INI = "config.ini"
ARTIFACTS = (ROUNDS_CSV, SUMMARY_JSON, STATE_FCAP, STATE_JSON, CONFIG_INI)
CSV_VERSION = "# fedcap-rounds v1"
CSV_COLUMNS = ["round", "client_id", "role", "verdict", "update_norm", "calibrated_norm",
               "test_acc_customized", "test_acc_personalized"]


def seed_for(root: int, stream: str, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(root), STREAMS[stream], *map(int, keys)])


@dataclass(frozen=True)
class ExperimentConfig:
    data: DatasetSpec = DatasetSpec()
    partition: PartitionPlan = PartitionPlan()
    hidden_dim: int = 32
    activation: str = "relu"
    rounds: int = 50
    participation_ratio: float = 1.0
    local: LocalConfig = LocalConfig()
    method: str = "fedcap"
    wrapper: str = "none"
    bucket_size: int = 2
    gas_p: int = 10
    finetune_epochs: int = 0
    fedcap: CustomizationParams = CustomizationParams()
    attack: AttackSpec = AttackSpec()
    attack_seed: int | None = None
    seed: int = 0
    r2acc_target: float = 0.8
    out_dir: str = "runs/default"

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigurationError("rounds must be >= 1")
        if not 0.0 < self.participation_ratio <= 1.0:
            raise ConfigurationError("participation_ratio must lie in (0, 1]")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.wrapper not in WRAPPERS:
            raise ConfigurationError(f"unknown wrapper {self.wrapper!r}; choose from {WRAPPERS}")
        if self.wrapper != "none" and self.method not in WRAPPABLE:
            raise ConfigurationError(f"wrapper {self.wrapper!r} cannot wrap method {self.method!r}")
        if self.bucket_size < 1 or self.gas_p < 1 or self.finetune_epochs < 0:
            raise ConfigurationError("bucket_size and gas_p must be positive, finetune_epochs >= 0")

    @property
    def arch(self) -> ModelArch:
        return ModelArch(self.data.input_dim, self.hidden_dim, self.data.num_classes, self.activation)

    def replace(self, **flat) -> "ExperimentConfig":
        """Copy with overrides given as flat ``section.key`` names (or aliases)."""
        values = to_flat(self)
        for k, v in flat.items():
            values[resolve_key(k)] = v
        return from_flat(values)


# section.key -> (sub-config attribute or None, attribute, parser)
def _opt(parse):
    def inner(s):
        if s is None or (isinstance(s, str) and s.strip().lower() in ("", "auto", "none")):
            return None
        return parse(s)
    return inner


FIELDS: dict[str, tuple[str | None, str, Any]] = {
    "data.num_classes": ("data", "num_classes", int),
    "data.input_dim": ("data", "input_dim", int),
    "data.samples_per_client": ("data", "samples_per_client", int),
    "data.class_separation": ("data", "class_separation", float),
    "data.noise_std": ("data", "noise_std", float),
    "partition.scheme": ("partition", "scheme", str),
    "partition.num_clients": ("partition", "num_clients", int),
    "partition.classes_per_client": ("partition", "classes_per_client", int),
    "partition.dominant_fraction": ("partition", "dominant_fraction", float),
    "partition.num_groups": ("partition", "num_groups", int),
    "partition.split_ratio": ("partition", "split_ratio", float),
    "model.hidden_dim": (None, "hidden_dim", int),
    "model.activation": (None, "activation", str),
    "training.rounds": (None, "rounds", int),
    "training.participation_ratio": (None, "participation_ratio", float),
    "training.epochs": ("local", "epochs", int),
    "training.batch_size": ("local", "batch_size", int),
    "training.lr": ("local", "lr", float),
    "training.lambda": ("local", "lam", float),
    "method.name": (None, "method", str),
    "method.wrapper": (None, "wrapper", str),
    "method.bucket_size": (None, "bucket_size", int),
    "method.gas_p": (None, "gas_p", int),
    "method.finetune_epochs": (None, "finetune_epochs", int),
    "fedcap.alpha": ("fedcap", "alpha", float),
    "fedcap.phi": ("fedcap", "phi", float),
    "fedcap.t_norm": ("fedcap", "t_norm", float),
    "attack.kind": ("attack", "kind", str),
    "attack.malicious_fraction": ("attack", "malicious_fraction", float),
    "attack.mr_scale": ("attack", "mr_scale", _opt(float)),
    "attack.ipm_epsilon": ("attack", "ipm_epsilon", _opt(float)),
    "attack.knowledge": ("attack", "knowledge", str),
    "attack.seed": (None, "attack_seed", _opt(int)),
    "run.seed": (None, "seed", int),
    "run.r2acc_target": (None, "r2acc_target", float),
    "run.out_dir": (None, "out_dir", str),
}
ALIASES = {"alpha": "fedcap.alpha", "phi": "fedcap.phi", "lambda": "training.lambda",
           "t_norm": "fedcap.t_norm", "seed": "run.seed", "attack": "attack.kind",
           "method": "method.name"}


def resolve_key(key: str) -> str:
    key = ALIASES.get(key, key)
    if key not in FIELDS:
        raise ConfigurationError(f"unknown config key {key!r}")
    return key


def to_flat(cfg: ExperimentConfig) -> dict[str, Any]:
    out = {}
    for key, (sub, attr, _) in FIELDS.items():
        obj = getattr(cfg, sub) if sub else cfg
        out[key] = getattr(obj, attr)
    return out


def from_flat(values: dict[str, Any]) -> ExperimentConfig:
    top: dict[str, Any] = {}
    subs: dict[str, dict[str, Any]] = {}
    for key, raw in values.items():
        sub, attr, parse = FIELDS[resolve_key(key)]
        val = parse(raw) if isinstance(raw, str) or raw is None else raw
        if sub:
            subs.setdefault(sub, {})[attr] = val
        else:
            top[attr] = val
    base = ExperimentConfig()
    for sub, kw in subs.items():
        top[sub] = dataclasses.replace(getattr(base, sub), **kw)
    return dataclasses.replace(base, **top)


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_ini(cfg: ExperimentConfig, include_out_dir: bool = True) -> str:
    lines = []
    section = None
    for key, val in to_flat(cfg).items():
        sec, name = key.split(".")
        if key == "run.out_dir" and not include_out_dir:
            continue
        if sec != section:
            if section is not None:
                lines.append("")
            lines.append(f"[{sec}]")
            section = sec
        lines.append(f"{name} = {_fmt(val)}")
    return "\n".join(lines) + "\n"


def parse_ini(text: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    cp.read_string(text)
    flat = {}
    for sec in cp.sections():
        for name, raw in cp.items(sec):
            key = f"{sec}.{name}"
            if key not in FIELDS:
                raise ConfigurationError(f"unknown config key [{sec}] {name}")
            flat[key] = raw.strip()
    return flat


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        return from_flat(parse_ini(path.read_text()))
    except (ValueError, TypeError, configparser.Error) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"{path}: {e}") from e


def config_digest(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(to_ini(cfg, include_out_dir=False).encode()).hexdigest()


# -- building an experiment --------------------------------------------------

@dataclass
class Setup:
    arch: ModelArch
    clients: dict[int, ClientRecord]
    w0: np.ndarray
    malicious: list[int]
    root: Any  # FLTrust root shard (Batch) or None


def build(cfg: ExperimentConfig) -> Setup:
    spec, plan = cfg.data, cfg.partition
    K = plan.num_clients
    pool_size = 2 * K * spec.samples_per_client + 2 * FLTRUST_ROOT_SIZE
    pool = generate(spec, pool_size, seed_for(cfg.seed, "data", 0))
    shards = partition(pool, plan, spec.samples_per_client, seed_for(cfg.seed, "data", 1))
    rng = np.random.default_rng(seed_for(cfg.seed, "data", 2))
    spare = unused_indices(pool, shards)
    root = pool.subset(np.sort(rng.choice(spare, size=min(FLTRUST_ROOT_SIZE, spare.size), replace=False)))

    arch = cfg.arch
    w0 = init_params(arch, np.random.default_rng(seed_for(cfg.seed, "init")))
    clients = {s.client_id: ClientRecord(s.client_id, s.train, s.test, w0.copy()) for s in shards}
    malicious: list[int] = []
    if cfg.attack.kind != "none":
        attack_root = cfg.seed if cfg.attack_seed is None else cfg.attack_seed
        arng = np.random.default_rng(seed_for(attack_root, "attack"))
        malicious = attacks.select_malicious(K, cfg.attack.malicious_fraction, arng)
    return Setup(arch, clients, w0, malicious, root)


# -- baseline path -----------------------------------------------------------

def _inner(name: str, num_byzantine: int, weights=None):
    def run(U):
        n = U.shape[0]
        if name == "mean":
            return agg.agg_mean(U, weights if weights is not None and len(weights) == n else None)
        if name == "median":
            return agg.agg_median(U)
        if name == "trimmed":
            return agg.agg_trimmed_mean(U, min(num_byzantine // 2, (n - 1) // 2))
        if name == "multikrum":
            f = max(0, min(num_byzantine, n - 3))
            return agg.agg_multikrum(U, f) if n >= 3 else U.mean(axis=0)
        if name == "rfa":
            return agg.agg_rfa(U, weights if weights is not None and len(weights) == n else None)
        raise ConfigurationError(f"{name} cannot be used as an inner rule")
    return run


def baseline_aggregate(cfg: ExperimentConfig, U: np.ndarray, counts: np.ndarray,
                       expected_byzantine: int, server_update: np.ndarray | None,
                       rng: np.random.Generator) -> tuple[np.ndarray, list[int]]:
    """Aggregate the round's update matrix; returns (aggregate, flagged row indices)."""
    weights = counts / counts.sum()
    if cfg.method == "clusteredfl":
        return agg.agg_clusteredfl(U)
    if cfg.method == "fltrust":
        return agg.agg_fltrust(U, server_update), []
    if cfg.wrapper == "none":
        return _inner(cfg.method, expected_byzantine, weights)(U), []
    inner = _inner(cfg.method, expected_byzantine)
    if cfg.wrapper == "bucketing":
        return agg.wrap_bucketing(U, cfg.bucket_size, inner, rng), []
    return agg.wrap_gas(U, min(cfg.gas_p, U.shape[1]), inner), []


def baseline_round(cfg: ExperimentConfig, setup: Setup, w_glob: np.ndarray, participants: list[int],
                   t: int) -> tuple[np.ndarray, RoundReport]:
    arch, clients = setup.arch, setup.clients
    malicious = set(setup.malicious)
    honest = {}
    acc_glob = {}
    acc_local = {}
    for k in participants:
        c = clients[k]
        data = c.train
        if k in malicious and cfg.attack.kind == "LF":
            data = attacks.poison_labels(data, arch.num_classes)
        w_k = local_sgd(arch, w_glob, data, cfg.local, seed_for(cfg.seed, "batching", t, k, 0))
        honest[k] = compute_update(w_k, w_glob)
        acc_glob[k] = accuracy(arch, w_glob, c.test)
        acc_local[k] = accuracy(arch, w_k, c.test)
    uploaded = attacks.apply_attack(cfg.attack, honest, malicious, len(participants))
    U = np.stack([uploaded[k] for k in participants])
    counts = np.array([clients[k].num_train_samples for k in participants], dtype=float)
    expected = round(cfg.attack.malicious_fraction * len(participants)) if cfg.attack.kind != "none" else 0
    server_update = None
    if cfg.method == "fltrust":
        w_s = local_sgd(arch, w_glob, setup.root, cfg.local, seed_for(cfg.seed, "batching", t, 10**6))
        server_update = w_s - w_glob
    rng = np.random.default_rng(seed_for(cfg.seed, "aggregation", t))
    update, flagged_rows = baseline_aggregate(cfg, U, counts, expected, server_update, rng)
    flagged = {participants[i] for i in flagged_rows}
    rows = []
    for k in participants:
        rows.append(ClientRound(t, k, MALICIOUS if k in malicious else BENIGN,
                                MALICIOUS if k in flagged else BENIGN,
                                float(np.linalg.norm(uploaded[k])), float("nan"),
                                acc_glob[k], acc_local[k]))
    return w_glob + update, RoundReport(t, rows, {}, sorted(flagged))


# -- running -------------------------------------------------------------------

@dataclass
class RunResult:
    config: ExperimentConfig
    reports: list[RoundReport]
    summary: dict
    global_model: np.ndarray
    state: ServerState | None = None
    setup: Setup | None = None
    out_dir: Path | None = None


def _prepare_out(out_dir: Path, force: bool) -> None:
    if out_dir.exists():
        clash = [a for a in ARTIFACTS if (out_dir / a).exists()]
        if clash and not force:
            raise ConfigurationError(
                f"{out_dir} already holds run artifacts ({', '.join(clash)}); use --force to overwrite")
        for a in clash:
            (out_dir / a).unlink()
    out_dir.mkdir(parents=True, exist_ok=True)


def simulate(cfg: ExperimentConfig) -> RunResult:
    """Run the configured experiment in memory."""
    setup = build(cfg)
    K = cfg.partition.num_clients
    reports: list[RoundReport] = []
    state = None
    if cfg.method == "fedcap":
        state = init_state(setup.w0, setup.clients)
        for t in range(cfg.rounds):
            candidates = [k for k in range(K) if not state.is_blacklisted(k)]
            if not candidates:
                log.warning("round %d: every client is blacklisted; stopping", t)
                break
            parts = sample_participants(candidates, cfg.participation_ratio,
                                        np.random.default_rng(seed_for(cfg.seed, "sampling", t)))
            reports.append(run_round(state, setup.clients, parts, setup.arch, cfg.local, cfg.fedcap,
                                     cfg.attack, set(setup.malicious), seed_for(cfg.seed, "batching", t)))
        w_final = state.global_model
    else:
        w = setup.w0.copy()
        for t in range(cfg.rounds):
            parts = sample_participants(list(range(K)), cfg.participation_ratio,
                                        np.random.default_rng(seed_for(cfg.seed, "sampling", t)))
            w, rep = baseline_round(cfg, setup, w, parts, t)
            if not np.all(np.isfinite(w)):
                raise NumericalError(f"round {t}: global model became non-finite")
            reports.append(rep)
        w_final = w
    summary = summarize(cfg, setup, reports, state, w_final)
    return RunResult(cfg, reports, summary, w_final, state, setup)


# what the adversary estimates benign statistics from (IPM drops its own
# updates under full knowledge, the other attacks keep every visible update)
ATTACK_VIEWS = {"partial": "malicious clients' honest updates",
                "full": "all participants' honest updates"}


def summarize(cfg: ExperimentConfig, setup: Setup, reports: list[RoundReport],
              state: ServerState | None, w_final: np.ndarray) -> dict:
    K = cfg.partition.num_clients
    mal = setup.malicious
    benign = [k for k in range(K) if k not in set(mal)]
    series = tacc_series(reports, benign, "best")
    final = reports[-1] if reports else None
    detects = cfg.method in ("fedcap", "clusteredfl")
    if detects:
        flagged = flagged_ids(reports)
        dacc, fpr, fnr = detection_metrics(ConfusionCounts.from_sets(mal, benign, flagged))
    else:
        dacc = fpr = fnr = None
    summary = {
        "config_digest": config_digest(cfg),
        "seed": cfg.seed,
        "method": cfg.method if cfg.wrapper == "none" else f"{cfg.method}+{cfg.wrapper}",
        "attack": cfg.attack.kind,
        "attack_view": ATTACK_VIEWS[cfg.attack.knowledge],
        "rounds_completed": len(reports),
        "malicious_ids": list(mal),
        "blacklist": list(state.blacklist) if state is not None else sorted(flagged_ids(reports)) if detects else [],
        "tacc": round_tacc(final, benign, "best") if final else None,
        "tacc_customized": round_tacc(final, benign, "customized") if final else None,
        "tacc_personalized": round_tacc(final, benign, "personalized") if final else None,
        "dacc": dacc,
        "fpr": fpr,
        "fnr": fnr,
        "r2acc_target": cfg.r2acc_target,
        "r2acc": r2acc(series, cfg.r2acc_target),
        "tacc_series": series,
        "norm_series": {
            "benign": norm_series(reports, BENIGN),
            "malicious": norm_series(reports, MALICIOUS),
            "calibrated_benign": norm_series(reports, BENIGN, "calibrated_norm") if state else None,
            "calibrated_malicious": norm_series(reports, MALICIOUS, "calibrated_norm") if state else None,
        },
        "exchanges": state.exchanges if state is not None else None,
    }
    if cfg.finetune_epochs > 0 and cfg.method != "fedcap":
        ft = LocalConfig(cfg.finetune_epochs, cfg.local.batch_size, cfg.local.lr, cfg.local.lam)
        accs = [accuracy(setup.arch, local_sgd(setup.arch, w_final, setup.clients[k].train, ft,
                                               seed_for(cfg.seed, "batching", 10**6, k)),
                         setup.clients[k].test) for k in benign]
        summary["tacc_finetuned"] = float(np.mean(accs))
    return _jsonable(summary)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) else x
    if isinstance(x, np.integer):
        return int(x)
    return x


def _num(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def rounds_csv(reports: Iterable[RoundReport]) -> str:
    buf = io.StringIO()
    buf.write(CSV_VERSION + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        for r in rep.rows:
            w.writerow([r.round, r.client_id, r.role, r.verdict, _num(r.update_norm),
                        _num(r.calibrated_norm), _num(r.acc_customized), _num(r.acc_personalized)])
    return buf.getvalue()


def write_artifacts(result: RunResult, out_dir: Path) -> None:
    (out_dir / CONFIG_INI).write_text(to_ini(result.config))
    (out_dir / ROUNDS_CSV).write_text(rounds_csv(result.reports))
    (out_dir / SUMMARY_JSON).write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    state = result.state
    if state is not None:
        ids = sorted(state.recovered)
        save_params(out_dir / STATE_FCAP, state.global_model,
                    *[state.recovered[i] for i in ids], *[state.calibrated[i] for i in ids])
        side = {"round": state.round, "pool_ids": ids, "blacklist": list(state.blacklist),
                "layout": ["global"] + [f"recovered:{i}" for i in ids] + [f"calibrated:{i}" for i in ids]}
    else:
        save_params(out_dir / STATE_FCAP, result.global_model)
        side = {"round": len(result.reports), "pool_ids": [], "blacklist": [], "layout": ["global"]}
    (out_dir / STATE_JSON).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None, force: bool = False) -> RunResult:
    """Simulate and persist round CSV, summary JSON and the final checkpoint."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    _prepare_out(out, force)
    result = simulate(cfg)
    write_artifacts(result, out)
    result.out_dir = out
    return result


# -- sweeps and plot data ------------------------------------------------------

def parse_grid(text: str) -> dict[str, list[str]]:
    """``[grid]`` section of comma-separated override lists."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    cp.read_string(text)
    if cp.sections() and cp.sections() != ["grid"]:
        raise ConfigurationError("sweep file must contain only a [grid] section")
    grid = {}
    if cp.has_section("grid"):
        for key, raw in cp.items("grid"):
            grid[resolve_key(key)] = [v.strip() for v in raw.split(",") if v.strip()]
    return grid


def sweep(base: ExperimentConfig, grid: dict[str, list], out_dir: str | Path | None = None,
          force: bool = False) -> list[dict]:
    """One run per point of the cartesian product of ``grid``; writes sweep_index.json."""
    root = Path(out_dir if out_dir is not None else base.out_dir)
    keys = [resolve_key(k) for k in grid]
    points = list(itertools.product(*[grid[k] for k in grid])) if keys else [()]
    index = []
    for n, values in enumerate(points):
        overrides = dict(zip(keys, values))
        cfg = base.replace(**overrides) if overrides else base
        sub = root / f"run_{n:03d}"
        run(cfg, sub, force)
        index.append({"run": sub.name, "overrides": {k: str(v) for k, v in overrides.items()},
                      "alpha": cfg.fedcap.alpha, "phi": cfg.fedcap.phi, "lambda": cfg.local.lam,
                      "artifacts": {a: str(sub / a) for a in ARTIFACTS}})
    root.mkdir(parents=True, exist_ok=True)
    (root / "sweep_index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return index


def read_rounds(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def export_plotdata(run_dirs: Iterable[str | Path], out_path: str | Path | None = None) -> list[tuple]:
    """Long-format (run, round, metric, value) rows merged from several run directories.

    Metrics per round: ``tacc`` (better model family, benign clients) and the
    mean uploaded update norm of benign and malicious participants.
    """
    rows = []
    for d in map(Path, run_dirs):
        path = d / ROUNDS_CSV
        if not path.is_file():
            raise ConfigurationError(f"missing run directory or rounds file: {path}")
        by_round: dict[int, list[dict]] = {}
        for r in read_rounds(path):
            by_round.setdefault(int(r["round"]), []).append(r)
        for t in sorted(by_round):
            recs = by_round[t]
            ben = [r for r in recs if r["role"] == BENIGN]
            mal = [r for r in recs if r["role"] == MALICIOUS]
            fam = []
            for col in ("test_acc_customized", "test_acc_personalized"):
                vals = [float(r[col]) for r in ben if r[col] != ""]
                if vals:
                    fam.append(float(np.mean(vals)))
            if fam:
                rows.append((d.name, t, "tacc", max(fam)))
            for name, grp in (("update_norm_benign", ben), ("update_norm_malicious", mal)):
                vals = [float(r["update_norm"]) for r in grp if r["update_norm"] != ""]
                if vals:
                    rows.append((d.name, t, name, float(np.mean(vals))))
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "round", "metric", "value"])
            for r in rows:
                w.writerow([r[0], r[1], r[2], repr(r[3])])
    return rows
