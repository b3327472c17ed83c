"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
Seeds 0, 1 and 2 are used wherever a criterion asks for three seeds.
"""
import functools
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from test_aggregation import brute_krum_scores, sort_median, sort_trimmed  # noqa: E402
from test_attacks import grid_gamma, view_of  # noqa: E402
from test_model import ARCHS, central_fd, random_batch  # noqa: E402

from fedcap.aggregation import (agg_median, agg_rfa, agg_trimmed_mean,  # noqa: E402
                                geometric_median_objective, krum_scores)
from fedcap.attacks import (AttackSpec, _optimized, apply_attack, lie_z_max,  # noqa: E402
                            minmax_violation, minsum_violation, poison_lie)
from fedcap.client import proximal_gradient  # noqa: E402
from fedcap.harness import ARTIFACTS, ExperimentConfig, run, simulate  # noqa: E402
from fedcap.model import forward_loss, gradient  # noqa: E402

SEEDS = (0, 1, 2)
RESULTS: list[str] = []
_START = time.perf_counter()


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)


@functools.lru_cache(maxsize=None)
def run_cached(seed: int, rounds: int, **flat):
    return simulate(ExperimentConfig(rounds=rounds, seed=seed).replace(**flat))


def test_criterion_1_detection():
    t0 = time.perf_counter()
    bad = []
    for kind in ("SF", "MR", "IPM"):
        for seed in SEEDS:
            s = run_cached(seed, 30, **{"attack.kind": kind}).summary
            if not (s["fpr"] == 0.0 and s["fnr"] == 0.0):
                bad.append(f"{kind}/seed{seed}: FPR={s['fpr']} FNR={s['fnr']}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    report(1, ok, f"SF/MR/IPM x 3 seeds blacklist every attacker with FPR 0 "
                  f"({elapsed:.1f}s){'; ' + ', '.join(bad) if bad else ''}")
    assert ok


def test_criterion_2_lie():
    parts, ok = [], True
    for seed in SEEDS:
        lie = run_cached(seed, 30, **{"attack.kind": "LIE"}).summary
        ben = run_cached(seed, 30).summary
        gap = 100 * (ben["tacc"] - lie["tacc"])
        ok &= lie["fpr"] == 0.0 and gap <= 3.0
        parts.append(f"seed{seed} FPR={lie['fpr']:.0f} FNR={lie['fnr']:.0f} TAcc {lie['tacc']:.3f} "
                     f"vs benign {ben['tacc']:.3f}")
    report(2, ok, "LIE keeps FPR 0 and TAcc within 3 points; " + "; ".join(parts))
    assert ok


def test_criterion_3_norm_growth():
    ratios = []
    for seed in SEEDS:
        series = run_cached(seed, 20, **{"method.name": "mean", "attack.kind": "SF"}).summary[
            "norm_series"]["malicious"]
        ratios.append(series[19] / series[0])
    ok = all(r > 2.0 for r in ratios)
    report(3, ok, "mean+SF malicious norm round 20 / round 1 = "
                  + ", ".join(f"{r:.2f}" for r in ratios) + " (need > 2 per seed)")
    assert ok


def test_criterion_4_customization():
    parts, ok = [], True
    for seed in SEEDS:
        res = run_cached(seed, 30)
        pairs = {k: frozenset(c.train.labels.tolist()) for k, c in res.setup.clients.items()}
        weights = res.reports[4].weights
        twins_win = all(
            min(w[i] for i in w if i != k and pairs[i] == pairs[k])
            > max(w[i] for i in w if pairs[i] != pairs[k])
            for k, w in weights.items())
        mean = run_cached(seed, 30, **{"method.name": "mean"}).summary["tacc"]
        ok &= twins_win and res.summary["tacc"] >= mean
        parts.append(f"seed{seed} twins={'yes' if twins_win else 'no'} "
                     f"FedCAP {res.summary['tacc']:.3f} vs mean {mean:.3f}")
    report(4, ok, "twin weights dominate by round 5 and FedCAP TAcc >= mean TAcc; " + "; ".join(parts))
    assert ok


def test_criterion_5_aggregator_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    ok = True
    for _ in range(200):
        U = rng.standard_normal((5, 8)) * rng.uniform(0.1, 10)
        ok &= np.array_equal(agg_median(U), sort_median(U))
        ok &= np.allclose(agg_trimmed_mean(U, 1), sort_trimmed(U, 1), rtol=1e-15, atol=0)
        ok &= np.allclose(krum_scores(U, 1), brute_krum_scores(U, 1), rtol=1e-14, atol=0)
    grid = np.linspace(-6, 6, 120001)
    worst = 0.0
    for _ in range(20):
        U = rng.standard_normal((int(rng.integers(2, 8)), 1)) * 2
        best = np.abs(grid[:, None] - U[:, 0][None]).mean(axis=1).min()
        worst = max(worst, geometric_median_objective(agg_rfa(U), U) - best)
    xs = np.linspace(-4, 4, 801)
    P = np.stack([a.ravel() for a in np.meshgrid(xs, xs)], axis=1)
    for _ in range(5):
        U = rng.standard_normal((int(rng.integers(3, 7)), 2))
        z0 = P[np.argmin(np.linalg.norm(P[:, None] - U[None], axis=-1).mean(axis=1))]
        f = np.linspace(-0.01, 0.01, 401)
        Q = z0 + np.stack([a.ravel() for a in np.meshgrid(f, f)], axis=1)
        best = np.linalg.norm(Q[:, None] - U[None], axis=-1).mean(axis=1).min()
        worst = max(worst, geometric_median_objective(agg_rfa(U), U) - best)
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and worst <= 1e-6 and elapsed < 30
    report(5, ok, f"median/trimmed/Krum match oracles on 200 instances; RFA excess objective "
                  f"{worst:.1e} (<= 1e-6); {elapsed:.1f}s")
    assert ok


def test_criterion_6_attack_invariants():
    rng = np.random.default_rng(6)
    lie_ok = True
    for _ in range(100):
        n = int(rng.integers(5, 60))
        m = int(rng.integers(1, max(2, n // 2)))
        U = rng.standard_normal((int(rng.integers(2, 8)), 6))
        z = abs(lie_z_max(n, m))
        out = poison_lie(view_of(U), n, m)
        mu, sd = U.mean(axis=0), U.std(axis=0)
        lie_ok &= bool(np.all(np.abs(out - mu) <= z * sd + 1e-12))
    slack, gap = np.inf, 0.0
    for _ in range(20):
        U = rng.standard_normal((5, 8))
        for kind, viol in (("minmax", minmax_violation), ("minsum", minsum_violation)):
            d_m, gamma = _optimized(view_of(U), viol)
            slack = min(slack, -viol(d_m, U))
            gap = max(gap, abs(gamma - grid_gamma(U, kind)))
    ipm_ok = True
    for _ in range(100):
        n = int(rng.integers(3, 30))
        m = int(rng.integers(1, n))
        honest = {i: rng.standard_normal(6) for i in range(n)}
        mal = set(rng.choice(n, size=m, replace=False).tolist())
        out = apply_attack(AttackSpec("IPM", knowledge="full"), honest, mal, n)
        benign = np.mean([honest[i] for i in range(n) if i not in mal], axis=0)
        ipm_ok &= float(np.mean(list(out.values()), axis=0) @ benign) < 0
    ok = lie_ok and slack >= -1e-9 and gap <= 1e-2 and ipm_ok
    report(6, ok, f"LIE bound {'held' if lie_ok else 'violated'}; Min-Max/Min-Sum slack {slack:.1e}, "
                  f"gamma gap {gap:.1e}; IPM inner product {'negative' if ipm_ok else 'not negative'}")
    assert ok


def test_criterion_7_gradients():
    rng = np.random.default_rng(7)
    worst = 0.0
    for arch in ARCHS:
        for _ in range(20):
            w = rng.standard_normal(arch.num_params)
            b = random_batch(rng, arch)
            g = gradient(arch, w, b)
            fd = central_fd(lambda u: forward_loss(arch, u, b), w)
            rel = np.abs(g - fd) / np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-5)
            worst = max(worst, float(rel.max()))
    prox = 0.0
    for _ in range(10):
        v, a, lam = rng.standard_normal(7), rng.standard_normal(7), rng.uniform(0.1, 2)
        f = lambda u: 0.5 * lam * np.sum((u - a) ** 2)
        fd = np.array([(f(v + 1e-5 * e) - f(v - 1e-5 * e)) / 2e-5 for e in np.eye(7)])
        prox = max(prox, float(np.abs(proximal_gradient(v, a, lam) - fd).max()))
    ok = worst <= 1e-4 and prox <= 1e-6
    report(7, ok, f"model gradient worst relative error {worst:.1e} (<= 1e-4); "
                  f"proximal term worst error {prox:.1e} (<= 1e-6)")
    assert ok


def test_criterion_8_determinism():
    same = True
    with tempfile.TemporaryDirectory() as tmp:
        for flat in ({"attack.kind": "LIE", "training.participation_ratio": 0.5},
                     {"method.name": "rfa", "method.wrapper": "bucketing", "attack.kind": "MinMax"}):
            cfg = ExperimentConfig(rounds=6, seed=3).replace(**flat)
            a, b = Path(tmp) / "a", Path(tmp) / "b"
            run(cfg, a, force=True)
            run(cfg, b, force=True)
            same &= all((a / n).read_bytes() == (b / n).read_bytes() for n in ARTIFACTS)
    report(8, same, "repeated runs produce byte-identical CSV/JSON/state artifacts")
    assert same


def test_criterion_9_runtime():
    elapsed = time.perf_counter() - _START
    ok = elapsed < 600
    report(9, ok, f"acceptance suite took {elapsed:.0f}s (< 600s)")
    assert ok


if __name__ == "__main__":
    failures = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
