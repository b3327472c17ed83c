"""Malicious update norms under plain averaging, and FedCAP next to the baselines."""
from fedcap import ExperimentConfig, simulate
from fedcap.metrics import norm_series

base = ExperimentConfig(rounds=20)

for seed in (0, 1, 2):
    res = simulate(base.replace(**{"method.name": "mean", "attack.kind": "SF", "run.seed": seed}))
    s = norm_series(res.reports, "malicious")
    print(f"seed {seed}: malicious update norm round 1 {s[0]:.3f}, round 20 {s[19]:.3f}, "
          f"ratio {s[19] / s[0]:.2f}")

print("\nbenign TAcc after 20 rounds under sign flipping")
for method in ("mean", "median", "trimmed", "multikrum", "rfa", "clusteredfl", "fltrust", "fedcap"):
    res = simulate(base.replace(**{"method.name": method, "attack.kind": "SF"}))
    print(f"  {method:12s} {res.summary['tacc']:.3f}")
