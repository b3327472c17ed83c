"""FedCAP under a sign-flipping attack, round by round.

Customized aggregation keeps each client's model close to clients that
share its label distribution.  A malicious client keeps pushing away from
the models it is mixed from, so its calibrated update (recovered model
minus global model) grows until it crosses the norm threshold.
"""
import numpy as np

from fedcap import ExperimentConfig, simulate
from fedcap.server import customize_future_client
from fedcap.client import compute_update, evaluate, local_sgd

cfg = ExperimentConfig(rounds=30).replace(**{"attack.kind": "SF"})
res = simulate(cfg)
mal = set(res.setup.malicious)
print("malicious clients:", sorted(mal))

for rep in res.reports:
    ben = [r.calibrated_norm for r in rep.rows if r.role == "benign"]
    bad = [r.calibrated_norm for r in rep.rows if r.role == "malicious"]
    line = f"round {rep.round + 1:2d}  benign max {max(ben):5.2f}"
    if bad:
        line += f"  malicious min {min(bad):6.2f}"
    if rep.new_blacklist:
        line += f"  blacklisted {rep.new_blacklist}"
    print(line)
print("summary:", {k: res.summary[k] for k in ("tacc", "dacc", "fpr", "fnr")})

# customization weights: client 1 leans on its twin (same class pair)
w = res.reports[4].weights[1]
top = sorted(w.items(), key=lambda kv: -kv[1])[:3]
print("\nround 5 weights of client 1 (top 3):", [(k, round(v, 3)) for k, v in top])

# a client that never trained with the federation gets a customized model too.
# The global model is only the calibration reference: averaging models that
# specialize on different class pairs leaves it poor on most pairs.
setup = res.setup
newcomer = setup.clients[11]
probe = compute_update(local_sgd(setup.arch, res.state.global_model, newcomer.train, cfg.local, 99),
                       res.state.global_model)
w_new, weights = customize_future_client(res.state, probe, cfg.fedcap)
print("future client accuracy: customized %.3f vs global %.3f" % (
    evaluate(setup.arch, newcomer, w_new), evaluate(setup.arch, newcomer, res.state.global_model)))
