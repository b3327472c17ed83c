"""Baseline robust aggregators against a cluster of benign updates and a few outliers."""
import numpy as np

from fedcap import aggregation as agg

rng = np.random.default_rng(3)
benign = rng.normal(loc=[1.0, -1.0], scale=0.2, size=(7, 2))
outliers = np.array([[8.0, 8.0], [9.0, 7.5], [7.5, 9.0]])
U = np.vstack([benign, outliers])
print("true benign mean:", np.round(benign.mean(axis=0), 3))

rules = {
    "mean": agg.agg_mean(U),
    "median": agg.agg_median(U),
    "trimmed (q=3)": agg.agg_trimmed_mean(U, 3),
    "multi-krum (f=3)": agg.agg_multikrum(U, 3),
    "rfa": agg.agg_rfa(U),
    "clusteredfl": agg.agg_clusteredfl(U)[0],
    "fltrust": agg.agg_fltrust(U, server_update=np.array([1.0, -1.0])),
    "bucketing(2) + median": agg.wrap_bucketing(U, 2, agg.agg_median, rng),
    "gas(p=2) + median": agg.wrap_gas(U, 2, agg.agg_median),
}
for name, z in rules.items():
    print(f"{name:22s} {np.round(z, 3)}")

# the geometric median objective at the RFA answer against the coordinate-wise median
print("\nRFA objective %.4f, median objective %.4f" % (
    agg.geometric_median_objective(rules["rfa"], U),
    agg.geometric_median_objective(rules["median"], U)))
print("Krum scores:", np.round(agg.krum_scores(U, 3), 2))
