"""What each poisoning attack uploads, on a toy round of 10 clients with 3 attackers."""
import numpy as np

from fedcap import attacks
from fedcap.attacks import AttackSpec

rng = np.random.default_rng(0)
n, dim = 10, 6
honest = {k: rng.normal(loc=1.0, scale=0.3, size=dim) for k in range(n)}
malicious = {2, 5, 7}
benign_mean = np.mean([honest[k] for k in honest if k not in malicious], axis=0)
print("benign mean update:", np.round(benign_mean, 3))

for kind in ("SF", "MR", "LIE", "MinMax", "MinSum", "IPM"):
    for knowledge in ("partial", "full"):
        up = attacks.apply_attack(AttackSpec(kind=kind, knowledge=knowledge), honest, malicious, n)
        d = up[2]
        cos = d @ benign_mean / (np.linalg.norm(d) * np.linalg.norm(benign_mean))
        print(f"{kind:6s} {knowledge:7s} norm {np.linalg.norm(d):7.3f}  cosine to benign mean {cos: .3f}")
        if kind in ("SF", "MR"):
            break

# LIE hides inside the spread of benign coordinates
print("\nLIE z for n=10, m=3: %.4f" % attacks.lie_z_max(10, 3))

# Min-Max scales a deviation until the attacker is as far from the others as the farthest benign pair
view = attacks.build_view(honest, malicious, "full")
d_m = attacks.poison_minmax(view)
print("Min-Max constraint violation (<= 0 means feasible): %.2e"
      % attacks.minmax_violation(d_m, view.matrix()))
