"""
Extremal index and cluster constants of MA sequences
====================================================

Monte Carlo extremal index of a few moving averages against the closed
form ``max|c_j|**alpha / sum|c_j|**alpha``, followed by the cluster
moments that enter the stable limit triples.
"""

import numpy as np

from selfnorm import ModelSpec, build_cluster_law, triple_V, triple_W

rng = np.random.default_rng(0)

cases = [([1.0], 0.8), ([1.0, 0.5], 1.0), ([1.0, 1.0], 0.5), ([1.0, 0.6, 0.3], 1.5)]
print(f"{'coeffs':>16} {'alpha':>6} {'theta':>8} {'stderr':>8} {'oracle':>8}")
for coeffs, alpha in cases:
    c = np.abs(coeffs) ** alpha
    cl = build_cluster_law(ModelSpec.ma(coeffs, alpha), rng, 100_000)
    print(f"{str(coeffs):>16} {alpha:6.2f} {cl.theta:8.4f} {cl.theta_stderr:8.4f} {c.max() / c.sum():8.4f}")

# constants of one model and the triples they define
model = ModelSpec.ma([1.0, 0.5], 1.5, p=0.7)
cl = build_cluster_law(model, rng, 200_000)
cc = cl.summary
p, q = model.tail_balance
print()
print("MA(1, 0.5), alpha = 1.5, p = 0.7")
print(f"  c_plus = {cc.c_plus:.4f}  c_minus = {cc.c_minus:.4f}  m2 = {cc.m2:.4f}")
print("  V triple:", triple_V(cl.theta, 1.5, p, q, cc).to_dict())
print("  W triple:", triple_W(cl.theta, 1.5, cc.m2).to_dict())
