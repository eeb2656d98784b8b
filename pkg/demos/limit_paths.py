"""
Series construction of the limit paths
======================================

One draw of the Poisson cluster series, the summed path ``V``, the
quadratic path ``W`` and the self-normalized ratio ``V / sqrt(W(1))``.
The truncation metadata shows how much of the series was kept.
"""

import numpy as np

from selfnorm import ModelSpec, build_cluster_law, build_limit_V, build_limit_W, sample_poisson_series
from selfnorm.m1_metric import divide_paths, freeze_terminal

rng = np.random.default_rng(1)
alpha = 1.2
model = ModelSpec.ma([1.0, 0.5], alpha, p=0.8)
p, q = model.tail_balance
cl = build_cluster_law(model, rng, 50_000)

series = sample_poisson_series(cl.theta, alpha, cl, 2000, rng, min_magnitude=0.005)
V = build_limit_V(series, alpha, p, q, u_min=0.01)
W = build_limit_W(series)
print(f"points kept: {series.n_points}, smallest magnitude {series.smallest_magnitude:.2e}")
print(f"V(1) = {float(V.terminal[0]):.4f}, W(1) = {float(W.terminal[0]):.4f}")
print(f"halving u_min moves V(1) by {V.meta['sensitivity']:+.4f}")

# the ratio path, via the same freeze and divide maps used for finite n
v, w = freeze_terminal(V, W, strict=False)
R = divide_paths(v, w)
grid = np.linspace(0, 1, 11)
print()
print(f"{'t':>5} {'V(t)':>9} {'W(t)':>9} {'ratio':>9}")
for t, a, b, r in zip(grid, V(grid).ravel(), W(grid).ravel(), R(grid).ravel()):
    print(f"{t:5.2f} {a:9.4f} {b:9.4f} {r:9.4f}")

# largest jumps of V and the clusters that produced them
order = np.argsort(series.magnitudes)[::-1][:5]
print()
for i in order:
    print(f"t = {series.times[i]:.4f}  P = {series.magnitudes[i]:.4f}  eta = {series.clusters[i].round(3)}")
