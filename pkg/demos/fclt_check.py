"""
Finite-n self-normalized sums against the limit
===============================================

A scaled-down version of the end-to-end check: finite-n functionals of an
MA sequence against the same functionals of the series limit, compared
by two-sample KS tests. The M1 distance between one finite path and one
limit path is shown as a descriptive number only.
"""

import numpy as np

from selfnorm import ExperimentConfig, ModelSpec, fclt_experiment, norm_seq, sample_path
from selfnorm.limit_sim import build_limit_V, sample_poisson_series
from selfnorm.m1_metric import d_m1
from selfnorm.tail_cluster import build_cluster_law
from selfnorm.verify import partial_sum_process

model = ModelSpec.ma([1.0, 0.5], 0.8)
cfg = ExperimentConfig(model, n=5000, reps=1000, seed=2,
                       functionals=("value_at_1", "sup_norm", "selfnorm_at_1"))
rep = fclt_experiment(cfg)
print(f"theta = {rep.limit['theta']:.4f}, a_n = {rep.norm_seq['a_n']:.2f}")
print(f"{'functional':>18} {'D':>7} {'crit 1%':>8} {'pass':>5}")
for name, ks in rep.ks.items():
    print(f"{name:>18} {ks['statistic']:7.4f} {ks['crit_1pct']:8.4f} {str(ks['pass_1pct']):>5}")

# one finite path and one limit path in the M1 metric
rng = np.random.default_rng(3)
ns = norm_seq(model, 2000, n_mc=200_000, seed=4)
finite = partial_sum_process(sample_path(model, 2000, rng), ns).component(0)
cl = build_cluster_law(model, rng, 20_000)
limit = build_limit_V(sample_poisson_series(cl.theta, 0.8, cl, 2000, rng), 0.8, 1.0, 0.0)
print()
print(f"d_M1(finite, limit) = {d_m1(finite, limit):.4f}  (independent draws, descriptive only)")
