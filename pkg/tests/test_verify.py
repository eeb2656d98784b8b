import math

import numpy as np
import pytest
from scipy import stats

from selfnorm.m1_metric import divide_paths, freeze_terminal
from selfnorm.models import ModelSpec, NormSeq, sample_path
from selfnorm.verify import (ExperimentConfig, TestReport, ecf_compare, fclt_experiment, karamata_check,
                             ks_critical_value, ks_two_sample, partial_sum_process,
                             self_normalized_process, small_jump_diagnostic)
from selfnorm.triples import CharTriple

SMALL = dict(n=300, reps=60, n_points=500, n_mc_cluster=5_000, n_mc_bn=50_000)


def ns_for(n, a_n=1.0, b_n=0.0):
    return NormSeq(n, a_n, b_n, a_n * b_n)


# processes

def test_partial_sum_examples():
    x = partial_sum_process([5.0, 0.0, 0.0, 0.0], ns_for(4, 5.0))
    assert float(x.component(0)(0.2)) == 0.0 and float(x.component(0)(0.25)) == 1.0
    np.testing.assert_allclose(x.terminal, [1.0, 1.0])
    stair = partial_sum_process(np.zeros(4), ns_for(4, 2.0, 0.5))
    np.testing.assert_allclose(stair.component(0)(np.array([0, 0.25, 0.5, 0.9, 1.0])),
                               [0, -0.5, -1.0, -1.5, -2.0])


def test_partial_sum_second_component(rng):
    X = rng.standard_cauchy(500)
    x = partial_sum_process(X, ns_for(500, 30.0, 0.01))
    assert x.component(1).is_nondecreasing()
    assert x.terminal[1] == pytest.approx(np.sum(X**2) / 900.0)
    with pytest.raises(ValueError):
        partial_sum_process(X[:-1], ns_for(500))


def test_self_normalized_examples():
    x = self_normalized_process([3.0, 4.0], ns_for(2))
    np.testing.assert_allclose(x(np.array([0.0, 0.49, 0.5, 0.99, 1.0])).ravel(), [0, 0, 0.6, 0.6, 1.4])
    one = self_normalized_process(np.eye(1, 10).ravel(), ns_for(10))
    np.testing.assert_array_equal(one(np.linspace(0.1, 1, 10)).ravel(), 1.0)
    with pytest.raises(ValueError):
        self_normalized_process(np.zeros(3), ns_for(3))


def test_self_normalized_scale_invariance(rng):
    X = rng.standard_cauchy(200)
    base = self_normalized_process(X, NormSeq(200, 1.0, 0.3, 0.3))
    scaled = self_normalized_process(7 * X, NormSeq(200, 7.0, 0.3, 2.1))
    np.testing.assert_allclose(scaled.right, base.right, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_pipeline_identity(seed):
    rng = np.random.default_rng(seed)
    model = ModelSpec.ma([1.0, -0.4], 1.3, 0.6)
    ns = NormSeq(400, 50.0, 0.02, 1.0)
    X = sample_path(model, 400, rng)
    L = partial_sum_process(X, ns)
    v, w = freeze_terminal(L.component(0), L.component(1), strict=False)
    ratio = divide_paths(v, w)
    direct = self_normalized_process(X, ns)
    grid = np.unique(np.concatenate([direct.knots, np.linspace(0, 1, 997)]))
    np.testing.assert_allclose(ratio(grid), direct(grid), atol=1e-12)
    np.testing.assert_allclose(ratio.left_limit(grid[1:]), direct.left_limit(grid[1:]), atol=1e-12)


# KS and ECF

def test_ks_examples(rng):
    a = rng.random(50)
    assert ks_two_sample(a, a).statistic == 0.0
    assert ks_two_sample(a, 2 + rng.random(70)).statistic == 1.0
    b = rng.normal(size=300)
    c = rng.normal(0.2, size=200)
    res = ks_two_sample(b, c)
    ref = stats.ks_2samp(b, c)
    assert res.statistic == pytest.approx(ref.statistic)
    assert res.pvalue == pytest.approx(ref.pvalue, rel=0.2)


def test_ks_critical_values():
    assert ks_critical_value(2000, 2000, 0.01) == pytest.approx(1.6276 / math.sqrt(1000), rel=1e-4)
    assert ks_critical_value(2000, 2000, 0.05) == pytest.approx(1.3581 / math.sqrt(1000), rel=1e-4)


def test_ks_size(rng):
    crit = ks_critical_value(2000, 2000, 0.01)
    below = [ks_two_sample(rng.standard_cauchy(2000), rng.standard_cauchy(2000)).statistic < crit
             for _ in range(200)]
    assert np.mean(below) >= 0.95


def test_ks_result_flags():
    r = ks_two_sample(np.arange(2000.0), np.arange(2000.0) + 0.5)
    assert r.pass_1pct and r.pass_5pct and r.to_dict()["pass_1pct"]


def test_ecf_zero_grid(rng):
    res = ecf_compare(rng.normal(size=10), CharTriple(0.5, 1.0, 0.0, 0.0), [0.0])
    assert res.max_error == 0.0 and res.max_excess == 0.0
    assert res.noise_floor == pytest.approx(2 / math.sqrt(10))


def test_ecf_truncation_allowance():
    t = CharTriple(1.5, 1e-12, 1e-12, 0.0)
    x = np.array([-0.1, 0.1])
    plain = ecf_compare(x, t, [1.0])
    relaxed = ecf_compare(x, t, [1.0], truncation_var=0.01)
    assert plain.max_error == pytest.approx(1 - math.cos(0.1))
    assert relaxed.max_excess < 0.0 < plain.max_excess


# experiment

def test_config_validation():
    m = ModelSpec.iid(0.8)
    for kw in (dict(reps=1), dict(n=0), dict(functionals=()), dict(functionals=("nope",))):
        with pytest.raises(ValueError):
            ExperimentConfig(m, **kw)


def test_low_power_smallest_run():
    rep = fclt_experiment(ExperimentConfig(ModelSpec.iid(0.8), **dict(SMALL, reps=2)))
    assert rep.flags["low_power"]
    ks = rep.ks["selfnorm_at_1"]
    assert 0.0 <= ks["statistic"] <= 1.0 and math.isfinite(ks["crit_1pct"])


def test_experiment_determinism():
    cfg = ExperimentConfig(ModelSpec.ma([1.0, 0.5], 1.2), functionals=("value_at_1", "selfnorm_at_1"),
                           seed=5, **SMALL)
    a = fclt_experiment(cfg)
    b = fclt_experiment(ExperimentConfig(**{**cfg.__dict__, "threads": 3}))
    assert a.to_json() == b.to_json()
    c = fclt_experiment(ExperimentConfig(**{**cfg.__dict__, "seed": 6}))
    assert a.to_json() != c.to_json()
    assert isinstance(a, TestReport) and a.flags["low_power"] == (SMALL["reps"] < 100)
    assert set(a.ks) == {"value_at_1", "selfnorm_at_1", "w_at_1", "w_at_1_vs_stable"}


def test_all_functionals_report():
    from selfnorm.verify import FUNCTIONALS
    rep = fclt_experiment(ExperimentConfig(ModelSpec.iid(1.5), functionals=FUNCTIONALS, **SMALL))
    for f in FUNCTIONALS:
        assert len(rep.samples[f"finite_{f}"]) == len(rep.samples[f"limit_{f}"]) == SMALL["reps"]
    assert rep.limit["u_min"] == 1e-2 and "triple_V" in rep.limit
    d = rep.to_dict()
    assert d["config"]["model"]["alpha"] == 1.5


def test_centering_negligible_for_small_alpha():
    base = dict(n=10_000, reps=2000, seed=3)
    m = ModelSpec.iid(0.5)
    with_c = fclt_experiment(ExperimentConfig(m, **base))
    without = fclt_experiment(ExperimentConfig(m, centering=False, **base))
    assert with_c.ks["selfnorm_at_1"]["pass_1pct"] == without.ks["selfnorm_at_1"]["pass_1pct"]


# diagnostics

def test_small_jump_examples(rng):
    m = ModelSpec.iid(0.5)
    assert small_jump_diagnostic(m, 500, [0.5, 0.1], 1e6, 20, rng, n_mc=20_000) == {0.5: 0.0, 0.1: 0.0}
    # beyond the largest realized jump the indicator saturates and the table is flat
    r1 = small_jump_diagnostic(m, 500, [1e8, 1e9], 0.5, 30, np.random.default_rng(1), n_mc=20_000)
    assert r1[1e8] == r1[1e9]
    table = small_jump_diagnostic(m, 2000, [1.0, 0.1, 0.01], 0.2, 200, rng, n_mc=200_000)
    assert table[1.0] >= table[0.1] >= table[0.01]
    assert table[0.01] < 0.05
    with pytest.raises(ValueError):
        small_jump_diagnostic(m, 10, [0.5], 0.0, 2, rng)


@pytest.mark.parametrize("alpha,u,limit", [(1.0, 0.5, 0.5), (0.5, 1.0, 1 / 3)])
def test_karamata_examples(alpha, u, limit):
    emp, lim, rel = karamata_check(ModelSpec.iid(alpha), 10**6, u)
    assert lim == pytest.approx(limit) and rel < 0.02
    assert rel == pytest.approx(abs(emp - lim) / lim)


def test_karamata_limit_monotone_and_errors():
    m = ModelSpec.iid(1.2)
    lims = [karamata_check(m, 1000, u)[1] for u in (1.0, 0.5, 0.25, 0.1)]
    assert np.all(np.diff(lims) < 0)
    with pytest.raises(ValueError):
        karamata_check(ModelSpec.ma([1.0, 0.5], 1.0), 100, 0.5)
    with pytest.raises(ValueError):
        karamata_check(m, 100, 1.5)
