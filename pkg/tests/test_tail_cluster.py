import math
import warnings

import numpy as np
import pytest

from selfnorm.models import ModelSpec, sample_path
from selfnorm.tail_cluster import (ClusterLaw, TailProcessModel, build_cluster_law, cluster_constants,
                                   extremal_index, sample_cluster, sample_clusters, sample_tail_process)


def theta_oracle(coeffs, alpha):
    w = np.abs(np.asarray(coeffs, dtype=float)) ** alpha
    return float(w.max() / w.sum())


# tail process

def test_iid_tail_process_is_single_point(rng):
    tp = TailProcessModel(ModelSpec.iid(1.2, 0.5), window=2)
    y = sample_tail_process(tp, rng, size=1000)
    assert y.shape == (1000, 5)
    assert np.all(y[:, [0, 1, 3, 4]] == 0.0)
    assert np.all(np.abs(y[:, 2]) >= 1.0)


def test_anchor_probabilities():
    tp = TailProcessModel(ModelSpec.ma([1.0, 0.5], 1.0))
    np.testing.assert_allclose(tp.anchor_probs, [2 / 3, 1 / 3])
    assert tp.lags.tolist() == [-1, 0, 1]
    with pytest.raises(ValueError):
        TailProcessModel(ModelSpec.ma([1.0, 0.5], 1.0), window=0)


def test_tail_process_marginal(rng):
    for alpha in (0.5, 1.5):
        tp = TailProcessModel(ModelSpec.ma([1.0, 0.7, 0.2], alpha))
        y0 = sample_tail_process(tp, rng, size=1_000_000)[:, tp.window]
        p_hat = np.mean(np.abs(y0) > 2.0)
        assert abs(p_hat - 2**-alpha) < 3 * math.sqrt(2**-alpha * (1 - 2**-alpha) / y0.size)


def test_tail_process_against_conditional_oracle(rng):
    # condition the MA path on a large |X_0| and compare the lag ratios with the tail process
    model = ModelSpec.ma([1.0, 0.5], 1.0)
    x = sample_path(model, 3, rng, size=20_000_000)
    x0 = x[:, 1]
    thr = np.quantile(np.abs(x0), 0.999)
    sel = np.abs(x0) > thr
    fwd = x[sel, 2] / x0[sel]
    back = x[sel, 0] / x0[sel]

    tp = TailProcessModel(model)
    y = sample_tail_process(tp, rng, size=200_000)
    y_fwd = y[:, 2] / y[:, 1]
    y_back = y[:, 0] / y[:, 1]
    # tail process: (Y_-1/Y_0, Y_1/Y_0) is (0, 1/2) w.p. 2/3 and (2, 0) w.p. 1/3
    assert set(np.round(y_fwd, 12)) == {0.0, 0.5}
    assert np.mean(y_fwd == 0.5) == pytest.approx(2 / 3, abs=0.005)
    assert np.all((y_back == 2.0) == (y_fwd == 0.0))

    n = sel.sum()
    near_half = np.mean(np.abs(fwd - 0.5) < 0.25)
    assert abs(near_half - 2 / 3) < 3 * math.sqrt(2 / 9 / n) + 0.01
    near_two = np.mean(np.abs(back - 2.0) < 1.0)
    assert abs(near_two - 1 / 3) < 3 * math.sqrt(2 / 9 / n) + 0.01


# extremal index

def test_extremal_index_iid_is_one(rng):
    theta, se = extremal_index(TailProcessModel(ModelSpec.iid(0.7)), 1000, rng)
    assert theta == 1.0 and se == 0.0


@pytest.mark.parametrize("coeffs,alpha", [([1.0, 0.5], 1.0), ([1.0, 1.0], 0.5), ([0.3, 1.0, 0.6], 1.5)])
def test_extremal_index_closed_form(rng, coeffs, alpha):
    theta, se = extremal_index(TailProcessModel(ModelSpec.ma(coeffs, alpha)), 100_000, rng)
    assert abs(theta - theta_oracle(coeffs, alpha)) < 0.01
    assert se < 0.002


def test_extremal_index_frozen_values():
    assert theta_oracle([1.0, 0.5], 1.0) == pytest.approx(2 / 3)
    assert theta_oracle([1.0, 1.0], 0.5) == pytest.approx(1 / 2)


# clusters

def test_iid_cluster_is_unit_point(rng):
    tp = TailProcessModel(ModelSpec.iid(1.0, 0.4))
    eta = sample_clusters(tp, 5000, rng)
    assert eta.shape == (5000, 1)
    assert set(np.unique(eta)) == {-1.0, 1.0}
    assert sample_cluster(tp, rng).shape == (1,)


def test_ma_cluster_enumeration(rng):
    tp = TailProcessModel(ModelSpec.ma([1.0, 0.5], 1.0))
    eta = sample_clusters(tp, 20_000, rng)
    assert np.all(np.abs(eta).max(axis=1) == 1.0)
    np.testing.assert_array_equal(np.sort(eta, axis=1)[:, 1:], np.tile([0.5, 1.0], (eta.shape[0], 1)))
    np.testing.assert_allclose(eta.sum(axis=1), 1.5)


def test_acceptance_rate_matches_theta(rng):
    tp = TailProcessModel(ModelSpec.ma([0.6, 1.0, 0.8], 1.2))
    _, proposals = sample_clusters(tp, 50_000, rng, return_proposals=True)
    # proposals include unused accepted draws of the last batch; compare with a
    # single fixed batch instead
    y = sample_tail_process(tp, rng, size=100_000)
    rate = np.mean(np.abs(y[:, : tp.window]).max(axis=1) <= 1.0)
    theta, se = extremal_index(tp, 100_000, rng)
    assert abs(rate - theta) < 3 * math.hypot(se, math.sqrt(rate * (1 - rate) / 1e5))
    assert proposals >= 50_000


def test_same_sign_clusters(rng):
    for p in (0.0, 1.0, 0.5):
        tp = TailProcessModel(ModelSpec.ma([1.0, 0.3, 0.9], 0.8, p))
        eta = sample_clusters(tp, 20_000, rng)
        nz = np.where(eta != 0, np.sign(eta), np.nan)
        assert np.all(np.nanmin(nz, axis=1) == np.nanmax(nz, axis=1))


def test_mixed_sign_model_warns():
    with pytest.warns(UserWarning, match="mixed sign"):
        TailProcessModel(ModelSpec.ma([1.0, -0.5], 1.0))


# constants

def test_iid_constants_exact(rng):
    cc = cluster_constants(TailProcessModel(ModelSpec.iid(0.7)), 0.7, 1000, rng)
    assert (cc.c_plus, cc.c_minus, cc.m2) == (1.0, 0.0, 1.0)
    assert cc.log_term is None


def test_iid_two_sided_constants(rng):
    cc = cluster_constants(TailProcessModel(ModelSpec.iid(1.0, 0.3)), 1.0, 100_000, rng)
    assert abs(cc.c_plus - 0.3) < 3 * cc.std_errors["c_plus"]
    assert abs(cc.c_minus - 0.7) < 3 * cc.std_errors["c_minus"]
    assert cc.m2 == 1.0
    assert cc.log_term == 0.0


def test_ma_constants_enumeration(rng):
    cl = build_cluster_law(ModelSpec.ma([1.0, 0.5], 1.0), rng, n_mc=100_000)
    cc = cl.summary
    assert cc.c_plus == pytest.approx(1.5)
    assert cc.c_minus == 0.0
    assert cc.m2 == pytest.approx(math.sqrt(1.25))
    # eta = (1, 0.5): log terms 1*log 1.5 + 0.5*log 3
    assert cc.log_term == pytest.approx(math.log(1.5) + 0.5 * math.log(3.0))
    assert cc.n_samples == 100_000


def test_log_term_zero_convention(rng):
    tp = TailProcessModel(ModelSpec.ma([1.0, 0.5], 1.0), window=3)
    cc = cluster_constants(tp, 1.0, 1000, rng)
    assert math.isfinite(cc.log_term)


def test_tail_balance_identities(rng):
    # theta E[sum sign(eta)|eta|^alpha] = p - q and theta E[sum |eta|^alpha] = 1
    model = ModelSpec.ma([1.0, 0.4, 0.7], 1.5, p=0.7)
    cl = build_cluster_law(model, rng, n_mc=200_000)
    eta = cl.sample(200_000, rng)
    p, q = model.tail_balance
    assert cl.theta * cl.summary.sign_moment == pytest.approx(p - q, abs=0.01)
    assert cl.theta * np.mean((np.abs(eta) ** 1.5).sum(axis=1)) == pytest.approx(1.0, abs=0.01)


def test_moment_ordering(rng):
    for alpha in (0.5, 1.0):
        cc = build_cluster_law(ModelSpec.ma([1.0, 0.8, 0.3], alpha), rng, 50_000).summary
        assert cc.m2 <= cc.abs_moment + 3 * cc.std_errors["abs_moment"] + 1e-12
        assert cc.c_plus + cc.c_minus <= cc.abs_moment + 1e-12
        # same-signed clusters: |sum eta| = sum |eta|
        assert cc.m2 <= cc.c_plus + cc.c_minus + 1e-12


def test_validation(rng):
    tp = TailProcessModel(ModelSpec.iid(1.0))
    with pytest.raises(ValueError):
        cluster_constants(tp, 2.0, 10, rng)
    with pytest.raises(ValueError):
        extremal_index(tp, 0, rng)
    with pytest.raises(ValueError):
        ClusterLaw(tp, 0.0)


def test_reproducible(rng):
    m = ModelSpec.ma([1.0, 0.5], 0.9, 0.6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = build_cluster_law(m, np.random.default_rng(1), 10_000)
        b = build_cluster_law(m, np.random.default_rng(1), 10_000)
    assert a.theta == b.theta and a.summary == b.summary
