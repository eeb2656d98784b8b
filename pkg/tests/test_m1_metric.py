import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _pathgen import ramp, random_step_path, unit_step
from selfnorm.m1_metric import (completed_graph, d_m1, d_m1_exact, d_p, divide_paths, freeze_terminal,
                                uniform_dist)
from selfnorm.paths import LINEAR, CadlagPath

TOL = 1e-3


# completed graph

def test_graph_of_constant():
    g = completed_graph(CadlagPath.constant(2.0))
    assert g.t.tolist() == [0.0, 1.0] and g.z.tolist() == [2.0, 2.0]


def test_graph_of_unit_step():
    g = completed_graph(unit_step())
    assert g.vertices.tolist() == [[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [1.0, 1.0]]


def test_graph_with_two_jumps():
    g = completed_graph(CadlagPath.step([0.0, 0.3, 0.7], [0.0, 1.0, -1.0]))
    assert len(g) == 6
    assert np.all(np.diff(g.t) >= 0)
    assert g.z.tolist() == [0.0, 0.0, 1.0, 1.0, -1.0, -1.0]


def test_graph_vertex_bound(rng):
    for _ in range(20):
        x = random_step_path(rng)
        assert len(completed_graph(x)) <= 2 * x.knots.size + 2


# d_m1

def test_identity_and_constants():
    x = CadlagPath.step([0.0, 0.2, 0.9], [1.0, -1.0, 4.0])
    assert d_m1(x, x) == 0.0
    assert d_m1(CadlagPath.constant(0.0), CadlagPath.constant(3.0)) == pytest.approx(3.0, abs=TOL)
    assert d_m1_exact(CadlagPath.constant(0.0), CadlagPath.constant(3.0)) == pytest.approx(3.0)


def test_ramp_to_step_example():
    x, y = unit_step(), ramp(0.1)
    d = d_m1(x, y)
    assert 0.04 <= d <= 0.05 + TOL
    exact = d_m1_exact(x, y)
    assert exact == pytest.approx(1 / 22, rel=1e-8)
    assert exact - 1e-9 <= d <= exact + TOL


def test_ramp_to_step_decreasing():
    vals = [d_m1(unit_step(), ramp(e)) for e in (0.1, 0.05, 0.025, 0.0125)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.01


def test_refinement_is_nonincreasing(rng):
    x, y = random_step_path(rng), random_step_path(rng)
    with pytest.warns(RuntimeWarning):
        vals = [d_m1(x, y, resolution=r, tol=0.0, max_vertices=r, certify=False) for r in (64, 128, 256, 512)]
        # the reported value is the running minimum over the levels
        res = d_m1(x, y, resolution=64, tol=0.0, max_vertices=512, report=True, certify=False)
    assert res.value == min(vals)
    assert res.lower_bound <= d_m1_exact(x, y) + 1e-9


def test_report_fields():
    r = d_m1(unit_step(), ramp(0.1), report=True)
    assert r.converged and r.lower_bound <= r.value
    assert set(r.to_dict()) == {"value", "lower_bound", "resolution", "achieved_change", "converged"}


def test_non_convergence_warns():
    x = CadlagPath.step(np.linspace(0, 0.99, 100), np.tile([0.0, 1.0], 50))
    y = CadlagPath.step(np.append(0.0, np.linspace(0, 0.99, 100)[1:] + 0.005), np.tile([1.0, 0.0], 50))
    with pytest.warns(RuntimeWarning, match="did not converge"):
        r = d_m1(x, y, tol=0.0, max_vertices=256, report=True)
    assert not r.converged


def test_rejects_two_dimensional():
    x = CadlagPath.step([0.0], [[0.0, 1.0]])
    with pytest.raises(ValueError):
        d_m1(x, x)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dp_brackets_exact_value(seed):
    rng = np.random.default_rng(seed)
    x, y = random_step_path(rng, 4), random_step_path(rng, 4)
    r = d_m1(x, y, report=True)
    exact = d_m1_exact(x, y)
    assert exact - 1e-7 <= r.value <= exact + TOL + 1e-9
    assert r.lower_bound <= exact + 1e-7
    # without certification the value stays within the discretization bound
    u = d_m1(x, y, report=True, certify=False)
    assert exact - 1e-7 <= u.value and u.lower_bound <= exact + 1e-7


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_properties(seed):
    rng = np.random.default_rng(seed)
    x, y, z = (random_step_path(rng, 4) for _ in range(3))
    dxy, dyx = d_m1(x, y), d_m1(y, x)
    assert abs(dxy - dyx) <= TOL
    assert d_m1(x, z) <= dxy + d_m1(y, z) + 3 * TOL
    assert dxy <= uniform_dist(x, y) + TOL


def test_zero_distance_iff_equal():
    x = CadlagPath.step([0.0, 0.5], [0.0, 1.0])
    y = CadlagPath.step([0.0, 0.5, 0.8], [0.0, 1.0, 1.0])  # same function, redundant knot
    assert d_m1(x, y) <= TOL
    assert d_m1(x, CadlagPath.step([0.0, 0.5], [0.0, 1.01])) >= 0.01 - 1e-12


# d_p and uniform distance

def test_d_p_examples():
    x = CadlagPath.step([0.0, 0.5], [[0.0, 0.0], [1.0, 2.0]])
    assert d_p(x, x) == 0.0
    shifted = CadlagPath(x.knots, x.left + [1.0, 2.0], x.right + [1.0, 2.0])
    assert d_p(x, shifted) == pytest.approx(2.0, abs=TOL)
    with pytest.raises(ValueError):
        d_p(x, x.component(0))


def test_d_p_dominated_by_uniform(rng):
    for _ in range(20):
        a, b = random_step_path(rng), random_step_path(rng)
        c, d = random_step_path(rng), random_step_path(rng)
        t = np.union1d(a.knots, b.knots)
        x = CadlagPath.step(t, np.column_stack([a(t), b(t)]))
        s = np.union1d(c.knots, d.knots)
        y = CadlagPath.step(s, np.column_stack([c(s), d(s)]))
        assert d_p(x, y) <= uniform_dist(x, y) + TOL


def test_uniform_examples():
    assert uniform_dist(CadlagPath.constant(0.0), CadlagPath.constant(3.0)) == 3.0
    x = unit_step()
    assert uniform_dist(x, x) == 0.0
    assert uniform_dist(x, ramp(0.1)) == pytest.approx(0.5)


def test_uniform_against_dense_grid(rng):
    for _ in range(20):
        x = random_step_path(rng)
        y = CadlagPath.linear(np.linspace(0, 1, 7), rng.normal(size=7))
        t = np.linspace(0, 1, 200_001)
        dense = np.max(np.abs(x(t) - y(t)))
        exact = uniform_dist(x, y)
        assert dense <= exact + 1e-12
        assert exact - dense < 1e-3 * (1 + exact)


# division and freezing

def test_divide_examples():
    x = CadlagPath.step([0.0, 0.5], [0.0, 1.0])
    q = divide_paths(x, CadlagPath.constant(4.0))
    np.testing.assert_array_equal(q.right[:, 0], [0.0, 0.5])
    zero = divide_paths(CadlagPath.constant(0.0), CadlagPath.linear([0, 1], [1, 4]))
    assert np.all(zero.right == 0.0)
    r = divide_paths(x, CadlagPath.linear([0.0, 1.0], [1.0, 4.0]))
    assert r(1.0) == pytest.approx(0.5)
    assert r(0.4) == 0.0
    # exact at knots, jump preserved
    assert r(0.5) == pytest.approx(1 / math.sqrt(2.5)) and r.left_limit(0.5) == 0.0


@pytest.mark.parametrize("y", [CadlagPath.step([0.0, 0.5], [1.0, 2.0]),
                               CadlagPath.constant(0.0),
                               CadlagPath.linear([0.0, 1.0], [2.0, 1.0])])
def test_divide_rejects(y):
    with pytest.raises(ValueError):
        divide_paths(unit_step(), y)


def test_division_continuity():
    # x_n = ramps -> step in M1, y_n -> y uniformly: quotients converge in M1
    y = CadlagPath.linear([0.0, 1.0], [1.0, 4.0])
    target = divide_paths(unit_step(), y)
    vals = []
    for eps in (0.1, 0.05, 0.025, 0.0125):
        yn = CadlagPath.linear([0.0, 1.0], [1.0 + eps, 4.0 + eps])
        vals.append(d_m1(divide_paths(ramp(eps), yn, n_sub=32), target))
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.02


def test_freeze_examples():
    x = CadlagPath.step([0.0, 0.3], [1.0, 2.0])
    fx, fy = freeze_terminal(x, CadlagPath.linear([0.0, 1.0], [0.0, 5.0]))
    assert fx is x
    assert fy.is_continuous() and fy(0.0) == 5.0 and fy(1.0) == 5.0
    _, c = freeze_terminal(x, CadlagPath.constant(2.0))
    assert c(0.5) == 2.0


@pytest.mark.parametrize("y", [CadlagPath.linear([0.0, 0.5, 1.0], [0.0, 2.0, 1.0]),
                               CadlagPath.step([0.0, 0.5], [0.0, 1.0]),
                               CadlagPath.constant(-1.0)])
def test_freeze_rejects(y):
    with pytest.raises(ValueError):
        freeze_terminal(unit_step(), y)


def test_freeze_non_strict_allows_jumps():
    _, c = freeze_terminal(unit_step(), CadlagPath.step([0.0, 0.5], [0.0, 1.0]), strict=False)
    assert c(0.0) == 1.0
    with pytest.raises(ValueError):
        freeze_terminal(unit_step(), CadlagPath.step([0.0, 0.3, 0.6], [0.0, 1.0, 0.5]), strict=False)


def test_divide_linear_kind():
    x = CadlagPath.linear([0.0, 1.0], [0.0, 2.0])
    r = divide_paths(x, CadlagPath.linear([0.0, 1.0], [1.0, 1.0]))
    assert r.kind == LINEAR and r(0.5) == pytest.approx(1.0)
