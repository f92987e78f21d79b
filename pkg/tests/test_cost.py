import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochturnpike.cost import (CostParams, alpha, cheap_control_margin, dissipativity_margin,
                                running_cost, theorem_constants, total_cost,
                                turnpike_theorem_check)


def test_running_cost_static_pair():
    p = CostParams(target=0.7, n_agents=4)
    assert running_cost(np.full((3, 4), 0.7), np.zeros(4), p) == 0.0


def test_running_cost_unit_deviation():
    p = CostParams(target=0.2, n_agents=1)
    assert running_cost([[1.2]], [0.0], p) == pytest.approx(1.0)


def test_running_cost_hand_value():
    p = CostParams(gamma=0.5, target=0.3, n_agents=2)
    assert running_cost([[1.3, -0.7]], [1.0, 1.0], p) == pytest.approx(1.5)


def test_running_cost_empty():
    with pytest.raises(ValueError):
        running_cost(np.zeros((0, 3)), np.zeros(3), CostParams(n_agents=3))


def test_total_cost_values():
    p = CostParams(target=0.0, n_agents=1)
    paths = np.array([[[1.0], [1.0], [5.0]]])  # final state excluded
    assert total_cost(paths, np.zeros((2, 1)), 0.5, p) == pytest.approx(1.0)
    assert total_cost(np.zeros((2, 11, 3)), np.zeros((10, 3)), 0.1, CostParams(n_agents=3)) == 0.0


def test_total_cost_constant_running_cost():
    p = CostParams(target=0.0, n_agents=2)
    paths = np.full((3, 21, 2), 2.0)
    assert total_cost(paths, np.zeros((20, 2)), 0.05, p) == pytest.approx(1.0 * 4.0)


def test_total_cost_shape_mismatch():
    with pytest.raises(ValueError):
        total_cost(np.zeros((1, 5, 2)), np.zeros((3, 2)), 0.1, CostParams(n_agents=2))


def test_alpha_values():
    p = CostParams(gamma=1.0, n_agents=100)
    assert alpha(0.0, p) == 0.0
    assert alpha(10.0, p) == pytest.approx(0.5)
    assert alpha(6.0, p) == pytest.approx(4 * alpha(3.0, p))
    ys = np.linspace(0, 10, 50)
    assert np.all(np.diff(alpha(ys, p)) > 0)


def test_gamma_range():
    for g in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            CostParams(gamma=g)
    CostParams(gamma=1.0)


def test_dissipativity_at_static_pair():
    p = CostParams(target=0.4, n_agents=5)
    assert dissipativity_margin(np.full(5, 0.4), np.zeros(5), np.full(5, 0.4), np.zeros(5), p) == 0.0


def test_dissipativity_zero_control_closed_form():
    rng = np.random.default_rng(0)
    N = 10
    p = CostParams(gamma=0.5, target=0.1, n_agents=N)
    x = rng.normal(size=N)
    d2 = np.sum((x - 0.1) ** 2)
    m = dissipativity_margin(x, np.zeros(N), np.full(N, 0.1), np.zeros(N), p)
    assert m == pytest.approx(3 / (4 * N) * d2, rel=1e-12)


@settings(max_examples=300)
@given(st.sampled_from([2, 10, 100]), st.floats(1e-6, 1.0), st.integers(0, 2**31 - 1),
       st.floats(0.01, 100))
def test_dissipativity_property(N, gamma, seed, scale):
    rng = np.random.default_rng(seed)
    p = CostParams(gamma=gamma, target=rng.normal(), n_agents=N)
    x = scale * rng.normal(size=N)
    u = scale * rng.normal(size=N)
    assert dissipativity_margin(x, u, np.full(N, p.target), np.zeros(N), p) >= -1e-12


def test_theorem_constants_values():
    c = theorem_constants(beta=12, M_p=0, gamma=1, tau=0.02, m=50, lam=0.5)
    assert c.beta_p == 288.0
    assert c.C0 == pytest.approx(2 * 0.02 * 289 / (1 - math.exp(-0.48)), rel=1e-14)
    assert c.C1 == pytest.approx(2 * c.C0**2, rel=1e-14)


def test_theorem_constants_large_tau_limit():
    c = theorem_constants(beta=12, M_p=3, gamma=1, tau=50.0, m=4, lam=0.5)
    assert c.C0 == pytest.approx(2 * 50.0 * (1 + c.beta_p), rel=1e-12)


def test_theorem_constants_degenerate():
    with pytest.raises(ValueError):
        theorem_constants(beta=12, M_p=0, gamma=1, tau=0.1, m=1, lam=0.5)
    with pytest.raises(ValueError):
        theorem_constants(beta=12, M_p=0, gamma=2, tau=0.1, m=10, lam=0.5)


def test_theorem_check_at_static_pair():
    p = CostParams(target=0.7, n_agents=3)
    c = theorem_constants(beta=12, M_p=100, gamma=1, tau=0.1, m=10, lam=0.5)
    paths = np.full((2, 11, 3), 0.7)
    paths[:, 0] = [0.0, 1.0, 2.0]
    margin = turnpike_theorem_check(paths, np.zeros((10, 3)), c, 0.5, 0.1, p)
    expected = c.C1 * alpha(np.linalg.norm(np.array([0.0, 1.0, 2.0]) - 0.7), p)
    assert margin == pytest.approx(expected, rel=1e-14)


def test_cheap_control_margin():
    p = CostParams(target=0.0, n_agents=100)
    c = theorem_constants(beta=12, M_p=0, gamma=1, tau=0.02, m=50, lam=0.5)
    x0 = np.full(100, 1.0)
    assert cheap_control_margin(0.0, x0, c, p) == pytest.approx(c.C0 * 0.5)
