import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochturnpike.kernels import (ConstantKernel, CustomKernel, NonSymmetricCS, SymmetricCS,
                                   UnsupportedKernelError, kernel_from_dict)

KERNELS = [SymmetricCS(), SymmetricCS(epsilon=1.0), SymmetricCS(epsilon=0.3, alpha=0.5),
           NonSymmetricCS(), NonSymmetricCS(epsilon_min=0.2, epsilon_max=0.2, n_agents=7)]


def test_symmetric_peak_value():
    assert SymmetricCS(epsilon=5e-2, alpha=0.1).eval(0.3, 0.3) == pytest.approx(2000.0, rel=1e-14)


def test_nonsymmetric_endpoint_columns():
    k = NonSymmetricCS(epsilon_min=1e-2, epsilon_max=1e-1, n_agents=100, alpha=0.1)
    # columns are 0-based: first agent is column 0, last is column 99
    assert k.eval(0.0, 0.0, 0) == pytest.approx(10000.0, rel=1e-14)
    assert k.eval(0.0, 0.0, 99) == pytest.approx(1000.0, rel=1e-14)
    with pytest.raises(IndexError):
        k.eval(0.0, 0.0, 100)


def test_partials_hand_value():
    k = SymmetricCS(epsilon=1.0, alpha=0.1)
    assert k.d_dx(0.2, 0.0) == pytest.approx(-160.0, rel=1e-12)
    assert k.d_dy(0.2, 0.0) == pytest.approx(160.0, rel=1e-12)


@pytest.mark.parametrize("k", KERNELS)
def test_partials_vanish_on_diagonal(k):
    assert k.d_dx(0.4, 0.4, 3) == 0.0
    assert k.d_dy(0.4, 0.4, 3) == 0.0


@pytest.mark.parametrize("k,expected", [(SymmetricCS(5e-2, 0.1), 2000.0),
                                        (SymmetricCS(1.0, 0.1), 100.0),
                                        (NonSymmetricCS(epsilon_min=1e-2, alpha=0.1), 10000.0)])
def test_bound_values(k, expected):
    assert k.bound() == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("k", KERNELS)
def test_values_never_exceed_bound(k):
    rng = np.random.default_rng(0)
    n = 100_000
    x = rng.uniform(-3, 3, n)
    y = x + rng.normal(0, 0.2, n) * rng.integers(0, 2, n)
    col = rng.integers(0, getattr(k, "n_agents", 100), n)
    vals = k.eval(x, y, col)
    assert np.all(vals > 0)
    assert np.all(vals <= k.bound())


@pytest.mark.parametrize("k", KERNELS)
def test_partials_match_finite_differences(k):
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(200):
        x, y = rng.uniform(-1, 1, 2)
        if abs(x - y) < 1e-2:
            continue
        col = int(rng.integers(0, getattr(k, "n_agents", 100)))
        fd_x = (k.eval(x + h, y, col) - k.eval(x - h, y, col)) / (2 * h)
        fd_y = (k.eval(x, y + h, col) - k.eval(x, y - h, col)) / (2 * h)
        assert k.d_dx(x, y, col) == pytest.approx(fd_x, rel=1e-6, abs=1e-9)
        assert k.d_dy(x, y, col) == pytest.approx(fd_y, rel=1e-6, abs=1e-9)


@settings(max_examples=300)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_symmetric_kernel_is_exactly_symmetric(x, y):
    k = SymmetricCS()
    assert k.eval(x, y) == k.eval(y, x)
    assert k.d_dx(x, y) + k.d_dy(x, y) == 0.0


def test_matrix_layout_uses_column_weights():
    k = NonSymmetricCS(n_agents=3)
    P = k.matrix(np.zeros(3))
    np.testing.assert_allclose(P[0], 1 / (k.weights(np.arange(3)) * k.alpha**2))
    np.testing.assert_allclose(P[0], P[2])


def test_invalid_parameters():
    with pytest.raises(ValueError):
        SymmetricCS(epsilon=0.0)
    with pytest.raises(ValueError):
        SymmetricCS(alpha=-1.0)
    with pytest.raises(ValueError):
        NonSymmetricCS(epsilon_min=0.2, epsilon_max=0.1)


def test_custom_kernel_without_bound():
    k = CustomKernel(func=lambda x, y, c: np.exp(-(x - y) ** 2),
                     dfdx=lambda x, y, c: -2 * (x - y) * np.exp(-(x - y) ** 2),
                     dfdy=lambda x, y, c: 2 * (x - y) * np.exp(-(x - y) ** 2))
    assert k.eval(0.0, 0.0) == 1.0
    with pytest.raises(UnsupportedKernelError):
        k.bound()


def test_constant_kernel():
    k = ConstantKernel(2.0)
    assert k.bound() == 2.0
    np.testing.assert_array_equal(k.matrix(np.arange(3.0)), np.full((3, 3), 2.0))


@pytest.mark.parametrize("k", [SymmetricCS(0.3, 0.2), NonSymmetricCS(0.01, 0.5, 12, 0.3)])
def test_dict_round_trip(k):
    assert kernel_from_dict(k.to_dict()) == k
