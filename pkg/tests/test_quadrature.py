
import numpy as np
import pytest
import scipy.stats as sps

from vbboost.quadrature import default_nodes, grid_for_components, tensor_grid


def test_trapezoid_weights_sum_to_span():
    grid = tensor_grid(np.array([-2.0]), np.array([3.0]), 11)
    assert grid.weights.sum() == pytest.approx(5.0, rel=1e-12)
    assert grid.points.shape == (11, 1)


def test_integrates_gaussian_to_one_1d():
    grid = grid_for_components([np.array([0.3])], [1.1], nodes_per_axis=4096)
    vals = sps.norm.pdf(grid.points[:, 0], 0.3, 1.1)
    assert grid.integrate(vals) == pytest.approx(1.0, abs=1e-10)


def test_integrates_gaussian_to_one_2d():
    grid = grid_for_components([np.array([0.5, -0.5])], [0.8], nodes_per_axis=301)
    vals = np.exp(
        sps.norm.logpdf(grid.points[:, 0], 0.5, 0.8)
        + sps.norm.logpdf(grid.points[:, 1], -0.5, 0.8)
    )
    assert grid.integrate(vals) == pytest.approx(1.0, abs=1e-8)


def test_window_covers_all_components():
    grid = grid_for_components(
        [np.array([-3.0]), np.array([4.0])], [0.5, 2.0], nodes_per_axis=64
    )
    assert grid.lo[0] < -3.0 - 5.0 * 0.5
    assert grid.hi[0] > 4.0 + 5.0 * 2.0


def test_polynomial_exactness_quadratic():
    # trapezoid is exact for linear functions; quadratic error shrinks as h^2
    f = lambda x: x**2
    coarse = tensor_grid(np.array([0.0]), np.array([1.0]), 51)
    fine = tensor_grid(np.array([0.0]), np.array([1.0]), 501)
    err_c = abs(coarse.integrate(f(coarse.points[:, 0])) - 1.0 / 3.0)
    err_f = abs(fine.integrate(f(fine.points[:, 0])) - 1.0 / 3.0)
    assert err_f < err_c / 50.0


def test_default_nodes_reject_high_dim():
    assert default_nodes(1) >= 1024
    assert default_nodes(2) >= 128
    with pytest.raises(ValueError):
        default_nodes(3)


def test_scalar_mean_list_orientation():
    # flat scalar means must be read as K points in d=1, not one point in d=K
    grid = grid_for_components([0.0, 1.0, 2.0], [1.0, 1.0, 1.0], nodes_per_axis=32)
    assert grid.points.shape[1] == 1
