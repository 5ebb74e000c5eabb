"""Grid construction, derivative stencils, quadrature, serialization."""

import math

import numpy as np
import pytest

from pelab.grid import RadialGrid, fd_weights, interp_local, sphere_area


def test_grid_layout():
    grid = RadialGrid.make(4, 200, 20.0)
    assert grid.num_nodes == 200
    assert grid.nodes[0] > 0
    assert math.isclose(grid.nodes[-1], 20.0)
    assert np.allclose(np.diff(grid.nodes), grid.h)
    # half-offset: reflection maps the node set to itself
    assert math.isclose(grid.nodes[0], grid.h / 2)


def test_grid_validation():
    with pytest.raises(ValueError):
        RadialGrid.make(2, 100, 10.0)
    with pytest.raises(ValueError):
        RadialGrid.make(4, 8, 10.0)
    with pytest.raises(ValueError):
        RadialGrid.make(4, 100, 10.0, scheme=3)


def test_fd_weights_exactness():
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    w = fd_weights(0.0, x, 1)
    # derivative of cubic at 0
    assert math.isclose(float(w @ x**3), 0.0, abs_tol=1e-12)
    assert math.isclose(float(w @ x**2), 0.0, abs_tol=1e-12)
    assert math.isclose(float(w @ x), 1.0, rel_tol=1e-12)


@pytest.mark.parametrize("order,expected", [(1, 4.0), (2, 4.0)])
def test_derivative_order(order, expected):
    errs = []
    for num in (200, 400):
        grid = RadialGrid.make(4, num, 20.0)
        r = grid.nodes
        f = np.exp(-0.5 * r**2) * np.cos(r)  # even, smooth
        if order == 1:
            exact = np.exp(-0.5 * r**2) * (-r * np.cos(r) - np.sin(r))
            got = grid.deriv1(f)
        else:
            exact = np.exp(-0.5 * r**2) * ((r**2 - 1) * np.cos(r) + 2 * r * np.sin(r) - np.cos(r))
            got = grid.deriv2(f)
        errs.append(np.abs(got - exact).max())
    rate = math.log2(errs[0] / errs[1])
    assert rate > expected - 0.5


def test_odd_parity_derivative():
    grid = RadialGrid.make(4, 400, 20.0)
    r = grid.nodes
    f = np.sinh(r) * np.exp(-0.1 * r**2)  # odd through the origin
    exact = (np.cosh(r) - 0.2 * r * np.sinh(r)) * np.exp(-0.1 * r**2)
    err = np.abs(grid.d1_odd @ f - exact).max()
    assert err < 1e-4


def test_staggered_derivative_consistency():
    grid = RadialGrid.make(4, 400, 20.0)
    r = grid.nodes
    f = np.exp(-((r - 5.0) ** 2))
    mid = grid.midpoints
    exact = -2 * (mid - 5.0) * np.exp(-((mid - 5.0) ** 2))
    err = np.abs(grid.stag_d1 @ f - exact).max()
    assert err < 2e-5
    # interpolation to flux points
    exact_i = np.exp(-((mid - 5.0) ** 2))
    assert np.abs(grid.stag_interp @ f - exact_i).max() < 2e-6


def test_quadrature_order_matches_scheme():
    # integrand of the decaying-exponential type used by the volume integrals
    n = 4
    s = 2 * (n - 1)
    errs = []
    for num in (400, 800, 1600):
        grid = RadialGrid.make(n, num, 20.0)
        vals = grid.nodes * np.exp(-s * grid.nodes)
        exact = (1 - math.exp(-s * 20.0) * (1 + s * 20.0)) / s**2
        errs.append(abs(grid.integral(vals) - exact) / exact)
    rate1 = math.log2(errs[0] / errs[1])
    rate2 = math.log2(errs[1] / errs[2])
    assert rate2 > 3.5
    assert rate1 > 3.0


def test_cumulative_integral_interior_radius():
    grid = RadialGrid.make(3, 800, 20.0)
    vals = np.sinh(grid.nodes) ** 2
    exact = math.sinh(2 * 7.3) / 4 - 7.3 / 2 - 0.0
    got = grid.integral_to(vals, 7.3)
    assert abs(got - exact) / exact < 5e-7


def test_filter_annihilates_smooth_and_kills_sawtooth():
    grid = RadialGrid.make(3, 300, 15.0)
    r = grid.nodes
    smooth = np.exp(-((r - 4) ** 2))
    saw = (-1.0) ** np.arange(grid.num_nodes)
    assert np.abs(grid.highfreq_filter @ smooth).max() < 1e-6
    mid = (grid.highfreq_filter @ saw)[5 : grid.num_nodes - 5]
    assert np.allclose(mid, saw[5 : grid.num_nodes - 5])
    # damping map is a contraction
    m = np.eye(grid.num_nodes) - 0.5 * grid.highfreq_filter.toarray()
    assert np.abs(np.linalg.eigvals(m)).max() <= 1.0 + 1e-12


def test_interp_local():
    x = np.linspace(0.3, 10.0, 60)
    vals = np.sin(x)
    assert abs(interp_local(x, vals, 4.321) - math.sin(4.321)) < 1e-7


def test_sphere_area():
    assert math.isclose(sphere_area(3), 4 * math.pi)
    assert math.isclose(sphere_area(4), 2 * math.pi**2)
