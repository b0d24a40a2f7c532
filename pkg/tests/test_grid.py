import numpy as np
import pytest

from maxwell_selfsim.grid import (GridFunction, LogGrid, Stencil, eval_grid, exp_power,
                                  gaussian_damp, mix, sample)


def test_grid_defaults_and_endpoints(grid):
    assert grid.n == 2048
    assert grid.nodes[0] == 1e-8 and grid.nodes[-1] == 1e6
    assert np.all(np.diff(grid.nodes) > 0)


def test_grid_rejects_bad_range():
    with pytest.raises(ValueError):
        LogGrid(1.0, 0.5)
    with pytest.raises(ValueError):
        LogGrid(n=2)


def test_node_values_exact(maxwellian, grid):
    x = grid.nodes[[0, 17, 1000, 2047]]
    assert np.array_equal(maxwellian(x), np.exp(-x))


def test_value_at_zero_and_clamp(grid):
    u = exp_power(grid)
    assert eval_grid(u, 0.0) == 1.0
    assert eval_grid(u, 2 * grid.x_max) == 0.0


def test_algebraic_tail(grid):
    u = GridFunction(grid, np.full(grid.n, 0.5), tail_limit=0.0, tail_exponent=2.0)
    assert u(2 * grid.x_max) == pytest.approx(0.125, rel=1e-14)


def test_negative_argument_rejected(maxwellian):
    with pytest.raises(ValueError):
        eval_grid(maxwellian, -1.0)


def test_stretched_exponential_interpolation_exact(grid):
    u = exp_power(grid, 0.5)
    y = np.geomspace(2e-8, 5e5, 777)
    assert np.max(np.abs(u(y) - np.exp(-np.sqrt(y)))) < 1e-14


def test_values_only_interpolation_order_preserving(grid):
    u = sample(grid, lambda x: 1.0 / (1.0 + x), characteristic=True)
    y = np.geomspace(1e-7, 1e5, 5000)
    v = u(y)
    assert np.all(np.diff(v) <= 0)
    assert np.max(np.abs(v - 1 / (1 + y))) < 1e-4


def test_small_x_rule_quadratic_exponent(grid):
    # E = x + x**2 is reproduced exactly by the origin fit
    u = GridFunction.from_exponent(grid, grid.nodes + grid.nodes ** 2, characteristic=True)
    y = np.array([1e-12, 1e-10, 5e-9])
    e = u.evaluate_stencil_exponent(grid.stencil(y))
    assert np.allclose(e, y + y * y, rtol=1e-12, atol=0)


def test_small_x_rule_linear_blend_without_exponent(grid):
    u = GridFunction(grid, np.exp(-grid.nodes), value_at_zero=1.0)
    y = 0.5 * grid.x_min
    assert u(y) == pytest.approx(1 + (np.exp(-grid.x_min) - 1) * 0.5, rel=1e-15)


def test_characteristic_flag_checked(grid):
    with pytest.raises(ValueError):
        GridFunction(grid, np.full(grid.n, 1.5), characteristic=True)


def test_gaussian_damp(grid):
    one = GridFunction(grid, np.ones(grid.n), tail_limit=1.0, characteristic=True)
    d = gaussian_damp(one, 1.0)
    assert np.allclose(d.values, np.exp(-grid.nodes), rtol=1e-15)
    assert d.value_at_zero == 1.0
    d2 = gaussian_damp(exp_power(grid), 1.0)
    assert np.allclose(d2.values, np.exp(-2 * grid.nodes), rtol=1e-14, atol=0)
    with pytest.raises(ValueError):
        gaussian_damp(one, 0.0)


def test_mix_keeps_exponent(grid):
    a, b = exp_power(grid), exp_power(grid, c=2.0)
    m = mix([a, b], [0.25, 0.75])
    assert m.exponent is not None
    assert np.allclose(m.values, 0.25 * a.values + 0.75 * b.values, rtol=1e-14, atol=1e-300)
    # the complement stays accurate where u is within rounding of 1
    x = grid.nodes[:3]
    exact = -0.25 * np.expm1(-x) - 0.75 * np.expm1(-2 * x)
    assert np.allclose(m.complement[:3], exact, rtol=1e-14, atol=0)


def test_row_stencil_matches_generic(grid):
    scales = np.array([[0.3, 0.7], [1.0, 1e-3], [0.0, 2.5]])
    fast = Stencil.for_scales(grid, scales)
    slow = Stencil.build(grid, scales[..., None] * grid.nodes)
    u = exp_power(grid, 0.7)
    a, b = u.evaluate_stencil_exponent(fast), u.evaluate_stencil_exponent(slow)
    assert np.allclose(a, b, rtol=1e-13, atol=0)
    v = GridFunction(grid, u.values, characteristic=True)
    assert np.allclose(v.evaluate_stencil(fast), v.evaluate_stencil(slow), rtol=1e-13, atol=1e-15)


def test_dilate(grid):
    u = exp_power(grid)
    d = u.dilate(2.0)
    inner = grid.nodes < grid.x_max / 2
    assert np.allclose(d.values[inner], np.exp(-2 * grid.nodes[inner]), rtol=1e-12, atol=0)
