import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from maxwell_selfsim.grid import GridFunction, exp_power, sample
from maxwell_selfsim.model import (InteractionTerm, abs_diff_bound, format_model, gamma_apply,
                                   l_apply, make_custom, make_elastic, make_inelastic,
                                   make_thermostat, parse_model, read_model, write_model)
from maxwell_selfsim.spectral import lambda_p, mu_p

from conftest import SEED


def _ones(grid):
    return GridFunction(grid, np.ones(grid.n), tail_limit=1.0, characteristic=True)


# -- constructors -------------------------------------------------------------

def test_elastic_normalized(model_a):
    assert model_a.total_mass == pytest.approx(1.0, abs=1e-15)
    assert lambda_p(model_a, 1.0) == pytest.approx(1.0, abs=1e-14)


def test_elastic_d2_constructs():
    m = make_elastic(2)
    assert lambda_p(m, 0.0) == 2.0
    assert m.total_mass == pytest.approx(1.0, abs=1e-15)


def test_elastic_rejects_bad_input():
    with pytest.raises(ValueError):
        make_elastic(1)
    with pytest.raises(ValueError):
        make_elastic(3, lambda z: z)  # negative on [-1, 0)


def test_thermostat_energy_rate(model_b):
    assert mu_p(model_b, 1.0) == pytest.approx(-2.0 / 7.0, abs=1e-14)
    assert model_b.total_mass == pytest.approx(1.0, abs=1e-15)


def test_thermostat_small_theta_limit(model_a):
    m = make_thermostat(3, None, 1.0, 1e-12)
    bil = m.terms[0]
    assert np.allclose(bil.scales, model_a.terms[0].scales, rtol=0, atol=0)
    assert np.allclose(bil.weights, model_a.terms[0].weights, rtol=1e-11)


def test_thermostat_rejects_bad_parameters():
    with pytest.raises(ValueError):
        make_thermostat(3, None, 0.0, 1.0)
    with pytest.raises(ValueError):
        make_thermostat(3, None, 1.0, -1.0)


def test_inelastic_coefficients(model_c):
    (term,) = model_c.exact
    (a0, a1), (b0, b1) = term.slots
    assert (a0, a1, b0, -b1) == (0, Fraction(9, 16), 1, Fraction(15, 16))
    s = model_c.terms[0].scales
    assert np.allclose(s[:, 0] / (1 - s[:, 1]), 9.0 / 15.0, rtol=1e-13)


def test_inelastic_e1_conserves_energy():
    assert lambda_p(make_inelastic(3, 1), 1.0) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        make_inelastic(3, 1.5)


def test_custom_models(grid):
    econ = make_custom([InteractionTerm.from_nodes([(1, (Fraction(1, 4), Fraction(3, 4)))])])
    assert econ.exact is not None
    ident = make_custom([InteractionTerm.from_nodes([(1, (1,))])])
    for p in (0.0, 0.5, 3.0):
        assert lambda_p(ident, p) == 1.0
    sub = make_custom([InteractionTerm.from_nodes([(0.3, (1.0,))]),
                       InteractionTerm.from_nodes([(0.5, (0.5, 0.5))])])
    assert sub.total_mass == pytest.approx(0.8)
    assert sub.sub_stochastic
    # Gamma(1) equals the total mass
    assert np.allclose(gamma_apply(sub, _ones(grid)).values, 0.8, rtol=1e-15)


def test_custom_rejects_invalid():
    with pytest.raises(ValueError):
        make_custom([])
    with pytest.raises(ValueError):
        make_custom([InteractionTerm.from_nodes([(0.7, (1.0,)), (0.6, (0.5,))])])
    with pytest.raises(ValueError):
        InteractionTerm.from_nodes([(-0.1, (1.0,))])
    with pytest.raises(ValueError):
        InteractionTerm.from_nodes([(0.5, (-1.0,))])


# -- operators ----------------------------------------------------------------

def test_gamma_maxwellian_fixed_point(model_a, maxwellian):
    g = gamma_apply(model_a, maxwellian)
    assert np.max(np.abs(g.values - maxwellian.values)) < 1e-14


def test_gamma_of_one(presets, grid):
    for m in presets.values():
        g = gamma_apply(m, _ones(grid))
        assert np.all(g.values == 1.0)


def test_gamma_inelastic_oracle(model_c, maxwellian, grid):
    # at the node nearest x = 1, int_0^1 exp(-x (1 - 3 s/8)) ds in closed form
    j = int(np.argmin(np.abs(np.log(grid.nodes))))
    x = grid.nodes[j]
    closed = math.exp(-x) * math.expm1(3 * x / 8) * 8 / (3 * x)
    ref, _ = integrate.quad(lambda s: math.exp(-x * (1 - 3 * s / 8)), 0, 1, epsabs=0, epsrel=2e-14)
    out = gamma_apply(model_c, maxwellian).values[j]
    assert out == pytest.approx(closed, rel=1e-13)
    assert out == pytest.approx(ref, rel=1e-13)


def test_gamma_inelastic_value_at_one(model_c, maxwellian):
    # off-node evaluation carries the interpolation error of the grid
    assert gamma_apply(model_c, maxwellian)(1.0) == pytest.approx(0.44635196626012778763, rel=1e-6)


def test_gamma_rejects_outside_unit_ball(model_a, grid):
    with pytest.raises(ValueError):
        gamma_apply(model_a, GridFunction(grid, np.full(grid.n, 1.1), value_at_zero=1.1))


def test_l_apply_eigenfunctions(presets, grid):
    x = grid.nodes
    sel = (x > 1e-4) & (x < 1e2)
    for m in presets.values():
        for p in (0.5, 1.0, 2.0):
            u = GridFunction(grid, x ** p, value_at_zero=0.0, tail_limit=grid.x_max ** p)
            lu = l_apply(m, u).values
            assert np.allclose(lu[sel], lambda_p(m, p) * x[sel] ** p, rtol=1e-3)


def test_l_apply_constants(model_a, grid):
    assert np.allclose(l_apply(model_a, _ones(grid)).values, 2.0, rtol=1e-14)
    zero = GridFunction(grid, np.zeros(grid.n), value_at_zero=0.0)
    assert np.all(l_apply(model_a, zero).values == 0.0)


def _random_characteristic(grid, rng, k=3):
    # mixtures of exp(-c x) are characteristic functions
    c = rng.uniform(0.05, 5.0, k)
    wts = rng.dirichlet(np.ones(k))
    return GridFunction(grid, wts @ np.exp(-np.outer(c, grid.nodes)), characteristic=True)


def test_unit_ball_and_lipschitz_random(presets, grid):
    rng = np.random.default_rng(SEED)
    for _ in range(20):
        u1, u2 = _random_characteristic(grid, rng), _random_characteristic(grid, rng)
        for m in presets.values():
            g1, g2 = gamma_apply(m, u1), gamma_apply(m, u2)
            assert g1.sup_norm() <= 1 + 1e-12
            slack = np.abs(g1.values - g2.values) - abs_diff_bound(m, u1, u2)
            assert np.max(slack) <= 1e-9


def test_l_positivity(presets, grid):
    rng = np.random.default_rng(SEED + 1)
    u = GridFunction(grid, rng.uniform(0, 1, grid.n), value_at_zero=0.5)
    for m in presets.values():
        assert np.all(l_apply(m, u).values >= 0)


def test_dilation_commutes(model_c, grid):
    # a dilation by a whole number of grid steps maps nodes to nodes
    x = grid.nodes
    u = GridFunction(grid, 0.5 * np.exp(-x) + 0.5 * np.exp(-3 * x), characteristic=True)
    tau = 64 * math.log(x[1] / x[0])
    a = gamma_apply(model_c, u).dilate(math.exp(tau))
    b = gamma_apply(model_c, u.dilate(math.exp(tau)))
    inner = x < grid.x_max * math.exp(-tau)
    assert np.max(np.abs(a.values - b.values)[inner]) < 1e-13


def test_sample_helper(grid):
    u = sample(grid, lambda x: np.exp(-x))
    assert u.value_at_zero == 1.0


# -- model file -----------------------------------------------------------------

def test_model_file_round_trip(tmp_path, model_c, maxwellian):
    path = tmp_path / "c.model"
    write_model(model_c, path)
    back = read_model(path)
    assert back.fingerprint() == model_c.fingerprint()
    assert np.array_equal(gamma_apply(back, maxwellian).values,
                          gamma_apply(model_c, maxwellian).values)


def test_model_file_exact_numbers():
    m = parse_model("model econ transform=laplace d=1\n# comment\nterm n=2 w=1 a=1/4,3/4\n")
    assert m.transform_kind == "laplace" and m.dimension_hint == 1
    assert m.exact is not None


@pytest.mark.parametrize("text, line", [
    ("model x transform=fourier d=3\nterm n=2 w=1 a=0.5\n", 2),
    ("term n=1 w=1 a=1\n", 1),
    ("model x transform=fourier d=3\nbogus\n", 2),
    ("model x transform=fourier d=3\nterm n=1 w=1 a=1 zz=3\n", 2),
])
def test_model_file_errors(text, line):
    with pytest.raises(ValueError, match=f"line {line}"):
        parse_model(text)


def test_format_is_stable(model_a):
    assert format_model(model_a) == format_model(make_elastic(3))
