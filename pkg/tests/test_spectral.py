import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import SEED
from maxwell_selfsim.model import InteractionTerm, make_custom, make_elastic, make_inelastic, make_thermostat
from maxwell_selfsim.spectral import (
    classify,
    contraction_factor,
    find_p0,
    find_s_star,
    invert_mu,
    lambda_p,
    lambda_prime,
    mu_p,
    psi,
    spectral_profile,
    theta_star,
)


def _linear_model():
    return make_custom([InteractionTerm(1, np.array([1.0]), np.array([[0.5]]))])


# -- lambda and mu ------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.0, 7.5])
def test_lambda_elastic_closed_form(model_a, p):
    # s**p is smooth in the angle variable when 2p is an integer
    assert lambda_p(model_a, p) == pytest.approx(2.0 / (p + 1.0), rel=1e-13)


@pytest.mark.parametrize("p", [0.25, 0.75])
def test_lambda_elastic_fractional(model_a, p):
    assert lambda_p(model_a, p) == pytest.approx(2.0 / (p + 1.0), rel=1e-8)


def test_lambda_at_zero_counts_slots(presets):
    for m in (presets["A"], presets["C"]):
        assert lambda_p(m, 0.0) == pytest.approx(2.0, rel=1e-14)


def test_lambda_inelastic_rational(model_c):
    assert lambda_p(model_c, 2.0) == pytest.approx(59 / 128, rel=1e-13)


def test_lambda_rejects_negative(model_a):
    with pytest.raises(ValueError):
        lambda_p(model_a, -0.1)


def test_lambda_prime_matches_difference(presets):
    for m in presets.values():
        for p in (0.5, 1.0, 2.5):
            h = 1e-5
            fd = (lambda_p(m, p + h) - lambda_p(m, p - h)) / (2 * h)
            assert lambda_prime(m, p) == pytest.approx(fd, rel=1e-7, abs=1e-10)


def test_mu_values(model_a, model_c):
    assert mu_p(model_a, 2.0) == pytest.approx(-1 / 6, rel=1e-13)
    assert mu_p(model_a, 3.0) == pytest.approx(-1 / 6, rel=1e-13)
    assert abs(mu_p(model_a, 1.0)) < 1e-13
    assert mu_p(model_c, 1.0) == pytest.approx(-3 / 16, rel=1e-13)
    assert mu_p(model_c, 2.0) == pytest.approx(-69 / 256, rel=1e-13)


def test_mu_small_p_limit(model_a):
    p = 1e-6
    assert p * mu_p(model_a, p) == pytest.approx(1.0, rel=1e-5)


def test_mu_rejects_nonpositive(model_a):
    with pytest.raises(ValueError):
        mu_p(model_a, 0.0)


def test_thermostat_mu1(model_b):
    # -theta/(2 (1 + theta)) at theta = 4/3
    assert mu_p(model_b, 1.0) == pytest.approx(-2 / 7, rel=1e-12)


# -- p0, inverse, s* --------------------------------------------------------------

def test_p0_elastic(model_a):
    p0, mu0 = find_p0(model_a)
    assert p0 == pytest.approx(1 + math.sqrt(2), abs=1e-8)
    assert mu0 == pytest.approx(2 * math.sqrt(2) - 3, abs=1e-8)
    assert abs(psi(model_a, p0)) <= 1e-12


def test_p0_inelastic(model_c):
    p0, mu0 = find_p0(model_c)
    assert 1 < p0 < 64
    assert p0 == pytest.approx(1.7131652273170906212, abs=1e-9)
    assert mu0 < mu_p(model_c, 1.0)


def test_p0_thermostat(model_b):
    p0, _ = find_p0(model_b)
    assert p0 == pytest.approx(1.2110322250073801621, abs=1e-9)


def test_p0_linear_model_rejected():
    with pytest.raises(ValueError):
        find_p0(_linear_model())


def test_mu_minimum_is_global(presets):
    for m in presets.values():
        p0, mu0 = find_p0(m)
        for p in np.linspace(0.05, 10, 60):
            if abs(p - p0) > 1e-3:
                assert mu_p(m, p) > mu0


@pytest.mark.parametrize("mu_star, expected", [(0.0, 1.0), (2 / 3, 0.5)])
def test_invert_mu_elastic(model_a, mu_star, expected):
    assert invert_mu(model_a, mu_star) == pytest.approx(expected, abs=1e-10)


def test_invert_mu_below_minimum(model_a):
    _, mu0 = find_p0(model_a)
    with pytest.raises(ValueError):
        invert_mu(model_a, mu0 - 0.1)


def test_invert_mu_round_trip(presets):
    rng = np.random.default_rng(SEED)
    for m in presets.values():
        p0, _ = find_p0(m)
        for p in rng.uniform(0.05, p0 - 0.05, 10):
            assert invert_mu(m, mu_p(m, p)) == pytest.approx(p, abs=1e-9)


def test_s_star_elastic_infinite(model_a):
    assert math.isinf(find_s_star(model_a))


def test_s_star_inelastic(model_c):
    s = find_s_star(model_c)
    assert s == pytest.approx(4.1269104159957287531, abs=1e-9)
    assert mu_p(model_c, s) == pytest.approx(-3 / 16, abs=1e-12)


def test_s_star_thermostat(model_b):
    s = find_s_star(model_b)
    assert math.isfinite(s) and s > 1
    assert mu_p(model_b, s) == pytest.approx(mu_p(model_b, 1.0), abs=1e-12)


def test_s_star_needs_p0_above_one():
    # small scales give psi(1) > 0, so the minimum lies below p = 1
    m = make_custom([InteractionTerm(2, np.array([1.0]), np.array([[0.05, 0.05]]))])
    p0, _ = find_p0(m)
    assert p0 < 1
    with pytest.raises(ValueError):
        find_s_star(m)


# -- classification ------------------------------------------------------------------

def test_classify_presets(presets):
    for m in presets.values():
        assert classify(m) == "b"


def test_classify_linear():
    assert classify(_linear_model()) == "a"


def test_classify_growing_scales():
    m = make_custom([InteractionTerm(2, np.array([1.0]), np.array([[1.5, 0.2]]))])
    p0, mu0 = find_p0(m)
    assert mu0 > 0
    assert classify(m) == "c"


def test_classify_class_d():
    # lambda(1) < 1 but lambda(p) grows again through the scale above 1
    m = make_custom([InteractionTerm(2, np.array([0.6]), np.array([[1.1, 0.01]]))])
    p0, mu0 = find_p0(m)
    assert mu0 < 0
    assert classify(m) == "d"


def test_spectral_profile_fields(model_a, model_c):
    prof = spectral_profile(model_a)
    assert prof.fig1_class == "b"
    assert abs(prof.mu1) < 1e-13
    assert math.isinf(prof.s_star)
    d = spectral_profile(model_c).as_dict()
    assert set(d) == {"p0", "mu_p0", "class", "lambda0", "s_star", "mu1"}
    assert spectral_profile(_linear_model()).fig1_class == "a"


# -- threshold ---------------------------------------------------------------------

def test_theta_star_value():
    assert theta_star(3, None, 1.0) == pytest.approx(2.0, abs=1e-10)


def test_theta_star_independent_of_kernel_scale():
    assert theta_star(3, 5.0, 1.0) == pytest.approx(2.0, abs=1e-10)


def test_theta_star_small_beta():
    # numerator 1/2, denominator ~ beta**2/6 for small beta
    m = 1e-4
    beta = 4 * m / (1 + m) ** 2
    assert theta_star(3, None, m) * beta ** 2 == pytest.approx(3.0, rel=1e-3)


def test_theta_star_rejects_bad_mass():
    with pytest.raises(ValueError):
        theta_star(3, None, 0.0)


def test_threshold_agrees_with_energy_criterion():
    # mu'(1) = lambda'(1) - lambda(1) + 1 < 0 exactly when theta < theta*
    rng = np.random.default_rng(SEED)
    checked = 0
    while checked < 20:
        m = float(rng.uniform(0.2, 5.0))
        th = float(rng.uniform(0.1, 5.0))
        ts = theta_star(3, None, m)
        if abs(th / ts - 1) < 1e-3:
            continue
        model = make_thermostat(3, None, m, th)
        assert (psi(model, 1.0) < 0) == (th < ts)
        checked += 1


# -- contraction factor ------------------------------------------------------------

def test_contraction_identity(presets):
    rng = np.random.default_rng(SEED)
    names = list(presets)
    for _ in range(50):
        m = presets[names[rng.integers(len(names))]]
        p0, _ = find_p0(m)
        p = float(rng.uniform(1e-3, p0))
        assert abs(contraction_factor(m, p, mu_p(m, p)) - 1.0) <= 1e-13


def test_contraction_elastic_value(model_a):
    assert contraction_factor(model_a, 2.0, 0.0) == pytest.approx(2 / 3, rel=1e-13)


def test_contraction_rejects_boundary(model_a):
    with pytest.raises(ValueError):
        contraction_factor(model_a, 2.0, -0.5)


# -- invariants ----------------------------------------------------------------------

def test_lambda_convex(presets):
    rng = np.random.default_rng(SEED)
    for m in presets.values():
        for _ in range(40):
            p1, p2, p3 = np.sort(rng.uniform(0.01, 16.0, 3))
            if p3 - p1 < 1e-3 or min(p2 - p1, p3 - p2) < 1e-6:
                continue
            l1, l2, l3 = (lambda_p(m, p) for p in (p1, p2, p3))
            dd = ((l3 - l2) / (p3 - p2) - (l2 - l1) / (p2 - p1)) / (p3 - p1)
            assert dd >= -1e-10


def test_mu_decreasing_below_p0(presets):
    for m in presets.values():
        p0, _ = find_p0(m)
        vals = [mu_p(m, p) for p in np.linspace(0.01, p0, 200)]
        assert np.all(np.diff(vals) < 1e-12)


def test_elastic_equality_random_kernels():
    rng = np.random.default_rng(SEED)
    for _ in range(5):
        c = rng.uniform(0.0, 1.0, 3)
        g = lambda z, c=c: 1.0 + c[0] * z + c[1] * z ** 2 + c[2] * z ** 4
        m = make_elastic(3, g)
        assert abs(mu_p(m, 2.0) - mu_p(m, 3.0)) <= 1e-8
        assert abs(mu_p(m, 1.0)) <= 1e-12


def test_inelastic_reduces_to_elastic():
    m = make_inelastic(3, Fraction(1))
    assert lambda_p(m, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert find_p0(m)[0] == pytest.approx(1 + math.sqrt(2), abs=1e-8)
