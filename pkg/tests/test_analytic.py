import numpy as np
import pytest
from scipy import integrate

from indiffprice.analytic import (
    QuadratureSpec,
    black_scholes_put,
    bsde_driver,
    complete_market_price,
    expectation,
    mc_complete_market_price,
    mc_no_hedge_price,
    no_hedge_price,
    physical_log_drift,
    reduced_driver,
    z_from_gradient,
)
from indiffprice.market import ParameterError
from indiffprice.payoff import VulnerablePayoffParams, constant, vulnerable_put
from indiffprice.splitting import prepare_payoff

SPOT = (50.0, 1400.0)


@pytest.fixture(scope="module")
def g_eps(vput):
    return prepare_payoff(vput, 0.01)


def test_constant_payoff(params):
    for gamma in (0.0, 0.5, 3.0):
        assert no_hedge_price(constant(4.0), params, SPOT, gamma=gamma) == pytest.approx(4.0, abs=1e-12)
    assert complete_market_price(constant(4.0), params, SPOT) == pytest.approx(4.0, abs=1e-12)


def test_black_scholes_limit(params):
    # default never happens when L is tiny
    g = vulnerable_put(VulnerablePayoffParams(L=1e-6))
    vol = float(params.total_vol[0])
    for s1 in (50.0, 150.0, 300.0):
        want = black_scholes_put(s1, 150.0, vol, params.T)
        assert complete_market_price(g, params, (s1, 1400.0)) == pytest.approx(want, rel=1e-8, abs=1e-10)


def test_black_scholes_put_against_integral():
    s, K, vol, T = 100.0, 120.0, 0.3, 2.0
    sd = vol * np.sqrt(T)

    def integrand(z):
        return max(K - s * np.exp(-0.5 * sd**2 + sd * z), 0.0) * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)

    want, _ = integrate.quad(integrand, -12.0, 12.0, points=[(np.log(K / s) + 0.5 * sd**2) / sd], epsabs=1e-12)
    assert black_scholes_put(s, K, vol, T) == pytest.approx(want, rel=1e-10)


def test_monotone_in_gamma(params, g_eps):
    prices = [no_hedge_price(g_eps, params, SPOT, gamma=gm) for gm in (0.5, 1.0, 2.0)]
    assert prices[0] >= prices[1] >= prices[2]


def test_small_gamma_limit(params, g_eps):
    mean = expectation(g_eps, params, SPOT, physical_log_drift(params), QuadratureSpec())
    assert abs(no_hedge_price(g_eps, params, SPOT, gamma=1e-4) - mean) <= 1e-3 * mean
    assert no_hedge_price(g_eps, params, SPOT, gamma=0.0) == pytest.approx(mean, rel=1e-14)


def test_lambda_scaling(params, g_eps):
    a = no_hedge_price(g_eps, params.with_(lambda_units=2.0, gamma=0.5), SPOT)
    b = no_hedge_price(g_eps, params, SPOT)
    assert a == pytest.approx(2.0 * b, rel=1e-12)


@pytest.mark.parametrize("which", ["no_hedge", "complete"])
def test_quadrature_matches_monte_carlo(params, g_eps, which):
    if which == "no_hedge":
        q = no_hedge_price(g_eps, params, SPOT)
        mc = mc_no_hedge_price(g_eps, params, SPOT, 1_000_000, seed=0)
    else:
        q = complete_market_price(g_eps, params, SPOT)
        mc = mc_complete_market_price(g_eps, params, SPOT, 1_000_000, seed=0)
    assert abs(q - mc.value) <= 3.0 * mc.stderr


def test_quadrature_refinement(params, g_eps):
    quad = QuadratureSpec()
    for f in (no_hedge_price, complete_market_price):
        a, b = f(g_eps, params, SPOT, quad), f(g_eps, params, SPOT, quad.doubled())
        assert abs(a - b) <= 1e-6 * abs(b)


def test_mc_is_seeded(params, g_eps):
    a = mc_complete_market_price(g_eps, params, SPOT, 10_000, seed=3)
    b = mc_complete_market_price(g_eps, params, SPOT, 10_000, seed=3)
    assert a == b


def test_driver_at_zero(params):
    # the squared cross term contributes +mu_P^2 / (2 gamma |sigma_P|^2) = 0.08,
    # cancelling the constant term -0.08
    assert params.mu_P**2 / (2 * params.gamma * (params.sigma_P**2 + params.sigma_bar_P**2)) == pytest.approx(0.08)
    assert float(bsde_driver(np.zeros(4), params)) == pytest.approx(0.0, abs=1e-15)


def test_driver_orthogonal_z(params):
    z = np.array([0.3, -0.4, 0.0, 0.0])
    assert float(bsde_driver(z, params)) == pytest.approx(-0.5 * 0.25, abs=1e-15)


def test_driver_through_gradient(params):
    grad = np.array([1.0, 0.0])
    assert float(bsde_driver(z_from_gradient(grad, params), params)) == pytest.approx(-0.14345, abs=1e-14)
    assert float(reduced_driver(grad, params)) == pytest.approx(-0.14345, abs=1e-14)


def test_driver_identity_on_random_gradients(params, rng):
    grads = rng.normal(scale=3.0, size=(1000, 2))
    lhs = bsde_driver(z_from_gradient(grads, params), params)
    np.testing.assert_allclose(lhs, reduced_driver(grads, params), atol=1e-12, rtol=0)


def test_driver_errors(params):
    with pytest.raises(ParameterError):
        bsde_driver(np.zeros(4), params.with_(gamma=0.0))
    with pytest.raises(ValueError):
        bsde_driver(np.zeros(3), params)


def test_quadrature_spec_errors():
    with pytest.raises(ParameterError):
        QuadratureSpec(nodes=1)
