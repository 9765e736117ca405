import numpy as np
import pytest

from indiffprice.market import ParameterError
from indiffprice.payoff import (
    VulnerablePayoffParams,
    basket_put,
    capped_call,
    constant,
    make_payoff,
    put,
    smooth,
    spread_put,
    vulnerable_put,
)


@pytest.mark.parametrize(
    "s, want",
    [
        ((100.0, 1200.0), 50.0),
        ((100.0, 500.0), 0.95 * 50.0 * 0.5),
        ((100.0, 1000.0), 50.0),
        ((200.0, 500.0), 0.0),
        ((0.0, 2000.0), 150.0),
    ],
)
def test_vulnerable_put_values(vput, s, want):
    assert float(vput(np.array(s))) == pytest.approx(want, abs=1e-12)


def test_vulnerable_put_jump_size(vput):
    below = float(vput(np.array([100.0, 1000.0 - 1e-9])))
    at = float(vput(np.array([100.0, 1000.0])))
    assert at - below == pytest.approx(0.05 * 50.0, abs=1e-8)


def test_vulnerable_bounds_and_monotone(vput, rng):
    s = np.column_stack([rng.uniform(0, 400, 5000), rng.uniform(0, 3000, 5000)])
    v = vput(s)
    assert v.min() >= 0.0 and v.max() <= 150.0
    # nonincreasing in s1, nondecreasing in s2
    assert np.all(vput(s + [5.0, 0.0]) <= v + 1e-12)
    assert np.all(vput(s + [0.0, 5.0]) >= v - 1e-12)


def test_smoothing_band(vput):
    g = smooth(vput, 10.0)
    assert g.jump is None
    assert g.bound == vput.bound
    s1 = 100.0
    lo, hi = float(vput(np.array([s1, 990.0]))), float(vput(np.array([s1, 1010.0])))
    assert float(g(np.array([s1, 1000.0]))) == pytest.approx(0.5 * (lo + hi), abs=1e-12)
    # unchanged outside the band
    for s2 in (500.0, 989.0, 1011.0, 2000.0):
        assert float(g(np.array([s1, s2]))) == float(vput(np.array([s1, s2])))
    assert g.breaks(1) == (990.0, 1010.0)


def test_smoothing_is_lipschitz(vput):
    g = smooth(vput, 10.0)
    s2 = np.linspace(900, 1100, 20001)
    v = g(np.column_stack([np.full_like(s2, 100.0), s2]))
    slope = np.max(np.abs(np.diff(v) / np.diff(s2)))
    # steepest inside the band: (jump + regular slope) / width
    assert slope <= (2.5 + 0.95 * 50 * 20 / 1000) / 20 + 1e-9


def test_smoothing_params_route():
    g = vulnerable_put(VulnerablePayoffParams(epsilon=10.0))
    assert g.jump is None and g.info["epsilon"] == 10.0


def test_smooth_needs_jump():
    with pytest.raises(ParameterError):
        smooth(put(10.0), 1.0)


@pytest.mark.parametrize(
    "kw, field",
    [(dict(K=-1.0), "K"), (dict(L=0.0), "L"), (dict(alpha=1.5), "alpha"), (dict(epsilon=2000.0), "epsilon")],
)
def test_vulnerable_param_errors(kw, field):
    with pytest.raises(ParameterError) as e:
        VulnerablePayoffParams(**kw)
    assert e.value.field == field


def test_other_payoffs():
    s = np.array([[30.0, 40.0], [200.0, 10.0]])
    np.testing.assert_array_equal(constant(3.0)(s), [3.0, 3.0])
    np.testing.assert_array_equal(put(100.0, n=2)(s), [70.0, 0.0])
    np.testing.assert_array_equal(capped_call(100.0, 50.0, n=2)(s), [0.0, 50.0])
    np.testing.assert_array_equal(basket_put(100.0, [1.0, 0.5])(s), [50.0, 0.0])
    np.testing.assert_array_equal(spread_put(100.0)(s), [30.0, 0.0])


def test_payoff_shape_check():
    with pytest.raises(ValueError):
        put(10.0, n=2)(np.array([1.0, 2.0, 3.0]))


def test_make_payoff():
    assert make_payoff("vulnerable_put", K=150, L=1000, alpha=0.05).name == "vulnerable_put"
    assert make_payoff("constant", k=2.0).bound == 2.0
    with pytest.raises(ParameterError):
        make_payoff("digital")
    with pytest.raises(ParameterError):
        constant(-1.0)


def test_smoothing_midpoint_value(vput):
    g = smooth(vput, 10.0)
    assert float(g(np.array([100.0, 1000.0]))) == pytest.approx(48.5125, abs=1e-12)


def test_smoothing_converges_off_the_jump(vput, rng):
    s = np.column_stack([rng.uniform(0, 300, 400), rng.uniform(500, 1500, 400)])
    s = s[np.abs(s[:, 1] - 1000.0) > 1e-3]
    errs = [np.max(np.abs(smooth(vput, e)(s) - vput(s))) for e in (100.0, 10.0, 1.0, 1e-4)]
    assert errs[-1] == 0.0
    assert all(a >= b for a, b in zip(errs, errs[1:]))


def test_basket_hand_values():
    g = basket_put(150.0, [1.0, 1.0])
    assert float(g(np.array([50.0, 50.0]))) == 50.0
    assert float(g(np.zeros(2))) == 150.0
    assert float(g(np.array([100.0, 60.0]))) == 0.0
