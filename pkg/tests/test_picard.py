import numpy as np
import pytest

from indiffprice.grid import LogGrid, ScalarField
from indiffprice.market import ParameterError, derive
from indiffprice.payoff import constant
from indiffprice.picard import PicardSettings, linear_solve, picard_drift, picard_iterate
from indiffprice.splitting import GridSpec, SplitSettings, prepare_payoff, solve

SPOT = (50.0, 100.0)
SMALL = GridSpec(count=61)


def _grads(grid, values):
    return [ScalarField(grid, np.full(grid.shape, v)) for v in values]


def test_drift_hand_example(params):
    grid = LogGrid.around([0.0, 0.0], 1.0, 5)
    b = picard_drift(_grads(grid, [1.0, 0.0]), derive(params), params.gamma)
    np.testing.assert_allclose(b[0].values, -0.0697, atol=1e-15)


def test_drift_reduces_to_A(params):
    d = derive(params)
    grid = LogGrid.around([0.0, 0.0], 1.0, 5)
    for grads, gamma in (([0.0, 0.0], 1.0), ([3.0, -2.0], 0.0)):
        b = picard_drift(_grads(grid, grads), d, gamma)
        for i in range(2):
            np.testing.assert_allclose(b[i].values, d.A[i], atol=1e-16)


def test_linear_solve_with_A_equals_gamma_zero_splitting(params, vput):
    p = params.with_(gamma=0.0)
    g = prepare_payoff(vput, 0.01)
    split = SplitSettings(N=5, nodes=16, grid=SMALL)
    ref = solve(vput, p, split, spot=SPOT)
    out = linear_solve(ref.grid.sample(g), None, derive(p), 5, p.T, 16)
    assert len(out) == 6
    np.testing.assert_allclose(out[0].values, ref.price_field.values, atol=1e-12)


def test_linear_solve_affine_terminal(params):
    d = derive(params)
    grid = LogGrid.around([0.0, 0.0], 4.0, 81)
    a = np.array([0.7, -1.2])
    b = np.array([0.03, -0.05])
    term = ScalarField(grid, grid.mesh() @ a)
    drifts = [_grads(grid, b) for _ in range(4)]
    out = linear_solve(term, drifts, d, 4, 1.0, 32)
    inner = grid.interior_mask(25)
    np.testing.assert_allclose(out[0].values[inner], term.values[inner] + a @ b, atol=1e-10)


def test_linear_solve_constant(params):
    grid = LogGrid.around([0.0, 0.0], 1.0, 11)
    out = linear_solve(ScalarField(grid, np.full(grid.shape, 2.5)), None, derive(params), 3, 1.0, 8)
    for f in out:
        np.testing.assert_allclose(f.values, 2.5, atol=1e-13)


def test_gamma_zero_converges_at_once(params, vput):
    pr = picard_iterate(vput, params.with_(gamma=0.0), PicardSettings(N_lin=4, nodes=16, grid=SMALL), spot=SPOT)
    assert pr.converged and pr.iterations == 1
    assert pr.trace[0][1] == 0.0


def test_constant_payoff(params):
    pr = picard_iterate(constant(3.0), params.with_(lambda_units=2.0),
                        PicardSettings(N_lin=3, nodes=8, grid=GridSpec(count=21)), spot=SPOT)
    assert pr.converged and pr.iterations == 1
    np.testing.assert_allclose(pr.result.price_field.values, 6.0, atol=1e-12)


def test_agrees_with_splitting_at_low_risk_aversion(params, vput):
    # the contraction holds for small gamma; compare nodewise away from the edges
    p = params.with_(gamma=0.01)
    pr = picard_iterate(vput, p, PicardSettings(), spot=SPOT)
    assert pr.converged
    ref = solve(vput, p, SplitSettings(), spot=SPOT)
    a, b = pr.result.price_field.values, ref.price_field.values
    inner = ref.grid.interior_mask(5)
    rel = np.abs(a - b)[inner] / np.maximum(np.abs(b[inner]), 0.01)
    assert rel.max() <= 0.02
    assert pr.result.price_at_spot == pytest.approx(ref.price_at_spot, rel=0.01)


def test_non_convergence_is_flagged(params, vput, tmp_path):
    pr = picard_iterate(vput, params, PicardSettings(max_iter=3, N_lin=4, nodes=16, grid=SMALL), spot=SPOT)
    assert not pr.converged
    assert pr.result.diagnostics["converged"] is False
    assert np.all(np.isfinite(pr.result.price_field.values))
    p = tmp_path / "trace.csv"
    pr.trace_to_csv(p)
    assert p.read_text().splitlines()[0] == "iteration,sup_delta"


def test_settings_errors(params, vput):
    with pytest.raises(ParameterError):
        PicardSettings(tol=0.0)
    with pytest.raises(ParameterError):
        PicardSettings(max_iter=0)
    with pytest.raises(ParameterError):
        picard_iterate(vput, params)
