import numpy as np
import pytest

from indiffprice.grid import LogGrid, ScalarField
from indiffprice.market import ParameterError, capm_adjusted, derive
from indiffprice.payoff import constant
from indiffprice.splitting import GridSpec, SplitSettings
from indiffprice.validation import (
    REPORT_COLUMNS,
    GridSolver,
    PropertyReport,
    ValidationContext,
    check_driver_consistency,
    check_gamma_monotonicity,
    check_gamma_zero_limit,
    check_generator_consistency,
    check_kappa_monotonicity,
    check_lambda_scaling,
    check_semigroup_axioms,
    generator_order,
    pde_residual,
    run_properties,
    write_reports,
)

SPOT = (50.0, 100.0)
FAST = SplitSettings(N=3, nodes=12, grid=GridSpec(count=41))


@pytest.fixture
def solver(vput):
    return GridSolver(vput, SPOT, FAST)


def test_residual_of_constant_is_zero(params):
    g = LogGrid.around([0.0, 0.0], 1.0, 21)
    f = ScalarField(g, np.full(g.shape, 3.0))
    res = pde_residual(f, f, derive(params), 1.0, 0.1)
    assert np.nanmax(np.abs(res.values)) == 0.0


def test_gamma_monotonicity(params, solver):
    r = check_gamma_monotonicity(params, [0.5, 1.0, 2.0], solver)
    assert r.passed and r.worst <= r.slack
    sp = r.detail["spot_prices"]
    assert sp[0] >= sp[1] >= sp[2]


def test_gamma_monotonicity_duplicates_and_constants(params):
    r = check_gamma_monotonicity(params, [1.0, 1.0], GridSolver(constant(2.0), SPOT, FAST))
    assert r.passed and r.worst == 0.0
    with pytest.raises(ParameterError):
        check_gamma_monotonicity(params, [2.0, 1.0], GridSolver(constant(2.0), SPOT, FAST))


def test_kappa_monotonicity(params, solver):
    r = check_kappa_monotonicity(capm_adjusted(params), [0.1, 0.15, 0.25], solver)
    assert r.passed
    p = r.detail["prices"]
    assert p[0] >= p[1] >= p[2]


def test_kappa_identical_pair(params, solver):
    r = check_kappa_monotonicity(capm_adjusted(params), [0.15, 0.15], solver)
    assert r.worst == 0.0


def test_kappa_precondition(params, solver):
    with pytest.raises(ParameterError, match="precondition violated"):
        check_kappa_monotonicity(params, [0.1, 0.2], solver)


def test_gamma_zero_limit_constant_payoff(params):
    r = check_gamma_zero_limit(capm_adjusted(params), GridSolver(constant(5.0), SPOT, FAST))
    assert r.detail["rel_small"] <= 1e-12 and r.detail["rel_zero"] <= 1e-12


def test_gamma_zero_limit_approaches_benchmark(params, solver):
    p = capm_adjusted(params)
    errs = []
    for g in (0.5, 0.1, 0.01):
        r = check_gamma_zero_limit(p, solver, gamma_small=g)
        errs.append(r.detail["rel_small"])
    assert errs[0] >= errs[1] >= errs[2]


def test_lambda_scaling(params, solver):
    r = check_lambda_scaling(params.with_(gamma=0.5), [1.0, 2.0], solver)
    assert r.passed and r.detail["identity_error"] <= 1e-9
    # more units, lower unit price
    assert r.detail["unit_price_increase"] <= 0.0


def test_lambda_linear_at_gamma_zero(params, solver):
    r = check_lambda_scaling(params.with_(gamma=0.0), [1.0, 3.0], solver)
    assert r.detail["identity_error"] <= 1e-9


def test_semigroup_axioms(params, vput, solver):
    r = check_semigroup_axioms(params, vput, solver)
    assert r.passed
    assert r.detail["constant_error"] <= 1e-12
    assert r.detail["cash_error"] <= 1e-12
    assert r.detail["order_violations"] == 0


def test_generator_orders():
    for which in ("S1", "S2"):
        r = generator_order(which)
        assert r["order"] >= 1.0
        assert r["errors"][-1] < r["errors"][0]
    assert check_generator_consistency().passed


def test_driver_consistency_detects_a_broken_driver(params):
    assert check_driver_consistency(params).passed

    def wrong(z, p):
        from indiffprice.analytic import bsde_driver

        return bsde_driver(z, p) + 1e-9

    assert not check_driver_consistency(params, driver=wrong).passed


def test_run_properties_selection(params, vput):
    ctx = ValidationContext(params, vput, SPOT, FAST)
    assert run_properties(ctx, []) == []
    with pytest.raises(ParameterError):
        run_properties(ctx, ["no_such_property"])
    reps = run_properties(ctx, ["driver_consistency", "lambda_scaling"])
    assert [r.name for r in reps] == ["driver_consistency", "lambda_scaling"]
    assert all(r.passed for r in reps)
    bad = ValidationContext(params, vput, SPOT, FAST, inject_fault="negate_driver")
    assert not run_properties(bad, ["driver_consistency"])[0].passed


def test_write_reports(tmp_path):
    p = tmp_path / "r.csv"
    write_reports(p, [PropertyReport("x", [{}], -1.0, 0.5, True)], header="# h")
    lines = p.read_text().splitlines()
    assert lines[0] == "# h" and lines[1] == ",".join(REPORT_COLUMNS)
    assert lines[2].startswith("x,1,") and lines[2].endswith(",pass")
