"""Executable property checks for the pricing engine.

Each ``check_*`` returns a :class:`PropertyReport` carrying the worst signed
violation even when it passes.  Slacks are stated relative to the payoff
bound so the checks do not depend on the payoff's scale.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analytic import bsde_driver, complete_market_price, reduced_driver, z_from_gradient
from .grid import LogGrid, ScalarField, gradient, second_derivative
from .market import AssetParams, DerivedParams, MarketParams, ParameterError, capm_adjusted, capm_residual, derive
from .payoff import Payoff, constant
from .splitting import PriceResult, SplitSettings, apply_S1, apply_S2, prepare_payoff, solve

CAPM_TOL = 1e-12


@dataclass
class PropertyReport:
    name: str
    points: list = field(default_factory=list)
    # positive means the property is violated by that much
    worst: float = 0.0
    slack: float = 0.0
    passed: bool = True
    detail: dict = field(default_factory=dict)

    def row(self) -> list[str]:
        return [self.name, str(len(self.points)), f"{self.worst:.17e}", f"{self.slack:.17e}",
                "pass" if self.passed else "fail"]


REPORT_COLUMNS = ["property", "points", "worst_violation", "slack", "status"]


def write_reports(path, reports: Sequence[PropertyReport], header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow(r.row())


@dataclass
class GridSolver:
    """Splitting solves for one payoff and spot, on a grid shared by all calls.

    Sharing the grid makes nodewise comparisons across parameter points
    meaningful; it is built from the first parameters seen unless given.
    """

    payoff: Payoff
    spot: tuple
    settings: SplitSettings = field(default_factory=SplitSettings)
    grid: LogGrid | None = None

    @property
    def bound(self) -> float:
        return self.payoff.bound

    def grid_for(self, params: MarketParams) -> LogGrid:
        if self.grid is None:
            g = prepare_payoff(self.payoff, self.settings.epsilon_rel)
            self.grid = self.settings.grid.build(params, g, self.spot)
        return self.grid

    def __call__(self, params: MarketParams, payoff: Payoff | None = None) -> PriceResult:
        return solve(payoff or self.payoff, params, self.settings, spot=self.spot, grid=self.grid_for(params))


def pde_residual(price0: ScalarField, price_dt: ScalarField, derived: DerivedParams, gamma: float,
                 dt_probe: float, margin: int = 3) -> ScalarField:
    """Discrete residual of the log-coordinate pricing PDE at t = 0.

    Forward difference in time between the slices at 0 and ``dt_probe``,
    central differences in space on the t = 0 slice.  Nodes within
    ``margin`` of the boundary are NaN.
    """
    grid = price0.grid
    n = grid.ndim
    h = grid.spacing
    grads = [g.values for g in gradient(price0)]
    hess = np.empty((n, n) + grid.shape)
    for i in range(n):
        hess[i, i] = second_derivative(price0, i)
        for j in range(i + 1, n):
            hess[i, j] = hess[j, i] = np.gradient(grads[i], h[j], axis=j)
    sb, sig, A = derived.sigma_bar, derived.sigma, derived.A
    u_eta = sum(sb[i] * grads[i] for i in range(n))
    u_eta_eta = sum(sb[i] * sb[j] * hess[i, j] for i in range(n) for j in range(n))
    res = (price_dt.values - price0.values) / dt_probe
    for i in range(n):
        res = res + 0.5 * sig[i] ** 2 * hess[i, i] + A[i] * grads[i] - 0.5 * gamma * sig[i] ** 2 * grads[i] ** 2
    res = res + 0.5 * u_eta_eta - 0.5 * gamma * derived.one_minus_kappa * u_eta**2
    return price0.with_values(np.where(grid.interior_mask(margin), res, np.nan))


def residual_sup(result: PriceResult, params: MarketParams, margin: int = 3) -> float:
    """Interior sup of the residual from the last two slices of a solve."""
    if result.slices is None or len(result.slices) < 2:
        raise ValueError("solve with keep_slices=True to get a residual")
    dt = float(result.times[-2] - result.times[-1])
    res = pde_residual(result.slices[-1], result.slices[-2], derive(params), params.gamma, dt, margin)
    return float(np.nanmax(np.abs(res.values)))


def check_gamma_monotonicity(params: MarketParams, gammas: Sequence[float], solver: GridSolver,
                             slack_rel: float = 1e-6) -> PropertyReport:
    """Prices should not increase with risk aversion, at every node."""
    gammas = list(gammas)
    if any(b < a for a, b in zip(gammas, gammas[1:])) or any(g <= 0 for g in gammas):
        raise ParameterError("gammas", "need positive, sorted risk aversions")
    results = [solver(params.with_(gamma=g)) for g in gammas]
    fields = [r.price_field.values for r in results]
    worst = 0.0
    if len(fields) > 1:
        worst = max(float(np.max(hi - lo)) for lo, hi in zip(fields, fields[1:]))
    slack = slack_rel * solver.bound
    spot = [float(r.price_at(solver.spot)) for r in results]
    return PropertyReport("gamma_monotonicity", [{"gamma": g} for g in gammas], worst, slack,
                          worst <= slack, {"spot_prices": spot})


def check_kappa_monotonicity(params_capm: MarketParams, sigma_P_list: Sequence[float], solver: GridSolver,
                             slack_rel: float = 1e-6) -> PropertyReport:
    """Under exact CAPM the spot price should not increase with the index's own volatility.

    Drifts are re-derived at every point since the index Sharpe ratio moves
    with ``sigma_P``.
    """
    if np.max(np.abs(capm_residual(params_capm))) > CAPM_TOL:
        raise ParameterError("mu", "precondition violated: CAPM residual exceeds 1e-12")
    order = sorted(sigma_P_list, key=lambda s: s * s)
    prices, points = [], []
    for s in order:
        p = capm_adjusted(params_capm.with_(sigma_P=s))
        if np.max(np.abs(capm_residual(p))) > CAPM_TOL:
            raise ParameterError("mu", "precondition violated: CAPM residual exceeds 1e-12")
        prices.append(float(solver(p).price_at(solver.spot)))
        points.append({"sigma_P": s, "mu": p.mu.tolist()})
    diffs = [b - a for a, b in zip(prices, prices[1:])]
    worst = max(diffs) if diffs else 0.0
    slack = slack_rel * solver.bound
    return PropertyReport("kappa_monotonicity", points, worst, slack, worst <= slack, {"prices": prices})


def check_gamma_zero_limit(params_capm: MarketParams, solver: GridSolver,
                           benchmark: Callable[[MarketParams], float] | None = None,
                           gamma_small: float = 0.01, tol_small: float = 0.02,
                           tol_zero: float = 0.005) -> PropertyReport:
    """Small risk aversion under CAPM should recover the complete-market price.

    ``worst`` is the larger of the two relative errors minus its tolerance.
    """
    if np.max(np.abs(capm_residual(params_capm))) > CAPM_TOL:
        raise ParameterError("mu", "precondition violated: CAPM residual exceeds 1e-12")
    if benchmark is None:
        def benchmark(p):
            return complete_market_price(solver.payoff, p, solver.spot)
    ref = benchmark(params_capm)
    small = float(solver(params_capm.with_(gamma=gamma_small)).price_at(solver.spot))
    zero = float(solver(params_capm.with_(gamma=0.0)).price_at(solver.spot))
    floor = 1e-2
    e_small = abs(small - ref) / max(abs(ref), floor)
    e_zero = abs(zero - ref) / max(abs(ref), floor)
    worst = max(e_small - tol_small, e_zero - tol_zero)
    return PropertyReport(
        "gamma_zero_limit",
        [{"gamma": gamma_small}, {"gamma": 0.0}],
        worst, 0.0, worst <= 0.0,
        {"benchmark": ref, "price_small": small, "price_zero": zero, "rel_small": e_small, "rel_zero": e_zero},
    )


def check_lambda_scaling(params: MarketParams, lambdas: Sequence[float], solver: GridSolver,
                         tol: float = 1e-9) -> PropertyReport:
    """``solve(gamma, lambda) = lambda * solve(lambda * gamma, 1)`` nodewise, and
    unit prices do not increase with the number of units."""
    base = params.with_(lambda_units=1.0)
    worst_id = 0.0
    units = []
    for lam in lambdas:
        lhs = solver(params.with_(lambda_units=lam)).price_field.values
        rhs = lam * solver(base.with_(gamma=lam * params.gamma)).price_field.values
        worst_id = max(worst_id, float(np.max(np.abs(lhs - rhs))))
        units.append((lam, lhs / lam))
    units.sort(key=lambda t: t[0])
    worst_mono = -math.inf
    for (_, a), (_, b) in zip(units, units[1:]):
        worst_mono = max(worst_mono, float(np.max(b - a)))
    mono_slack = 1e-6 * solver.bound
    passed = worst_id <= tol and (len(units) < 2 or worst_mono <= mono_slack)
    return PropertyReport(
        "lambda_scaling", [{"lambda": lam} for lam in lambdas], worst_id - tol, 0.0, passed,
        {"identity_error": worst_id, "unit_price_increase": worst_mono if len(units) > 1 else 0.0},
    )


def check_semigroup_axioms(params: MarketParams, payoff: Payoff, solver: GridSolver,
                           k: float = 10.0, tol: float = 1e-12) -> PropertyReport:
    """Constant preservation, cash invariance and order preservation of a full solve.

    The order pair is the payoff against a copy with a larger deadweight
    loss, which lies below it everywhere.
    """
    lam = params.lambda_units
    const = solver(params, constant(k, params.n)).price_field.values
    e_const = float(np.max(np.abs(const - lam * k)))

    g = prepare_payoff(payoff, solver.settings.epsilon_rel)
    shifted = Payoff(lambda s: g(s) + k, n=g.n, bound=g.bound + k, name="shifted", breakpoints=g.breakpoints)
    base = solver(params, g).price_field.values
    cash = solver(params, shifted).price_field.values
    e_cash = float(np.max(np.abs(cash - base - lam * k)))

    lower = _lower_payoff(payoff, solver.settings.epsilon_rel)
    low = solver(params, lower).price_field.values
    violations = int(np.count_nonzero(low > base))
    worst = max(e_const - tol, e_cash - tol, float(np.max(low - base)) if violations else -tol)
    return PropertyReport(
        "semigroup_axioms", [{"k": k}], worst, 0.0,
        e_const <= tol and e_cash <= tol and violations == 0,
        {"constant_error": e_const, "cash_error": e_cash, "order_violations": violations},
    )


def _lower_payoff(payoff: Payoff, epsilon_rel: float) -> Payoff:
    from .payoff import VulnerablePayoffParams, vulnerable_put

    vp = payoff.info.get("params")
    if isinstance(vp, VulnerablePayoffParams):
        worse = VulnerablePayoffParams(vp.K, vp.L, min(1.0, vp.alpha + 0.25), vp.epsilon)
        return prepare_payoff(vulnerable_put(worse), epsilon_rel)
    g = prepare_payoff(payoff, epsilon_rel)
    return Payoff(lambda s: 0.5 * g(s), n=g.n, bound=g.bound, name="half", breakpoints=g.breakpoints)


def generator_order(which: str = "S1", dts=(0.04, 0.02, 0.01, 0.005), gamma: float = 1.0,
                    h: float = 1e-3) -> dict:
    """Observed dt-order of ``(S(dt) phi - phi)/dt - L phi`` for a concave quadratic.

    One asset on a fine 1-d grid so interpolation error stays far below the
    O(dt) term; the reference generator is evaluated from the exact
    derivatives of phi.  The order is the log-log slope of the error.
    """
    asset = AssetParams(mu=0.05, sigma=0.5, sigma_bar=1.0)
    params = MarketParams(mu_P=0.1, sigma_P=0.2, sigma_bar_P=0.0, assets=(asset,), gamma=gamma)
    d = derive(params)
    grid = LogGrid.around([0.0], 2.0, int(round(4.0 / h)) + 1)
    x = grid.coords()[0]
    phi = grid.sample(lambda s: np.log(s[..., 0]) - np.log(s[..., 0]) ** 2)
    p, b = 1.0 - 2.0 * x, -2.0
    if which == "S1":
        c = gamma * d.one_minus_kappa
        sb = d.sigma_bar[0]
        L = 0.5 * sb**2 * b - 0.5 * c * (sb * p) ** 2
        step = apply_S1
    else:
        s, A = d.sigma[0], d.A[0]
        L = 0.5 * s**2 * b + A * p - 0.5 * gamma * s**2 * p**2
        step = apply_S2
    mask = np.abs(x) <= 0.5
    errs = []
    for dt in dts:
        out = step(phi, dt, d, gamma)
        D = (out.values - phi.values) / dt
        errs.append(float(np.max(np.abs(D - L)[mask])))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return {"dts": list(dts), "errors": errs, "order": slope}


def check_generator_consistency(min_order: float = 1.0) -> PropertyReport:
    r1 = generator_order("S1")
    r2 = generator_order("S2")
    worst = max(min_order - r1["order"], min_order - r2["order"])
    return PropertyReport("generator_consistency", [{"step": "S1"}, {"step": "S2"}], worst, 0.0,
                          worst <= 0.0, {"S1": r1, "S2": r2})


def check_driver_consistency(params: MarketParams, samples: int = 1000, seed: int = 0,
                             driver: Callable = bsde_driver, tol: float = 1e-12) -> PropertyReport:
    """BSDE driver at ``z(grad u)`` against the reduced gradient form."""
    rng = np.random.default_rng(seed)
    grads = rng.normal(scale=2.0, size=(samples, params.n))
    lhs = driver(z_from_gradient(grads, params), params)
    rhs = reduced_driver(grads, params)
    err = float(np.max(np.abs(lhs - rhs)))
    return PropertyReport("driver_consistency", [{"samples": samples, "seed": seed}], err - tol, 0.0,
                          err <= tol, {"max_error": err})


def check_small_vol_limit(params: MarketParams, solver_factory: Callable[[MarketParams], GridSolver],
                          scales=(1.0, 0.3, 0.1, 0.03), tol: float = 0.02) -> PropertyReport:
    """With Sharpe ratios matched to the index, shrinking the idiosyncratic
    volatilities should approach the complete-market price."""
    ratio = params.mu_P / params.sigma_bar_P
    prices, refs, points = [], [], []
    for s in scales:
        p = params.with_(sigma_P=params.sigma_P * s).with_assets(
            sigma=params.sigma * s, mu=ratio * params.sigma_bar
        )
        solver = solver_factory(p)
        prices.append(float(solver(p).price_at(solver.spot)))
        refs.append(complete_market_price(solver.payoff, p, solver.spot))
        points.append({"scale": s})
    rel = [abs(a - b) / max(abs(b), 1e-2) for a, b in zip(prices, refs)]
    worst = rel[-1] - tol
    return PropertyReport("small_vol_limit", points, worst, 0.0, worst <= 0.0,
                          {"prices": prices, "benchmarks": refs, "rel": rel})


def check_residual_refinement(params: MarketParams, payoff: Payoff, spot, N: int = 11,
                              count: int = 101) -> PropertyReport:
    """The interior residual sup should shrink when N and node counts double."""
    from .splitting import GridSpec

    sups = []
    for mult in (1, 2):
        st = SplitSettings(N=N * mult, grid=GridSpec(count=(count - 1) * mult + 1), keep_slices=True)
        r = solve(payoff, params, st, spot=spot)
        sups.append(residual_sup(r, params))
    worst = sups[1] - sups[0]
    return PropertyReport("residual_refinement", [{"N": N, "count": count}, {"N": 2 * N, "count": 2 * count - 1}],
                          worst, 0.0, worst < 0.0, {"residual_sup": sups})


@dataclass
class ValidationContext:
    params: MarketParams
    payoff: Payoff
    spot: tuple
    settings: SplitSettings = field(default_factory=SplitSettings)
    seed: int = 0
    # test hook: name of a deliberately broken ingredient
    inject_fault: str | None = None

    def solver(self, params: MarketParams | None = None) -> GridSolver:
        s = GridSolver(self.payoff, self.spot, self.settings)
        s.grid_for(params or self.params)
        return s


def _negated_driver(z, params):
    return -bsde_driver(z, params)


def _run_gamma(ctx):
    return check_gamma_monotonicity(ctx.params, [0.5, 1.0, 2.0], ctx.solver())


def _run_kappa(ctx):
    return check_kappa_monotonicity(capm_adjusted(ctx.params), [0.1, 0.15, 0.25], ctx.solver())


def _run_gamma_zero(ctx):
    return check_gamma_zero_limit(capm_adjusted(ctx.params), ctx.solver())


def _run_lambda(ctx):
    return check_lambda_scaling(ctx.params.with_(gamma=0.5), [1.0, 2.0], ctx.solver())


def _run_axioms(ctx):
    return check_semigroup_axioms(ctx.params, ctx.payoff, ctx.solver())


def _run_driver(ctx):
    driver = _negated_driver if ctx.inject_fault == "negate_driver" else bsde_driver
    return check_driver_consistency(ctx.params, seed=ctx.seed, driver=driver)


def _run_small_vol(ctx):
    return check_small_vol_limit(ctx.params, lambda p: GridSolver(ctx.payoff, ctx.spot, ctx.settings))


def _run_residual(ctx):
    return check_residual_refinement(ctx.params, ctx.payoff, ctx.spot)


PROPERTIES: dict[str, Callable[[ValidationContext], PropertyReport]] = {
    "gamma_monotonicity": _run_gamma,
    "kappa_monotonicity": _run_kappa,
    "gamma_zero_limit": _run_gamma_zero,
    "lambda_scaling": _run_lambda,
    "semigroup_axioms": _run_axioms,
    "generator_consistency": lambda ctx: check_generator_consistency(),
    "driver_consistency": _run_driver,
    "small_vol_limit": _run_small_vol,
    "residual_refinement": _run_residual,
}


def run_properties(ctx: ValidationContext, names: Sequence[str] | None = None) -> list[PropertyReport]:
    names = list(PROPERTIES) if names is None else list(names)
    unknown = [n for n in names if n not in PROPERTIES]
    if unknown:
        raise ParameterError("validate.properties", f"unknown properties {unknown}")
    return [PROPERTIES[n](ctx) for n in names]
