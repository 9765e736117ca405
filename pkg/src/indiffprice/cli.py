"""Batch command line: price, figure tables, property validation, N study.

Every command writes a CSV table (stdout or ``--out``) whose first line is a
``#`` schema tag, followed by a header row; floats are written as ``%.17e``.
Exit codes: 0 success, 1 property failure, 2 config error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .analytic import complete_market_price, mc_complete_market_price, mc_no_hedge_price, no_hedge_price
from .config import ConfigError, ExperimentConfig, load
from .market import MarketParams, ParameterError, derive
from .picard import picard_iterate
from .splitting import NumericalAbort, prepare_payoff, solve
from .validation import REPORT_COLUMNS, ValidationContext, run_properties

SCHEMA_VERSION = 1
FIGURES = ("fig-n", "fig-approx", "fig-s", "fig-v", "fig-gamma")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17e}"


def write_table(fh, kind: str, columns, rows) -> None:
    fh.write(f"# indiffprice {kind} v{SCHEMA_VERSION}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])


def _pmap(func, items, threads: int):
    # results come back in input order whatever the completion order
    if threads <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(func, items))


def price_point(cfg: ExperimentConfig, market: MarketParams, spot, scheme: str | None = None,
                split=None) -> tuple[float, float, dict]:
    """Price and index hedge of ``lambda_units`` claims at one spot."""
    scheme = scheme or cfg.scheme
    split = split or cfg.split
    spot = tuple(float(s) for s in spot)
    g = prepare_payoff(cfg.payoff, split.epsilon_rel)
    if scheme == "splitting":
        r = solve(cfg.payoff, market, split, spot=spot)
        return r.price_at_spot, r.hedge_at_spot, {}
    if scheme == "picard":
        pr = picard_iterate(cfg.payoff, market, cfg.picard, spot=spot)
        return pr.result.price_at_spot, pr.result.hedge_at_spot, {"converged": pr.converged}
    if scheme == "analytic-no-hedge":
        return no_hedge_price(g, market, spot, cfg.quad), 0.0, {}
    if scheme == "analytic-complete":
        return complete_market_price(g, market, spot, cfg.quad), math.nan, {}
    if scheme == "mc-no-hedge":
        est = mc_no_hedge_price(g, market, spot, cfg.mc_paths, cfg.seed)
        return est.value, 0.0, {"stderr": est.stderr}
    if scheme == "mc-complete":
        est = mc_complete_market_price(g, market, spot, cfg.mc_paths, cfg.seed)
        return est.value, math.nan, {"stderr": est.stderr}
    raise ConfigError("solver.scheme", f"unknown scheme {scheme!r}")


def cmd_price(cfg: ExperimentConfig, timing: bool = True):
    m = cfg.market
    t0 = time.perf_counter()
    price, hedge, info = price_point(cfg, m, cfg.spot)
    if info.get("converged") is False:
        print("warning: Picard iteration did not converge; best iterate reported", file=sys.stderr)
    wall = (time.perf_counter() - t0) * 1e3 if timing else 0.0
    cols = ["scheme"] + [f"s{i + 1}" for i in range(m.n)] + ["gamma", "lambda", "N", "price", "hedge", "wall_ms"]
    row = [cfg.scheme, *cfg.spot, m.gamma, m.lambda_units, cfg.split.N, price, hedge, wall]
    return "price", cols, [row]


def _fig_n(cfg, threads):
    pts = [("left", T, N) for T in cfg.get("figure.fig_n.T_left") for N in cfg.get("figure.fig_n.N")]
    pts += [("right", T, N) for T in cfg.get("figure.fig_n.T_right") for N in cfg.get("figure.fig_n.N")]

    def run(p):
        panel, T, N = p
        m = cfg.market.with_(T=float(T))
        return [panel, float(T), int(N), price_point(cfg, m, cfg.spot, "splitting", replace(cfg.split, N=int(N)))[0]]

    return ["panel", "T", "N", "price"], _pmap(run, pts, threads)


def _fig_approx(cfg, threads):
    m = cfg.market.with_(sigma_bar_P=0.0)
    s2 = cfg.get("figure.fig_approx.s2")

    def run(s1):
        sp = (float(s1), float(s2))
        exp = price_point(cfg, m, sp, "analytic-no-hedge")[0]
        spl = price_point(cfg, m, sp, "splitting")[0]
        return [sp[0], sp[1], exp, spl, (spl - exp) / max(abs(exp), 1e-2)]

    return ["s1", "s2", "explicit", "splitting", "rel_diff"], _pmap(run, cfg.get("figure.fig_approx.s1"), threads)


def _three_prices(cfg, sp):
    m = cfg.market
    return [
        price_point(cfg, m, sp, "analytic-complete")[0],
        price_point(cfg, m, sp, "splitting")[0],
        price_point(cfg, m, sp, "analytic-no-hedge")[0],
    ]


def _fig_s(cfg, threads):
    pts = [(float(s1), float(s2)) for s2 in cfg.get("figure.fig_s.s2") for s1 in cfg.get("figure.fig_s.s1")]
    rows = _pmap(lambda sp: [sp[0], sp[1], *_three_prices(cfg, sp)], pts, threads)
    return ["s1", "s2", "risk_neutral", "hedged", "no_hedge"], rows


def _fig_v(cfg, threads):
    s1 = float(cfg.get("figure.fig_v.s1"))
    pts = [(s1, float(s2)) for s2 in cfg.get("figure.fig_v.s2")]
    rows = _pmap(lambda sp: [sp[0], sp[1], *_three_prices(cfg, sp)], pts, threads)
    return ["s1", "s2", "risk_neutral", "hedged", "no_hedge"], rows


def _fig_gamma(cfg, threads):
    base = cfg.market
    pts = []
    for T in cfg.get("figure.fig_gamma.T"):
        for gam in cfg.get("figure.fig_gamma.gammas"):
            pts.append(("gamma", base.with_(T=float(T), gamma=float(gam))))
    right = base.with_assets(mu=cfg.get("figure.fig_gamma.mu_right"))
    for T in cfg.get("figure.fig_gamma.T"):
        for s1, s2 in cfg.get("figure.fig_gamma.vol_pairs"):
            pts.append(("vol", right.with_(T=float(T)).with_assets(sigma=[float(s1), float(s2)])))

    def run(p):
        panel, m = p
        d = derive(m)
        price = price_point(cfg, m, cfg.spot, "splitting")[0]
        rn = price_point(cfg, m, cfg.spot, "analytic-complete")[0]
        return [panel, m.T, m.gamma, m.sigma[0], m.sigma[1], d.rho_assets[0, 1], d.rho_index[0],
                d.rho_index[1], price, rn]

    cols = ["panel", "T", "gamma", "sigma1", "sigma2", "rho12", "rho1P", "rho2P", "price", "risk_neutral"]
    return cols, _pmap(run, pts, threads)


def cmd_figure(cfg: ExperimentConfig, name: str, threads: int = 1):
    if cfg.market.n != 2 and name != "fig-n":
        raise ConfigError("market.mu", f"{name} needs a two-asset market")
    table = {"fig-n": _fig_n, "fig-approx": _fig_approx, "fig-s": _fig_s, "fig-v": _fig_v,
             "fig-gamma": _fig_gamma}[name]
    cols, rows = table(cfg, threads)
    return name, cols, rows


def cmd_validate(cfg: ExperimentConfig):
    names = cfg.get("validate.properties")
    fault = cfg.get("validate.inject_fault") or None
    ctx = ValidationContext(cfg.market, cfg.payoff, cfg.spot, cfg.split, seed=cfg.seed, inject_fault=fault)
    try:
        reports = run_properties(ctx, names)
    except ParameterError as e:
        raise ConfigError(e.field, str(e)) from None
    rows = [r.row() for r in reports]
    return "validate", REPORT_COLUMNS, rows, all(r.passed for r in reports)


def cmd_converge(cfg: ExperimentConfig, threads: int = 1):
    Ns = [int(n) for n in cfg.get("converge.N")]
    needed = sorted(set(Ns) | {2 * n for n in Ns})
    prices = dict(zip(needed, _pmap(
        lambda N: price_point(cfg, cfg.market, cfg.spot, "splitting", replace(cfg.split, N=N))[0],
        needed, threads)))
    rows = []
    for N in Ns:
        a, b = prices[N], prices[2 * N]
        rows.append([N, a, b, abs(a - b), abs(a - b) / max(abs(b), 1e-2)])
    return "converge", ["N", "price_N", "price_2N", "abs_diff", "rel_diff"], rows


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file overriding the shipped defaults")
    common.add_argument("--out", help="write the CSV here instead of stdout")
    common.add_argument("--seed", type=int, help="seed for Monte Carlo and random checks")
    common.add_argument("--threads", type=int, default=1, help="parallel sweep points")
    common.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")

    ap = argparse.ArgumentParser(prog="indiffprice", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("price", parents=[common], help="price and hedge at the configured spot")
    fig = sub.add_parser("figure", parents=[common], help="sweep table for one figure")
    fig.add_argument("name", choices=FIGURES)
    sub.add_parser("validate", parents=[common], help="run the property checks")
    sub.add_parser("converge", parents=[common], help="time-step doubling study")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("config error: --threads: must be >= 1", file=sys.stderr)
        return 2
    if args.seed is not None and args.seed < 0:
        print("config error: --seed: must be >= 0", file=sys.stderr)
        return 2
    status = 0
    try:
        overrides = {"seed": args.seed} if args.seed is not None else None
        cfg = load(args.config, overrides=overrides)
        if args.command == "price":
            kind, cols, rows = cmd_price(cfg, timing=not args.no_timing)
        elif args.command == "figure":
            kind, cols, rows = cmd_figure(cfg, args.name, args.threads)
        elif args.command == "validate":
            kind, cols, rows, ok = cmd_validate(cfg)
            status = 0 if ok else 1
        else:
            kind, cols, rows = cmd_converge(cfg, args.threads)
    except (ConfigError, ParameterError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalAbort as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return 3

    buf = io.StringIO()
    write_table(buf, kind, cols, rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return status


if __name__ == "__main__":
    sys.exit(main())
