"""Experiment configuration: TOML tables flattened to dotted keys.

The shipped ``default.toml`` defines every key and its type; a user file
overrides a subset.  Unknown keys and type mismatches are errors that name
the offending dotted path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources

import tomli

from .analytic import QuadratureSpec
from .market import AssetParams, MarketParams, ParameterError
from .payoff import Payoff, make_payoff
from .picard import PicardSettings
from .splitting import GridSpec, SplitSettings

SCHEMES = ("splitting", "picard", "analytic-no-hedge", "analytic-complete", "mc-no-hedge", "mc-complete")


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def default_text() -> str:
    return resources.files("indiffprice").joinpath("default.toml").read_text()


def _kind(v):
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, str):
        return "string"
    if isinstance(v, list):
        return "list"
    return type(v).__name__


def load_flat(path=None, text: str | None = None) -> dict:
    """Defaults overlaid with the user's file (or text)."""
    flat = flatten(tomli.loads(default_text()))
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError("--config", f"no such file {path}") from None
        except tomli.TOMLDecodeError as e:
            raise ConfigError("--config", f"invalid TOML: {e}") from None
    elif text is not None:
        try:
            user = tomli.loads(text)
        except tomli.TOMLDecodeError as e:
            raise ConfigError("config", f"invalid TOML: {e}") from None
    else:
        user = {}
    for key, value in flatten(user).items():
        if key not in flat:
            raise ConfigError(key, "unknown key")
        if _kind(value) != _kind(flat[key]):
            raise ConfigError(key, f"expected {_kind(flat[key])}, got {_kind(value)}")
        if isinstance(value, list) and flat[key]:
            want = _kind(flat[key][0])
            bad = [v for v in value if _kind(v) != want]
            if bad:
                raise ConfigError(key, f"list entries must be {want}, got {bad[0]!r}")
        flat[key] = value
    return flat


@dataclass
class ExperimentConfig:
    market: MarketParams
    payoff: Payoff
    spot: tuple
    scheme: str
    split: SplitSettings
    picard: PicardSettings
    quad: QuadratureSpec
    mc_paths: int
    seed: int
    raw: dict = field(default_factory=dict)

    def get(self, key: str):
        return self.raw[key]

    def with_market(self, market: MarketParams) -> "ExperimentConfig":
        return replace(self, market=market)


def _market(flat: dict) -> MarketParams:
    mu, sig, sb = flat["market.mu"], flat["market.sigma"], flat["market.sigma_bar"]
    if not (len(mu) == len(sig) == len(sb)) or not mu:
        raise ConfigError("market.mu", "mu, sigma and sigma_bar need the same nonzero length")
    try:
        assets = tuple(AssetParams(float(a), float(b), float(c)) for a, b, c in zip(mu, sig, sb))
        return MarketParams(
            mu_P=float(flat["market.mu_P"]),
            sigma_P=float(flat["market.sigma_P"]),
            sigma_bar_P=float(flat["market.sigma_bar_P"]),
            assets=assets,
            gamma=float(flat["market.gamma"]),
            lambda_units=float(flat["market.lambda_units"]),
            T=float(flat["market.T"]),
        )
    except ParameterError as e:
        raise ConfigError(f"market.{e.field}", str(e)) from None


def build(flat: dict) -> ExperimentConfig:
    market = _market(flat)
    name = flat["payoff.name"]
    if name == "vulnerable_put":
        kw = {k: flat[f"payoff.{k}"] for k in ("K", "L", "alpha")}
    elif name == "constant":
        kw = {"k": flat["payoff.k"], "n": market.n}
    elif name == "basket_put":
        kw = {"K": flat["payoff.K"], "weights": flat["payoff.weights"]}
    else:
        kw = {"K": flat["payoff.K"], "n": market.n}
    try:
        payoff = make_payoff(name, **kw)
    except ParameterError as e:
        raise ConfigError(f"payoff.{e.field}", str(e)) from None
    if payoff.n != market.n:
        raise ConfigError("payoff.name", f"{name} takes {payoff.n} assets, market has {market.n}")
    spot = tuple(float(s) for s in flat["spot.s"])
    if len(spot) != market.n or min(spot) <= 0:
        raise ConfigError("spot.s", f"need {market.n} positive spot prices")
    scheme = flat["solver.scheme"]
    if scheme not in SCHEMES:
        raise ConfigError("solver.scheme", f"unknown scheme {scheme!r}")
    grid = GridSpec(count=int(flat["solver.grid_count"]), width_sd=float(flat["solver.grid_width_sd"]))
    try:
        split = SplitSettings(
            N=int(flat["solver.N"]),
            nodes=int(flat["solver.gh_nodes"]),
            grid=grid,
            epsilon_rel=float(flat["solver.epsilon_rel"]),
            order=flat["solver.order"],
        )
        tol = float(flat["solver.picard_tol"])
        picard = PicardSettings(
            tol=tol if tol > 0 else None,
            max_iter=int(flat["solver.picard_max_iter"]),
            N_lin=int(flat["solver.N"]),
            nodes=int(flat["solver.gh_nodes"]),
            grid=grid,
            epsilon_rel=float(flat["solver.epsilon_rel"]),
        )
        quad = QuadratureSpec(int(flat["solver.quad_nodes"]), float(flat["solver.quad_width"]))
    except ParameterError as e:
        raise ConfigError(f"solver.{e.field}", str(e)) from None
    if int(flat["solver.grid_count"]) < 3:
        raise ConfigError("solver.grid_count", "need at least 3 nodes per axis")
    paths = int(flat["solver.mc_paths"])
    if paths < 2:
        raise ConfigError("solver.mc_paths", "need at least 2 paths")
    seed = int(flat["seed"])
    if seed < 0:
        raise ConfigError("seed", "must be a nonnegative integer")
    return ExperimentConfig(market, payoff, spot, scheme, split, picard, quad, paths, seed, flat)


def load(path=None, text: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    flat = load_flat(path, text)
    for k, v in (overrides or {}).items():
        if k not in flat:
            raise ConfigError(k, "unknown key")
        flat[k] = v
    return build(flat)
