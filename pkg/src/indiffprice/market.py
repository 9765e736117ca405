"""One-factor market model: traded index P plus n non-traded assets.

Each asset loads on a common Brownian factor (``sigma_bar``) and on its own
idiosyncratic Brownian motion (``sigma``).  Users supply loadings; the
correlations are derived, never input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class ParameterError(ValueError):
    """Invalid model or solver parameters; ``field`` names the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class AssetParams:
    mu: float
    sigma: float
    sigma_bar: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ParameterError("sigma", f"must be >= 0, got {self.sigma}")
        if self.sigma**2 + self.sigma_bar**2 <= 0:
            raise ParameterError("sigma_bar", "asset has zero total volatility")

    @property
    def total_vol(self) -> float:
        return math.hypot(self.sigma, self.sigma_bar)


@dataclass(frozen=True)
class MarketParams:
    """Coefficients of the index and asset dynamics plus the investor's data.

    ``gamma`` is the exponential risk aversion (0 means risk neutral pricing
    under the minimal-entropy drift), ``lambda_units`` the number of option
    units held and ``T`` the maturity in years.
    """

    mu_P: float
    sigma_P: float
    sigma_bar_P: float
    assets: tuple[AssetParams, ...]
    gamma: float = 1.0
    lambda_units: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        if len(self.assets) < 1:
            raise ParameterError("assets", "need at least one asset")
        if self.sigma_P < 0:
            raise ParameterError("sigma_P", f"must be >= 0, got {self.sigma_P}")
        if self.sigma_P**2 + self.sigma_bar_P**2 <= 0:
            raise ParameterError("sigma_bar_P", "index volatility is degenerate")
        if self.gamma < 0:
            raise ParameterError("gamma", f"must be >= 0, got {self.gamma}")
        if self.lambda_units <= 0:
            raise ParameterError("lambda_units", f"must be > 0, got {self.lambda_units}")
        if self.T <= 0:
            raise ParameterError("T", f"must be > 0, got {self.T}")

    @property
    def n(self) -> int:
        return len(self.assets)

    @property
    def mu(self) -> np.ndarray:
        return np.array([a.mu for a in self.assets])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([a.sigma for a in self.assets])

    @property
    def sigma_bar(self) -> np.ndarray:
        return np.array([a.sigma_bar for a in self.assets])

    @property
    def total_vol(self) -> np.ndarray:
        return np.hypot(self.sigma, self.sigma_bar)

    def with_(self, **changes) -> "MarketParams":
        """Copy with top-level fields replaced."""
        return replace(self, **changes)

    def with_assets(self, **per_field: Sequence[float]) -> "MarketParams":
        """Copy with asset fields replaced, e.g. ``with_assets(mu=[0.1, 0.06])``."""
        assets = list(self.assets)
        for name, values in per_field.items():
            if len(values) != self.n:
                raise ParameterError(name, f"expected {self.n} values")
            assets = [replace(a, **{name: float(v)}) for a, v in zip(assets, values)]
        return replace(self, assets=tuple(assets))


@dataclass(frozen=True)
class DerivedParams:
    kappa_bar_P: float
    vartheta_bar_P: float
    theta_bar_P: float
    A: np.ndarray
    sigma: np.ndarray
    sigma_bar: np.ndarray
    rho_assets: np.ndarray
    rho_index: np.ndarray
    sharpe: np.ndarray
    sharpe_P: float
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def one_minus_kappa(self) -> float:
        return 1.0 - self.kappa_bar_P


def derive(params: MarketParams) -> DerivedParams:
    """Compute the index ratios, log-drifts ``A_i`` and the implied correlations."""
    var_P = params.sigma_P**2 + params.sigma_bar_P**2
    kappa = params.sigma_bar_P**2 / var_P
    vartheta = params.mu_P * params.sigma_bar_P / var_P
    theta = params.mu_P**2 / var_P

    sig, sig_bar = params.sigma, params.sigma_bar
    vol = np.hypot(sig, sig_bar)
    A = params.mu - 0.5 * vol**2 - vartheta * sig_bar

    rho = np.outer(sig_bar, sig_bar) / np.outer(vol, vol)
    np.fill_diagonal(rho, 1.0)
    rho_index = sig_bar * params.sigma_bar_P / (vol * math.sqrt(var_P))

    return DerivedParams(
        kappa_bar_P=kappa,
        vartheta_bar_P=vartheta,
        theta_bar_P=theta,
        A=A,
        sigma=sig,
        sigma_bar=sig_bar,
        rho_assets=rho,
        rho_index=rho_index,
        sharpe=params.mu / vol,
        sharpe_P=params.mu_P / math.sqrt(var_P),
    )


def capm_residual(params: MarketParams) -> np.ndarray:
    """``vartheta_bar_P - mu_i / sigma_bar_i``; zero iff the Sharpe ratios obey CAPM."""
    sig_bar = params.sigma_bar
    if np.any(sig_bar == 0):
        raise ParameterError("sigma_bar", "CAPM residual undefined for zero common loading")
    return derive(params).vartheta_bar_P - params.mu / sig_bar


def capm_adjusted(params: MarketParams) -> MarketParams:
    """Replace each ``mu_i`` by ``vartheta_bar_P * sigma_bar_i`` so CAPM holds exactly."""
    vt = derive(params).vartheta_bar_P
    return params.with_assets(mu=vt * params.sigma_bar)


def default_params(**overrides) -> MarketParams:
    """The two-asset counterparty-risk parameter set (option on S1, writer assets S2)."""
    base = MarketParams(
        mu_P=0.1,
        sigma_P=0.15,
        sigma_bar_P=0.2,
        assets=(
            AssetParams(mu=0.15, sigma=0.25, sigma_bar=0.3),
            AssetParams(mu=0.1, sigma=0.3, sigma_bar=0.2),
        ),
        gamma=1.0,
        lambda_units=1.0,
        T=1.0,
    )
    return replace(base, **overrides) if overrides else base
