"""Benchmark prices with closed-form structure, plus the BSDE driver.

Terminal log-prices are jointly Gaussian with one common factor:
``ln S_i(T) = ln s_i + m_i T + sigma_i sqrt(T) Z_i + sigma_bar_i sqrt(T) Z_c``.
Given ``Z_c`` the coordinates are independent, so expectations are computed
as an outer rule over ``Z_c`` and a tensor rule over the idiosyncratic
shocks.  Each one-dimensional rule is composite Gauss-Legendre against the
normal density on unit panels, with extra panel edges wherever the payoff has
a kink or jump; that keeps the rules accurate for the discontinuous
counterparty payoff and for the sharply tilted integrands that exponential
utility produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .market import MarketParams, ParameterError, derive
from .payoff import Payoff


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre order ``nodes`` on each unit panel of z, normals
    truncated at +-``width`` standard deviations."""

    nodes: int = 12
    width: float = 10.0

    def __post_init__(self):
        if self.nodes < 2:
            raise ParameterError("nodes", "need at least two nodes")
        if self.width <= 0:
            raise ParameterError("width", "must be positive")

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.nodes, self.width)


def _panel_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and normal-density weights on panels.

    ``edges`` has shape (..., P+1), sorted along the last axis.  Returns
    nodes and log-weights of shape (..., P*order); empty panels get
    zero weight.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[..., :-1, None], edges[..., 1:, None]
    half = 0.5 * (b - a)
    z = (a + b) * 0.5 + half * x
    with np.errstate(divide="ignore"):
        logw = np.log(half * w) - 0.5 * z**2 - 0.5 * math.log(2 * math.pi)
    shape = edges.shape[:-1] + (-1,)
    return z.reshape(shape), logw.reshape(shape)


def _edges(width: float, breaks: np.ndarray) -> np.ndarray:
    """Unit panel edges on [-width, width] merged with (clipped) breaks.

    ``breaks`` has shape (..., k); the result (..., P+1) is sorted.
    """
    base = np.arange(-width, width + 0.5, 1.0)
    base = base[base <= width]
    if base[-1] < width:
        base = np.append(base, width)
    lead = breaks.shape[:-1]
    full = np.concatenate(
        [np.broadcast_to(base, lead + base.shape), np.clip(breaks, -width, width)], axis=-1
    )
    return np.sort(full, axis=-1)


def factor_rule(payoff: Payoff, params: MarketParams, spot, log_drift, quad: QuadratureSpec,
                chunk: int = 8):
    """Yield ``(S, logw)`` blocks of the conditional tensor rule.

    ``S`` has shape (M, n) and ``logw`` shape (M,); blocks are taken over
    consecutive common-factor nodes so memory stays bounded.
    """
    n = params.n
    T = params.T
    sq = math.sqrt(T)
    sig, sig_bar = params.sigma, params.sigma_bar
    mean = np.log(np.asarray(spot, dtype=float)) + np.asarray(log_drift, dtype=float) * T

    # common factor: breaks come from coordinates without idiosyncratic noise
    c_breaks = []
    for i in range(n):
        if sig[i] == 0.0:
            for b in payoff.breaks(i):
                c_breaks.append((math.log(b) - mean[i]) / (sig_bar[i] * sq))
    zc_all, lwc_all = _panel_rule(_edges(quad.width, np.asarray(c_breaks, dtype=float)), quad.nodes)

    for start in range(0, zc_all.size, chunk):
        zc = zc_all[start:start + chunk]
        lwc = lwc_all[start:start + chunk]
        coords, logws = [], []
        for i in range(n):
            base = mean[i] + sig_bar[i] * sq * zc
            if sig[i] == 0.0:
                coords.append(base[:, None])
                logws.append(np.zeros((zc.size, 1)))
                continue
            bps = np.array([math.log(b) for b in payoff.breaks(i) if b > 0], dtype=float)
            breaks = (bps[None, :] - base[:, None]) / (sig[i] * sq)
            zi, lwi = _panel_rule(_edges(quad.width, breaks), quad.nodes)
            coords.append(base[:, None] + sig[i] * sq * zi)
            logws.append(lwi)

        grids = np.meshgrid(*[np.arange(c.shape[1]) for c in coords], indexing="ij")
        flat = [g.ravel() for g in grids]
        logS = np.stack([coords[i][:, flat[i]] for i in range(n)], axis=-1)
        lw = lwc[:, None] + sum(logws[i][:, flat[i]] for i in range(n))
        yield np.exp(logS.reshape(-1, n)), lw.reshape(-1)


def expectation(payoff: Payoff, params: MarketParams, spot, log_drift, quad: QuadratureSpec) -> float:
    total = 0.0
    for S, lw in factor_rule(payoff, params, spot, log_drift, quad):
        total += float(np.sum(np.exp(lw) * payoff(S)))
    return total


def physical_log_drift(params: MarketParams) -> np.ndarray:
    return params.mu - 0.5 * params.total_vol**2


def no_hedge_price(payoff: Payoff, params: MarketParams, spot,
                   quad: QuadratureSpec = QuadratureSpec(), gamma: float | None = None) -> float:
    """Certainty equivalent ``-(1/gamma) log E[exp(-gamma g(S_T))]`` under P.

    This is the unit indifference price when the index is independent of the
    assets, so hedging is useless.  ``gamma`` defaults to ``params.gamma``;
    the price is per unit and ``lambda_units`` scales the payoff.
    """
    gamma = params.gamma if gamma is None else gamma
    lam = params.lambda_units
    if gamma == 0.0:
        return lam * expectation(payoff, params, spot, physical_log_drift(params), quad)
    # log E[exp(-gamma g)] accumulated blockwise
    parts = [
        logsumexp(lw - gamma * lam * payoff(S))
        for S, lw in factor_rule(payoff, params, spot, physical_log_drift(params), quad)
    ]
    return -float(logsumexp(parts)) / gamma


def complete_market_price(payoff: Payoff, params: MarketParams, spot,
                          quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Zero-rate risk-neutral price, as if every asset were traded."""
    drift = -0.5 * params.total_vol**2
    return params.lambda_units * expectation(payoff, params, spot, drift, quad)


def black_scholes_put(s: float, K: float, vol: float, T: float) -> float:
    """Zero-rate Black-Scholes put."""
    sd = vol * math.sqrt(T)
    d1 = (math.log(s / K) + 0.5 * sd**2) / sd
    d2 = d1 - sd
    return K * ndtr(-d2) - s * ndtr(-d1)


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    paths: int


def simulate_terminal(params: MarketParams, spot, log_drift, paths: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = params.n
    sq = math.sqrt(params.T)
    Z = rng.standard_normal((paths, n))
    Zc = rng.standard_normal((paths, 1))
    logS = (
        np.log(np.asarray(spot, dtype=float))
        + np.asarray(log_drift) * params.T
        + params.sigma * sq * Z
        + params.sigma_bar * sq * Zc
    )
    return np.exp(logS)


def mc_complete_market_price(payoff: Payoff, params: MarketParams, spot,
                             paths: int = 1_000_000, seed: int = 0) -> MCEstimate:
    S = simulate_terminal(params, spot, -0.5 * params.total_vol**2, paths, seed)
    g = params.lambda_units * payoff(S)
    return MCEstimate(float(g.mean()), float(g.std(ddof=1) / math.sqrt(paths)), paths)


def mc_no_hedge_price(payoff: Payoff, params: MarketParams, spot,
                      paths: int = 1_000_000, seed: int = 0) -> MCEstimate:
    """Crude Monte Carlo certainty equivalent; stderr by the delta method."""
    gamma = params.gamma
    S = simulate_terminal(params, spot, physical_log_drift(params), paths, seed)
    g = params.lambda_units * payoff(S)
    if gamma == 0.0:
        return MCEstimate(float(g.mean()), float(g.std(ddof=1) / math.sqrt(paths)), paths)
    m = g.min()
    e = np.exp(-gamma * (g - m))
    mean = e.mean()
    value = m - math.log(mean) / gamma
    se = e.std(ddof=1) / math.sqrt(paths) / (gamma * mean)
    return MCEstimate(float(value), float(se), paths)


def bsde_driver(z, params: MarketParams) -> np.ndarray:
    """Driver of the quadratic BSDE for the price, with the index volatility
    embedded as ``(0, ..., 0, sigma_bar_P, sigma_P)`` in the n+2 Brownian
    coordinates.  ``z`` may carry leading batch axes."""
    gamma = params.gamma
    if gamma == 0.0:
        raise ParameterError("gamma", "driver is singular at gamma = 0")
    z = np.asarray(z, dtype=float)
    d = params.n + 2
    if z.shape[-1] != d:
        raise ValueError(f"z must have {d} components")
    sig_P = np.zeros(d)
    sig_P[-2], sig_P[-1] = params.sigma_bar_P, params.sigma_P
    nP2 = float(sig_P @ sig_P)
    zz = np.sum(z * z, axis=-1)
    cross = z @ sig_P - params.mu_P / gamma
    return -0.5 * gamma * zz + gamma / (2 * nP2) * cross**2 - params.mu_P**2 / (2 * gamma * nP2)


def z_from_gradient(grad, params: MarketParams) -> np.ndarray:
    """Martingale integrand of a price with log-gradient ``grad``.

    ``z_i = sigma_i u_i``, then the common-factor entry ``u_eta`` and a zero
    for the index's own noise.
    """
    grad = np.asarray(grad, dtype=float)
    u_eta = grad @ params.sigma_bar
    zeros = np.zeros(grad.shape[:-1] + (1,))
    return np.concatenate([params.sigma * grad, u_eta[..., None], zeros], axis=-1)


def reduced_driver(grad, params: MarketParams) -> np.ndarray:
    """The driver written through the gradient, as it appears in the log PDE."""
    d = derive(params)
    grad = np.asarray(grad, dtype=float)
    u_eta = grad @ params.sigma_bar
    return (
        -d.vartheta_bar_P * u_eta
        - 0.5 * params.gamma * np.sum(params.sigma**2 * grad**2, axis=-1)
        - 0.5 * params.gamma * d.one_minus_kappa * u_eta**2
    )
