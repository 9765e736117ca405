"""Terminal payoffs g(s_1, ..., s_n) on the positive orthant.

A :class:`Payoff` evaluates on arrays whose last axis holds the n spot
coordinates.  Besides the map itself it carries an upper bound (the engine
needs bounded payoffs) and the spot levels where the payoff has kinks or
jumps, which the quadrature benchmarks use to split their integration ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .market import ParameterError


@dataclass(frozen=True)
class Payoff:
    func: Callable[[np.ndarray], np.ndarray]
    n: int
    bound: float
    name: str = "payoff"
    breakpoints: tuple[tuple[float, ...], ...] = ()
    # (axis, level) of a jump discontinuity, if any
    jump: tuple[int, float] | None = None
    info: dict = field(default_factory=dict, compare=False)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.n:
            raise ValueError(f"{self.name} expects {self.n} coordinates, got shape {s.shape}")
        return self.func(s)

    def breaks(self, axis: int) -> tuple[float, ...]:
        if not self.breakpoints:
            return ()
        return self.breakpoints[axis]


@dataclass(frozen=True)
class VulnerablePayoffParams:
    K: float = 150.0
    L: float = 1000.0
    alpha: float = 0.05
    epsilon: float = 0.0

    def __post_init__(self):
        if self.K <= 0:
            raise ParameterError("K", "strike must be positive")
        if self.L <= 0:
            raise ParameterError("L", "default threshold must be positive")
        if not 0 <= self.alpha <= 1:
            raise ParameterError("alpha", "deadweight loss must lie in [0, 1]")
        if not 0 <= self.epsilon < self.L:
            raise ParameterError("epsilon", "need 0 <= epsilon < L")


def constant(k: float, n: int = 2) -> Payoff:
    if k < 0:
        raise ParameterError("k", "payoff must be nonnegative")
    return Payoff(
        lambda s: np.full(s.shape[:-1], float(k)),
        n=n,
        bound=float(k),
        name="constant",
        breakpoints=((),) * n,
    )


def put(K: float, n: int = 1, axis: int = 0) -> Payoff:
    """European put ``(K - s_axis)^+`` viewed as a function of all n spots."""
    if K <= 0:
        raise ParameterError("K", "strike must be positive")
    bps = tuple((K,) if i == axis else () for i in range(n))
    return Payoff(
        lambda s: np.maximum(K - s[..., axis], 0.0),
        n=n,
        bound=float(K),
        name="put",
        breakpoints=bps,
    )


def capped_call(K: float, cap: float, n: int = 1, axis: int = 0) -> Payoff:
    """Call ``min((s - K)^+, cap)``.

    An uncapped call is unbounded and falls outside the engine's
    assumptions, so a cap is mandatory.
    """
    if K <= 0 or cap <= 0:
        raise ParameterError("cap", "strike and cap must be positive")
    bps = tuple((K, K + cap) if i == axis else () for i in range(n))
    return Payoff(
        lambda s: np.clip(s[..., axis] - K, 0.0, cap),
        n=n,
        bound=float(cap),
        name="capped_call",
        breakpoints=bps,
    )


def basket_put(K: float, weights) -> Payoff:
    w = np.asarray(weights, dtype=float)
    if K <= 0:
        raise ParameterError("K", "strike must be positive")
    if np.any(w < 0):
        raise ParameterError("weights", "basket weights must be nonnegative")
    return Payoff(
        lambda s: np.maximum(K - s @ w, 0.0),
        n=len(w),
        bound=float(K),
        name="basket_put",
        breakpoints=((),) * len(w),
    )


def spread_put(K: float) -> Payoff:
    """``(K - s1 - s2)^+``, the two-asset basket with unit weights."""
    p = basket_put(K, [1.0, 1.0])
    return Payoff(p.func, n=2, bound=p.bound, name="spread_put", breakpoints=p.breakpoints)


def _vulnerable_raw(K, L, alpha):
    def g(s):
        h = np.maximum(K - s[..., 0], 0.0)
        s2 = s[..., 1]
        return np.where(s2 >= L, h, (1.0 - alpha) * h * s2 / L)

    return g


def vulnerable_put(params: VulnerablePayoffParams) -> Payoff:
    """Put on S1 written by a counterparty whose assets S2 may fall below L.

    Solvent (``s2 >= L``): the full put payoff.  In default the holder
    recovers the share ``h/L`` of the writer's assets, less the proportional
    deadweight loss ``alpha``.  With ``params.epsilon > 0`` the jump at
    ``s2 = L`` is smoothed, see :func:`smooth`.
    """
    K, L, alpha = params.K, params.L, params.alpha
    raw = Payoff(
        _vulnerable_raw(K, L, alpha),
        n=2,
        bound=float(K),
        name="vulnerable_put",
        breakpoints=((K,), (L,)),
        jump=(1, float(L)),
        info={"params": params},
    )
    if params.epsilon > 0:
        return smooth(raw, params.epsilon)
    return raw


def smooth(g: Payoff, epsilon: float) -> Payoff:
    """Lipschitz version of a payoff with one jump across ``s_axis = L``.

    Outside ``[L - eps, L + eps]`` the payoff is unchanged; inside, it is
    replaced by the linear interpolant (in ``s_axis``) between the values at
    the band edges.  Monotonicity in every coordinate and the bound carry
    over.
    """
    if g.jump is None:
        raise ParameterError("payoff", f"{g.name} has no jump to smooth")
    axis, L = g.jump
    if not 0 < epsilon < L:
        raise ParameterError("epsilon", f"need 0 < epsilon < L={L}, got {epsilon}")
    lo, hi = L - epsilon, L + epsilon

    def g_eps(s):
        v = g.func(s)
        x = s[..., axis]
        inside = (x > lo) & (x < hi)
        if not np.any(inside):
            return v
        # only the band points need the edge values
        s_in = s[inside]
        s_lo = s_in.copy()
        s_hi = s_in.copy()
        s_lo[..., axis] = lo
        s_hi[..., axis] = hi
        w = (x[inside] - lo) / (hi - lo)
        v = np.array(v, dtype=float, copy=True)
        v[inside] = (1.0 - w) * g.func(s_lo) + w * g.func(s_hi)
        return v

    bps = list(g.breakpoints) if g.breakpoints else [()] * g.n
    bps[axis] = tuple(sorted(set(b for b in bps[axis] if b != L) | {lo, hi}))
    info = dict(g.info, epsilon=epsilon)
    return Payoff(
        g_eps,
        n=g.n,
        bound=g.bound,
        name=g.name,
        breakpoints=tuple(bps),
        jump=None,
        info=info,
    )


def make_payoff(name: str, **kw) -> Payoff:
    """Build a payoff from its config name and parameters."""
    if name == "vulnerable_put":
        fields = {k: float(kw[k]) for k in ("K", "L", "alpha", "epsilon") if k in kw}
        return vulnerable_put(VulnerablePayoffParams(**fields))
    if name == "put":
        return put(float(kw.get("K", 150.0)), n=int(kw.get("n", 2)), axis=int(kw.get("axis", 0)))
    if name == "basket_put":
        return basket_put(float(kw.get("K", 150.0)), kw.get("weights", [1.0, 1.0]))
    if name == "spread_put":
        return spread_put(float(kw.get("K", 150.0)))
    if name == "capped_call":
        return capped_call(
            float(kw["K"]), float(kw["cap"]), n=int(kw.get("n", 2)), axis=int(kw.get("axis", 0))
        )
    if name == "constant":
        return constant(float(kw["k"]), n=int(kw.get("n", 2)))
    raise ParameterError("name", f"unknown payoff {name!r}")
