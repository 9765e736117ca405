"""Uniform grids in log-price coordinates and the Gaussian smoothing kernels.

Every kernel is a positive-weight Gauss-Hermite average of multilinear
interpolants, so it maps constants to themselves and preserves nodewise
order.  Each kernel also has a
certainty-equivalent form ``-(1/c) log E[exp(-c F(x + shift))]`` (the
Cole-Hopf solution of a heat equation with a quadratic gradient term),
evaluated after a shift by the minimum so no exponent can overflow.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

DEFAULT_NODES = 32


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 3:
            raise ValueError(f"axis needs at least 3 nodes, got {self.count}")
        if not self.hi > self.lo:
            raise ValueError(f"empty axis [{self.lo}, {self.hi}]")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class LogGrid:
    axes: tuple[Axis, ...]

    @classmethod
    def around(cls, center, half_width, count) -> "LogGrid":
        """Grid centred at log-coordinates ``center``; scalars broadcast over axes."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        hw = np.broadcast_to(np.asarray(half_width, dtype=float), center.shape)
        counts = np.broadcast_to(np.asarray(count, dtype=int), center.shape)
        return cls(tuple(Axis(c - w, c + w, int(m)) for c, w, m in zip(center, hw, counts)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a.h for a in self.axes])

    def coords(self) -> list[np.ndarray]:
        return [a.nodes for a in self.axes]

    def mesh(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (ndim,)``."""
        return np.stack(np.meshgrid(*self.coords(), indexing="ij"), axis=-1)

    def spots(self) -> np.ndarray:
        return np.exp(self.mesh())

    def interior_mask(self, margin: int) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[tuple(slice(margin, m - margin) for m in self.shape)] = True
        return mask

    def sample(self, func) -> "ScalarField":
        """Evaluate ``func`` (taking spot prices, last axis = coordinate) on the nodes."""
        return ScalarField(self, np.asarray(func(self.spots()), dtype=float))


@dataclass(frozen=True)
class ScalarField:
    grid: LogGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def at(self, x) -> np.ndarray:
        return interpolate(self, x)

    def at_spot(self, s) -> np.ndarray:
        return interpolate(self, np.log(np.asarray(s, dtype=float)))

    def to_csv(self, path, value_name: str = "value") -> None:
        write_fields_csv(path, [self], [value_name])


def write_fields_csv(path, fields: Sequence[ScalarField], names: Sequence[str]) -> None:
    """Write node spots plus one column per field (all on the same grid)."""
    grid = fields[0].grid
    s = grid.spots().reshape(-1, grid.ndim)
    cols = [f.values.ravel() for f in fields]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"s{i + 1}" for i in range(grid.ndim)] + list(names))
        for k in range(s.shape[0]):
            w.writerow([f"{v:.17e}" for v in s[k]] + [f"{c[k]:.17e}" for c in cols])


@lru_cache(maxsize=None)
def gauss_hermite(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[f(Z)], Z standard normal."""
    z, w = hermegauss(m)
    return z, w / np.sqrt(2.0 * np.pi)


def _cell(axis: Axis, p: np.ndarray, clamp: bool = False) -> tuple[np.ndarray, np.ndarray]:
    # t outside [0, 1] in the first/last cell gives linear extrapolation;
    # clamping holds the boundary value instead
    u = (p - axis.lo) / axis.h
    i = np.clip(np.floor(u), 0, axis.count - 2).astype(np.intp)
    t = u - i
    if clamp:
        t = np.clip(t, 0.0, 1.0)
    return i, t


def interpolate(field: ScalarField, x) -> np.ndarray:
    """Multilinear interpolation at log-points ``x`` (last axis = coordinate).

    Outside the grid the boundary cell is extended linearly.
    """
    x = np.asarray(x, dtype=float)
    grid = field.grid
    if grid.ndim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    out = np.zeros(x.shape[:-1])
    cells = [_cell(ax, x[..., a]) for a, ax in enumerate(grid.axes)]
    for corner in itertools.product((0, 1), repeat=grid.ndim):
        idx = tuple(cells[a][0] + c for a, c in enumerate(corner))
        w = np.ones(x.shape[:-1])
        for a, c in enumerate(corner):
            t = cells[a][1]
            w = w * (t if c else 1.0 - t)
        out += w * field.values[idx]
    return out


def _interp_axis(values: np.ndarray, axis: Axis, a: int, shift, clamp: bool = True) -> np.ndarray:
    """Values of the axis-``a`` linear interpolant at node + shift.

    ``shift`` is a scalar or an array of the grid shape (node-dependent).
    """
    if np.ndim(shift) == 0:
        i, t = _cell(axis, axis.nodes + shift, clamp)
        shape = [1] * values.ndim
        shape[a] = -1
        t = t.reshape(shape)
        return (1.0 - t) * np.take(values, i, axis=a) + t * np.take(values, i + 1, axis=a)
    shape = [1] * values.ndim
    shape[a] = -1
    i, t = _cell(axis, axis.nodes.reshape(shape) + shift, clamp)
    lo = np.take_along_axis(values, i, axis=a)
    hi = np.take_along_axis(values, i + 1, axis=a)
    return (1.0 - t) * lo + t * hi


def _shifted(values: np.ndarray, grid: LogGrid, shifts, clamp: bool = True) -> np.ndarray:
    """Multilinear interpolant at node + constant shift vector.

    The tensor-product weights factorise, so this is one 1-d pass per axis.
    """
    for a, (ax, d) in enumerate(zip(grid.axes, shifts)):
        if d != 0.0:
            values = _interp_axis(values, ax, a, float(d), clamp)
    return values


def _clamp_flag(extrapolation: str) -> bool:
    if extrapolation not in ("flat", "linear"):
        raise ValueError(f"unknown extrapolation {extrapolation!r}")
    return extrapolation == "flat"


def _certainty_equivalent(vals: np.ndarray, weights: np.ndarray, c: float) -> np.ndarray:
    """``-(1/c) log sum_k w_k exp(-c v_k)`` over the leading axis.

    Shifting by the nodewise minimum keeps every exponent <= 0, so nothing
    overflows and the sum is at least the smallest weight.
    """
    m = vals.min(axis=0)
    s = np.tensordot(weights, np.exp(-c * (vals - m)), axes=1)
    return m - np.log(s) / c


def directional_convolve(
    field: ScalarField, v, t: float, nodes: int = DEFAULT_NODES, c: float = 0.0,
    extrapolation: str = "flat",
) -> ScalarField:
    """Gaussian average of the field along direction ``v``.

    With ``c == 0`` returns ``E[F(x + v Z)]``, ``Z ~ N(0, t)`` scalar: the
    heat semigroup along ``v``.  With ``c > 0`` returns the certainty
    equivalent ``-(1/c) log E[exp(-c F(x + v Z))]``; the field is
    interpolated before exponentiation.  See :func:`drifted_convolve` for
    ``extrapolation``.
    """
    if t <= 0:
        raise ValueError(f"variance scale must be positive, got {t}")
    clamp = _clamp_flag(extrapolation)
    v = np.broadcast_to(np.asarray(v, dtype=float), (field.grid.ndim,))
    z, wq = gauss_hermite(nodes)
    sd = np.sqrt(t)
    samples = np.empty((len(z),) + field.grid.shape)
    for k, zk in enumerate(z):
        samples[k] = _shifted(field.values, field.grid, v * sd * zk, clamp)
    if c == 0.0:
        out = np.tensordot(wq, samples, axes=1)
    else:
        out = _certainty_equivalent(samples, wq, c)
    return field.with_values(out)


def drifted_convolve(
    field: ScalarField,
    A,
    sig,
    t: float,
    nodes: int = DEFAULT_NODES,
    c: float = 0.0,
    extrapolation: str = "flat",
) -> ScalarField:
    """Average over ``x + A t + diag(sig) sqrt(t) Z``, Z standard n-normal.

    The tensor Gauss-Hermite rule factorises over axes (for the certainty
    equivalent ``c > 0`` too, the coordinates being independent), so the
    kernel runs one axis at a time.  Axes with ``sig_i = 0`` are pure
    shifts.  ``A`` may also be a sequence of per-axis drift arrays of the
    grid shape; each node then moves with its own drift.

    Sample points beyond the grid take the boundary value
    (``extrapolation="flat"``), which keeps every weight nonnegative and
    the kernel exactly order preserving.  ``"linear"`` extends the boundary
    cell instead; that is exact for affine fields but its negative weights
    can reverse the order of two fields near the edge.
    """
    if t <= 0:
        raise ValueError(f"time step must be positive, got {t}")
    clamp = _clamp_flag(extrapolation)
    ndim = field.grid.ndim
    if isinstance(A, (list, tuple)) and len(A) == ndim and np.ndim(A[0]) > 0:
        drifts = [np.asarray(b, dtype=float) for b in A]
    else:
        drifts = list(np.broadcast_to(np.asarray(A, dtype=float), (ndim,)))
    sig = np.broadcast_to(np.asarray(sig, dtype=float), (ndim,))
    z, wq = gauss_hermite(nodes)
    vals = field.values
    for a, ax in enumerate(field.grid.axes):
        shift = drifts[a] * t
        if sig[a] == 0.0:
            vals = _interp_axis(vals, ax, a, shift, clamp)
            continue
        sd = sig[a] * np.sqrt(t)
        samples = np.stack([_interp_axis(vals, ax, a, shift + sd * zk, clamp) for zk in z])
        if c == 0.0:
            vals = np.tensordot(wq, samples, axes=1)
        else:
            vals = _certainty_equivalent(samples, wq, c)
    return field.with_values(vals)


def gradient(field: ScalarField) -> list[ScalarField]:
    """Second-order finite differences; one-sided second order at the edges."""
    h = field.grid.spacing
    if field.grid.ndim == 1:
        return [field.with_values(np.gradient(field.values, h[0], edge_order=2))]
    grads = np.gradient(field.values, *h, edge_order=2)
    return [field.with_values(g) for g in grads]


def second_derivative(field: ScalarField, axis: int) -> np.ndarray:
    """Three-point second difference along ``axis``; NaN on the two edge layers."""
    h = field.grid.spacing[axis]
    v = np.moveaxis(field.values, axis, 0)
    out = np.full(v.shape, np.nan)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    return np.moveaxis(out, 0, axis)
