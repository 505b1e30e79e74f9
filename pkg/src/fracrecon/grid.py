"""Uniform 1D grids, sampled functions, interpolation and discrete norms."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InputError


@dataclass(frozen=True)
class Grid1D:
    """Closed uniform grid ``a = x_0 < ... < x_{N-1} = b``."""

    a: float
    b: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a >= self.b:
            raise InputError("invalid-bounds", f"need a < b, got a={self.a}, b={self.b}")
        if int(self.N) != self.N or self.N < 2:
            raise InputError("invalid-count", f"need N >= 2, got N={self.N}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self):
        return (self.b - self.a) / (self.N - 1)

    @cached_property
    def nodes(self):
        x = self.a + self.h * np.arange(self.N)
        x[-1] = self.b
        x.flags.writeable = False
        return x

    def node(self, i):
        return float(self.nodes[i])

    @property
    def length(self):
        return self.b - self.a

    def is_symmetric(self, tol=1e-12):
        return abs(self.a + self.b) <= tol * self.length

    def contains(self, x, tol=1e-12):
        slack = tol * self.length
        return (self.a - slack <= x) & (x <= self.b + slack)

    def refine_like(self, a, b):
        """Grid on ``[a, b]`` whose spacing is as close as possible to this one."""
        n = max(2, int(round((b - a) / self.h)) + 1)
        return Grid1D(a, b, n)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values sampled on the nodes of a :class:`Grid1D`."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise InputError("shape-mismatch", f"expected {self.grid.N} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("non-finite-value", "grid function values must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self):
        return self.grid.nodes

    @cached_property
    def _spline(self):
        if self.grid.N < 4:
            return None
        return CubicSpline(self.grid.nodes, self.values, bc_type="not-a-knot", extrapolate=False)

    def __call__(self, x):
        return interpolate(self, x)

    def _other(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return other.values
        return float(other)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__


def _check_same_grid(u, v):
    if u.grid != v.grid:
        raise InputError("grid-mismatch", f"{u.grid} vs {v.grid}")


def make_grid(a, b, N):
    return Grid1D(a, b, N)


def sample(f, g):
    """Evaluate ``f`` at every node of ``g``.

    ``f`` is called once with the full node array, so it should be vectorised.
    """
    with np.errstate(all="ignore"):
        values = np.asarray(f(g.nodes), dtype=float)
    if values.ndim == 0:
        values = np.full(g.N, float(values))
    if not np.all(np.isfinite(values)):
        bad = g.nodes[~np.isfinite(values)]
        raise InputError("non-finite-value", f"f is not finite at x={bad[:5]}")
    return GridFunction(g, values)


def interpolate(u, x):
    """Cubic spline value of ``u`` at ``x`` (scalar or array); exact at nodes.

    Grids with fewer than four nodes fall back to linear interpolation.
    """
    xa = np.asarray(x, dtype=float)
    grid = u.grid
    if not np.all(grid.contains(xa)):
        raise InputError("out-of-range", f"x outside [{grid.a}, {grid.b}]")
    xc = np.clip(xa, grid.a, grid.b)
    if u._spline is None:
        out = np.interp(xc, grid.nodes, u.values)
    else:
        out = u._spline(xc)
        # snap exact node hits so interpolation is exact at nodes
        idx = np.rint((xc - grid.a) / grid.h).astype(np.int64)
        idx = np.clip(idx, 0, grid.N - 1)
        hit = np.abs(grid.nodes[idx] - xc) <= 1e-13 * grid.length
        out = np.where(hit, u.values[idx], out)
    return float(out) if np.ndim(out) == 0 else out


def trapezoid_weights(g):
    w = np.full(g.N, g.h)
    w[0] = w[-1] = 0.5 * g.h
    return w


def trapezoid_integral(u):
    return float(trapezoid_weights(u.grid) @ u.values)


def l2_norm(u):
    return float(np.sqrt(trapezoid_weights(u.grid) @ (u.values ** 2)))


def relative_l2_error(u, v):
    """``||u - v|| / ||v||`` in the trapezoid-weighted discrete L2 norm."""
    _check_same_grid(u, v)
    ref = l2_norm(v)
    if ref == 0.0:
        raise InputError("zero-reference", "reference function has zero norm")
    return l2_norm(u - v) / ref


def weighted_l2(values, weights):
    return float(np.sqrt(np.sum(weights * np.asarray(values) ** 2)))


def restrict(u, lo, hi, *, open_interval=False):
    """Sub-grid function holding the nodes of ``u`` inside ``[lo, hi]``.

    With ``open_interval`` the endpoints themselves are excluded.
    """
    x = u.grid.nodes
    tol = 1e-12 * u.grid.length
    if open_interval:
        keep = (x > lo + tol) & (x < hi - tol)
    else:
        keep = (x >= lo - tol) & (x <= hi + tol)
    idx = np.flatnonzero(keep)
    if idx.size < 2:
        raise InputError("grid-mismatch", f"fewer than two nodes in [{lo}, {hi}]")
    sub = Grid1D(x[idx[0]], x[idx[-1]], idx.size)
    return GridFunction(sub, u.values[idx])
