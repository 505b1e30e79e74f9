"""Sphere inversion and the strong Kelvin transform on 1D grid functions."""
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .extension import build_extension, compute_h
from .fraclap import FracOrder, apply_spectral, assemble_fd_matrix
from .grid import Grid1D, GridFunction, interpolate, restrict, sample, trapezoid_weights


def sphere_invert(x):
    """``x / |x|^2`` for a scalar or a point given as a 1D array."""
    xa = np.asarray(x, dtype=float)
    r2 = float(np.dot(xa.ravel(), xa.ravel()))
    if r2 == 0.0:
        raise InputError("origin-undefined", "sphere inversion is undefined at the origin")
    out = xa / r2
    return float(out) if out.ndim == 0 else out


def chordal_distance(x, y):
    """``|x* - y*|`` for the inverted points, computed as ``|x - y| / (|x| |y|)``."""
    xa, ya = np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(y, dtype=float))
    nx, ny = np.linalg.norm(xa), np.linalg.norm(ya)
    if nx == 0.0 or ny == 0.0:
        raise InputError("origin-undefined", "sphere inversion is undefined at the origin")
    return float(np.linalg.norm(xa - ya) / (nx * ny))


@dataclass(frozen=True, eq=False)
class MaskedGridFunction:
    """Grid values with an explicit known/unknown mask; unknown values are NaN."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)
    known: np.ndarray = field(repr=False)

    def __post_init__(self):
        known = np.asarray(self.known, dtype=bool)
        vals = np.where(known, np.asarray(self.values, dtype=float), np.nan)
        object.__setattr__(self, "known", known)
        object.__setattr__(self, "values", vals)

    def filled(self, fill=0.0):
        return GridFunction(self.grid, np.where(self.known, self.values, fill))

    @property
    def n_masked(self):
        return int(np.count_nonzero(~self.known))


@dataclass(frozen=True)
class KelvinMap:
    order: FracOrder
    source_grid: Grid1D
    target_grid: Grid1D
    exclusion_radius: float = None

    def __post_init__(self):
        B = min(abs(self.source_grid.a), abs(self.source_grid.b))
        if self.source_grid.a >= 0 or self.source_grid.b <= 0:
            raise InputError("invalid-bounds", "source window must contain the origin")
        if self.exclusion_radius is None:
            object.__setattr__(self, "exclusion_radius", 1.0 / B)
        elif self.exclusion_radius < 1.0 / B * (1 - 1e-12):
            raise InputError("invalid-exclusion",
                             f"exclusion radius {self.exclusion_radius} < 1/B = {1.0 / B}")

    @property
    def known(self):
        x = self.target_grid.nodes
        return np.abs(x) >= self.exclusion_radius * (1 - 1e-12)

    @property
    def weight_power(self):
        return self.order.alpha - self.order.n


def kelvin_transform(f, m):
    """``|x|^{alpha - n} f(x / |x|^2)`` on the unmasked target nodes."""
    if f.grid != m.source_grid:
        raise InputError("grid-mismatch", "f must live on the map's source grid")
    x = m.target_grid.nodes
    known = m.known & (x != 0.0)
    vals = np.full(x.shape, np.nan)
    xk = x[known]
    y = 1.0 / xk
    if not np.all(f.grid.contains(y)):
        raise InputError("inversion-out-of-range",
                         "an unmasked target node inverts outside the source grid")
    vals[known] = np.abs(xk) ** m.weight_power * interpolate(f, y)
    return MaskedGridFunction(m.target_grid, vals, known)


def kelvin_identity_residual(u, order, source, target, *, width=0.5, method="fd",
                             return_fields=False):
    """Compare both sides of ``(-D)^s K[h] = |x|^{-2 alpha} K[(-D)^s h]``.

    ``h = u - g`` where ``g`` extends ``u|_(-1,1)``; ``h`` is taken as zero outside
    the source window, so ``K[h]`` is zero on the masked band ``|x| < 1/B``.
    The left side uses the finite-difference matrix on ``target`` (or the
    spectral operator with ``method="spectral"``); the right side uses the
    finite-difference matrix on ``source``.

    Returns ``(relative L2, absolute Linf)`` over the unmasked target nodes.
    """
    u_s = u if isinstance(u, GridFunction) else sample(u, source)
    g = build_extension(restrict(u_s, -1.0, 1.0, open_interval=True), source, width=width)
    h = compute_h(u_s, g)

    lap_h = GridFunction(source, assemble_fd_matrix(source, order) @ h.values)
    kmap = KelvinMap(order, source, target)
    Kh = kelvin_transform(h, kmap)
    K_lap = kelvin_transform(lap_h, kmap)

    Kh0 = Kh.filled(0.0)
    if method == "fd":
        lhs = assemble_fd_matrix(target, order) @ Kh0.values
    elif method == "spectral":
        lhs = apply_spectral(Kh0, order).values
    else:
        raise InputError("invalid-method", f"unknown method {method!r}")

    known = Kh.known
    xk = target.nodes[known]
    rhs = np.abs(xk) ** (-2.0 * order.alpha) * K_lap.values[known]
    diff = lhs[known] - rhs
    w = trapezoid_weights(target)[known]
    rel = float(np.sqrt(np.sum(w * diff ** 2) / np.sum(w * rhs ** 2)))
    linf = float(np.max(np.abs(diff)))
    if return_fields:
        return rel, linf, {"x": xk, "lhs": lhs[known], "rhs": rhs}
    return rel, linf
