"""Poisson kernel and Green function of the fractional Laplacian on a ball,
the evaluators ``u_g`` / ``u_h`` built on them, and the discrete Fredholm
operator mapping exterior values to interior values of the s-harmonic lift.

Everything here is written for a 1D ball ``(-r, r)``. The exterior is
described by a *radial* grid on ``[r, R_out]``; its nodes are used on both
sides of the ball, giving the ordering ``-y_{M-1}, ..., -y_0, y_0, ..., y_{M-1}``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma as Gamma, roots_jacobi, roots_legendre

from ._accel import njit, use_numba
from .errors import InputError
from .fraclap import DenseOperator, FracOrder
from .grid import Grid1D, interpolate, trapezoid_weights


@dataclass(frozen=True)
class BallSpec:
    r: float
    order: FracOrder

    def __post_init__(self):
        if not self.r > 0:
            raise InputError("invalid-radius", f"ball radius must be positive, got {self.r}")

    @property
    def s(self):
        return self.order.s

    @property
    def n(self):
        return self.order.n

    @property
    def log_branch(self):
        return self.order.n == 2 * self.order.s


def poisson_constant(order):
    """``c_{n,s} = Gamma(n/2) sin(pi s) / pi^{n/2 + 1}``."""
    n, s = order.n, order.s
    return Gamma(n / 2.0) * np.sin(np.pi * s) / np.pi ** (n / 2.0 + 1.0)


def green_constant(order):
    """``kappa(n,s) = Gamma(n/2) / (4^s pi^{n/2} Gamma(s)^2)``."""
    n, s = order.n, order.s
    return Gamma(n / 2.0) / (4.0 ** s * np.pi ** (n / 2.0) * Gamma(s) ** 2)


def torsion(x, ball):
    """``int_B G(x, y) dy``: the solution of ``(-D)^s u = 1`` in the ball, zero outside."""
    n, s, r = ball.n, ball.s, ball.r
    x = np.asarray(x, dtype=float)
    c = Gamma(n / 2.0) / (4.0 ** s * Gamma(1.0 + s) * Gamma(n / 2.0 + s))
    return c * np.clip(r * r - x * x, 0.0, None) ** s


def _check_interior(x, ball):
    if np.any(np.abs(np.asarray(x)) >= ball.r):
        raise InputError("domain-violation", f"interior points must satisfy |x| < r = {ball.r}")


def poisson_kernel(y, x, ball):
    """``P_r(y, x) = c ((r^2 - x^2) / (y^2 - r^2))^s / |x - y|^n`` for ``|x| < r < |y|``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_interior(x, ball)
    if np.any(np.abs(y) <= ball.r):
        raise InputError("domain-violation", f"exterior points must satisfy |y| > r = {ball.r}")
    r2 = ball.r ** 2
    c = poisson_constant(ball.order)
    out = c * ((r2 - x * x) / (y * y - r2)) ** ball.s / np.abs(x - y) ** ball.n
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# exterior quadrature

def exterior_nodes(radial):
    y = radial.nodes
    return np.concatenate([-y[::-1], y])


_QUAD_POINTS = 10
_ROW_CHUNK = 64
_GRADING = 0.2


def _hat_integrals(x, radial, ball, side):
    """``int hat_j(rho) P_r(side rho, x_i) drho`` over ``[r, R_out]`` for all ``i, j``.

    Every cell gets a Gauss-Legendre rule. The cell touching the sphere is
    split geometrically towards ``r`` (deep enough to resolve the row closest
    to the boundary) and its innermost panel uses Gauss-Jacobi with the
    ``(rho - r)^{-s}`` weight built in.
    """
    r, s, h = ball.r, ball.s, radial.h
    rho = radial.nodes
    tl, wl = roots_legendre(_QUAD_POINTS)
    tj, wj = roots_jacobi(_QUAD_POINTS, 0.0, -s)
    d = max(r - np.max(np.abs(x)), 1e-12 * r)
    levels = int(np.clip(np.ceil(np.log(h / d) / np.log(1 / _GRADING)), 0, 40)) + 1
    X = x[:, None]

    # regular cells 1 .. N-2 (and the outer part of cell 0)
    a = np.concatenate([r + h * _GRADING ** np.arange(1, levels + 1), rho[1:-1]])
    b = np.concatenate([r + h * _GRADING ** np.arange(0, levels), rho[2:]])
    cell = np.concatenate([np.zeros(levels, dtype=int), np.arange(1, radial.N - 1)])
    pts = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * tl[None, :]
    wts = 0.5 * (b - a)[:, None] * wl[None, :]
    # innermost panel [r, r + h g^levels] with the endpoint singularity
    e = h * _GRADING ** levels
    pts = np.vstack([pts, r + 0.5 * e * (1 + tj)[None, :]])
    wts = np.vstack([wts, (0.5 * e) ** (1 - s) * wj[None, :]])
    cell = np.append(cell, 0)
    sing = np.zeros(len(cell), dtype=bool)
    sing[-1] = True

    right_hat = (pts - rho[cell][:, None]) / h   # hat of node cell+1
    left_hat = 1.0 - right_hat                   # hat of node cell
    out = np.zeros((len(x), radial.N))
    F = _regular_factor(pts[None, :, :], X[:, :, None], ball, side)
    F = np.where(sing[None, :, None], F, F * (pts - r)[None, :, :] ** (-s)) * wts[None, :, :]
    np.add.at(out.T, cell, np.einsum("ipq,pq->pi", F, left_hat))
    np.add.at(out.T, cell + 1, np.einsum("ipq,pq->pi", F, right_hat))
    return out


def _regular_factor(rho, x, ball, side):
    # P_r(y, x) (|y| - r)^s for y = side * rho
    r = ball.r
    c = poisson_constant(ball.order)
    return c * (r * r - x * x) ** ball.s * (rho + r) ** (-ball.s) / np.abs(x - side * rho) ** ball.n


def poisson_tail(x, ball, R_out):
    """Kernel mass beyond ``R_out`` on each side: ``(left, right)`` arrays over ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    left = np.empty_like(x)
    right = np.empty_like(x)
    for i, xi in enumerate(x):
        for side, out in ((1.0, right), (-1.0, left)):
            f = lambda rho: float(poisson_kernel(side * rho, xi, ball))
            out[i] = integrate.quad(f, R_out, np.inf, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    return left, right


def _check_radial(radial, ball):
    if abs(radial.a - ball.r) > 1e-12 * ball.r:
        raise InputError("grid-overlap", f"radial exterior grid must start at r = {ball.r}, "
                         f"got {radial.a}")


def assemble_fredholm(interior, radial, ball, tail=True):
    """Matrix ``M`` with ``(M g)_i ~ int_{|y|>r} P_r(y, x_i) g(y) dy``.

    ``interior`` is a :class:`Grid1D` or an array of points with ``|x| < r``.
    ``g`` is read as its piecewise-linear interpolant, so ``M[i, j]`` is the
    kernel integrated against the hat function of node ``j`` (see
    :func:`_hat_integrals`). With
    ``tail=True`` the kernel mass beyond ``R_out`` is added to the outermost
    node on each side, i.e. ``g`` is continued as a constant; the size of that
    closure is kept in ``meta['tail']``.
    """
    x = interior.nodes if isinstance(interior, Grid1D) else np.asarray(interior, dtype=float)
    if np.any(np.abs(x) >= ball.r):
        raise InputError("grid-overlap", "interior nodes must lie strictly inside the ball")
    _check_radial(radial, ball)
    M = np.empty((len(x), 2 * radial.N))
    for i in range(0, len(x), _ROW_CHUNK):
        xi = x[i:i + _ROW_CHUNK]
        M[i:i + _ROW_CHUNK, radial.N:] = _hat_integrals(xi, radial, ball, 1.0)
        M[i:i + _ROW_CHUNK, :radial.N] = _hat_integrals(xi, radial, ball, -1.0)[:, ::-1]
    tails = np.zeros((len(x), 2))
    if tail:
        tl, tr = poisson_tail(x, ball, radial.b)
        M[:, 0] += tl
        M[:, -1] += tr
        tails[:, 0], tails[:, 1] = tl, tr
    return DenseOperator(M, exterior_nodes(radial), x,
                         {"s": ball.s, "kind": "fredholm", "r": ball.r, "R_out": radial.b,
                          "tail": tails})


@dataclass(frozen=True, eq=False)
class ExteriorFunction:
    """Values on both sides of the ball, ordered as :func:`exterior_nodes`."""

    radial: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (2 * self.radial.N,):
            raise InputError("shape-mismatch", f"expected {2 * self.radial.N} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("non-finite-value", "exterior values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def nodes(self):
        return exterior_nodes(self.radial)

    @classmethod
    def sample(cls, f, radial):
        return cls(radial, np.asarray(f(exterior_nodes(radial)), dtype=float))


def eval_ug(g, x, ball, tail=True, return_tail=False):
    """s-harmonic lift of the exterior data ``g`` at interior point(s) ``x``.

    ``g`` is an :class:`ExteriorFunction`. The optional tail bound is the
    kernel mass beyond ``R_out`` times the largest outermost value of ``g``,
    i.e. the part of the result that rests on the constant continuation.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    _check_interior(xa, ball)
    M = assemble_fredholm(xa, g.radial, ball, tail=tail)
    out = M @ g.values
    bound = M.meta["tail"].sum(axis=1) * max(abs(g.values[0]), abs(g.values[-1]))
    res = out if np.ndim(x) else float(out[0])
    if return_tail:
        return res, (bound if np.ndim(x) else float(bound[0]))
    return res


# ---------------------------------------------------------------------------
# Green function

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


@njit(cache=True)
def _gl_panel(kind, a, b, s, half_n, xg, wg):
    mid = 0.5 * (a + b)
    rad = 0.5 * (b - a)
    acc = 0.0
    for k in range(xg.shape[0]):
        v = mid + rad * xg[k]
        if kind == 0:
            f = (1.0 + v ** (1.0 / s)) ** (-half_n) / s
        else:
            f = np.exp(s * v) * (1.0 + np.exp(v)) ** (-half_n)
        acc += wg[k] * f
    return acc * rad


@njit(cache=True)
def _adaptive(kind, a, b, s, half_n, xg, wg, tol):
    stack_a = np.empty(200)
    stack_b = np.empty(200)
    stack_a[0] = a
    stack_b[0] = b
    top = 1
    total = 0.0
    while top > 0:
        top -= 1
        lo = stack_a[top]
        hi = stack_b[top]
        mid = 0.5 * (lo + hi)
        whole = _gl_panel(kind, lo, hi, s, half_n, xg, wg)
        split = (_gl_panel(kind, lo, mid, s, half_n, xg, wg)
                 + _gl_panel(kind, mid, hi, s, half_n, xg, wg))
        if abs(whole - split) <= tol * max(abs(split), 1e-300) or hi - lo < 1e-12 or top >= 198:
            total += split
        else:
            stack_a[top] = lo
            stack_b[top] = mid
            stack_a[top + 1] = mid
            stack_b[top + 1] = hi
            top += 2
    return total


@njit(cache=True)
def _incomplete_nb(r0, s, n, xg, wg):
    # int_0^r0 t^{s-1} (1+t)^{-n/2} dt; t = tau^{1/s} on [0, 1], t = e^w beyond
    half_n = 0.5 * n
    lo = min(r0, 1.0)
    val = _adaptive(0, 0.0, lo ** s, s, half_n, xg, wg, 1e-13)
    if r0 > 1.0:
        val += _adaptive(1, 0.0, np.log(r0), s, half_n, xg, wg, 1e-13)
    return val


@njit(cache=True)
def _green_matrix_nb(xs, zs, r, s, n, kappa, log_branch, xg, wg):
    out = np.zeros((xs.shape[0], zs.shape[0]))
    r2 = r * r
    for i in range(xs.shape[0]):
        x = xs[i]
        for j in range(zs.shape[0]):
            z = zs[j]
            d = abs(x - z)
            if d == 0.0 or abs(x) >= r or abs(z) >= r:
                continue
            if log_branch:
                num = r2 - x * z + np.sqrt((r2 - x * x) * (r2 - z * z))
                out[i, j] = np.log(num / (r * d)) / np.pi
            else:
                r0 = (r2 - x * x) * (r2 - z * z) / (r2 * d * d)
                out[i, j] = kappa * d ** (2.0 * s - n) * _incomplete_nb(r0, s, n, xg, wg)
    return out


def _incomplete_np(r0, s, n, panels=48, wpanel=0.5):
    # graded panels toward tau = 0, uniform panels in w = log t
    r0 = np.asarray(r0, dtype=float)
    half_n = 0.5 * n
    top = np.minimum(r0, 1.0) ** s
    edges = np.concatenate([[0.0], 2.0 ** -np.arange(panels - 1, -1, -1.0)])
    a, b = edges[:-1], edges[1:]
    nodes = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * _GL_X[None, :]
    wts = (0.5 * (b - a))[:, None] * _GL_W[None, :]
    tau = top[..., None, None] * nodes
    f = (1.0 + tau ** (1.0 / s)) ** (-half_n) / s
    val = top * np.sum(f * wts, axis=(-2, -1))

    L = np.log(np.maximum(r0, 1.0))
    npan = max(1, int(np.ceil(np.max(L) / wpanel))) if L.size else 1
    u = (np.arange(npan)[:, None] + 0.5 + 0.5 * _GL_X[None, :]) / npan
    w = L[..., None, None] * u
    f = np.exp(s * w) * (1.0 + np.exp(w)) ** (-half_n)
    val += L / npan * np.sum(f * (0.5 * _GL_W)[None, :], axis=(-2, -1))
    return val


def _green_matrix_np(xs, zs, r, s, n, kappa, log_branch, chunk=4096):
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    d = np.abs(X - Z)
    ok = (d > 0) & (np.abs(X) < r) & (np.abs(Z) < r)
    out = np.zeros(X.shape)
    r2 = r * r
    xv, zv, dv = X[ok], Z[ok], d[ok]
    if log_branch:
        num = r2 - xv * zv + np.sqrt((r2 - xv ** 2) * (r2 - zv ** 2))
        out[ok] = np.log(num / (r * dv)) / np.pi
        return out
    r0 = (r2 - xv ** 2) * (r2 - zv ** 2) / (r2 * dv ** 2)
    vals = np.empty_like(r0)
    for k in range(0, r0.size, chunk):
        vals[k:k + chunk] = _incomplete_np(r0[k:k + chunk], s, n)
    out[ok] = kappa * dv ** (2.0 * s - n) * vals
    return out


def incomplete_integral(r0, s, n=1):
    """``int_0^{r0} t^{s-1} (1 + t)^{-n/2} dt`` by quadrature."""
    r0 = np.asarray(r0, dtype=float)
    if use_numba():
        out = np.array([_incomplete_nb(float(v), s, n, _GL_X, _GL_W) for v in r0.ravel()])
        out = out.reshape(r0.shape)
    else:
        out = _incomplete_np(r0, s, n)
    return float(out) if out.ndim == 0 else out


def green_matrix(xs, zs, ball):
    """``G(x_i, z_j)`` for all pairs; pairs with ``x = z`` or on the boundary give 0."""
    xs = np.ascontiguousarray(np.atleast_1d(xs), dtype=float)
    zs = np.ascontiguousarray(np.atleast_1d(zs), dtype=float)
    args = (ball.r, ball.s, ball.n, green_constant(ball.order), ball.log_branch)
    if use_numba():
        return _green_matrix_nb(xs, zs, *args, _GL_X, _GL_W)
    return _green_matrix_np(xs, zs, *args)


def green_function(x, z, ball):
    """Green function of ``(-D)^s`` on the ball with zero exterior condition."""
    if x == z:
        raise InputError("coincident-points", "G(x, z) is undefined for x = z")
    _check_interior([x, z], ball)
    if ball.n != 1 and ball.log_branch:
        raise InputError("unsupported-dimension", "the n = 2s branch is implemented for n = 1")
    return float(green_matrix([x], [z], ball)[0, 0])


def eval_uh(hval, x, ball):
    """``int_B hval(y) G(x, y) dy`` at interior point(s) ``x``.

    ``hval`` must be sampled on a grid covering the closed ball ``[-r, r]``.
    The singularity at ``y = x`` is removed by subtracting ``hval(x)``; that
    piece is integrated exactly via :func:`torsion`, the rest by the trapezoid
    rule.
    """
    g = hval.grid
    if abs(g.a + ball.r) > 1e-12 * ball.r or abs(g.b - ball.r) > 1e-12 * ball.r:
        raise InputError("domain-violation", f"hval must be sampled on [-r, r], got [{g.a}, {g.b}]")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    _check_interior(xa, ball)
    y = g.nodes
    G = green_matrix(xa, y, ball)
    hx = np.atleast_1d(interpolate(hval, xa))
    w = trapezoid_weights(g)
    out = ((hval.values[None, :] - hx[:, None]) * G) @ w + hx * torsion(xa, ball)
    return out if np.ndim(x) else float(out[0])


def fredholm_rhs(u_local, lap_local, ball, probes=None):
    """Interior data ``u - u_h`` of the Fredholm equation at the probe points."""
    if probes is None:
        x = u_local.grid.nodes
        probes = x[np.abs(x) < ball.r * (1 - 1e-12)]
    probes = np.asarray(probes, dtype=float)
    uh = eval_uh(lap_local, probes, ball)
    return probes, np.atleast_1d(interpolate(u_local, probes)) - uh
