"""End-to-end reconstruction from local data ``(u|_W, (-D)^s u|_W)``.

Two routes are provided. The Kelvin route moves the unknown exterior part of
``u`` into the unit ball with the Kelvin transform, smooths it with a
positive-definite mollifier, recovers it from exterior values of its
fractional Laplacian by Tikhonov regularisation and undoes both steps. The
Green route solves the Fredholm equation of the first kind that links
exterior values to interior ones through the Poisson kernel.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from .errors import InputError, NumericalFailure
from .extension import build_extension
from .fraclap import assemble_fd_matrix
from .kelvin import MaskedGridFunction
from .greens import ExteriorFunction, assemble_fredholm
from .greens import fredholm_rhs
from .grid import Grid1D, GridFunction, interpolate, relative_l2_error, trapezoid_weights
from .tikhonov import (DEFAULT_MAXIT, DEFAULT_RESTART, DEFAULT_TOL, TikhonovProblem,
                       hs_penalty_operator, lambda_sweep, solve_tikhonov)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LocalData:
    """Samples of ``u`` and of ``(-D)^s u`` on the observation window."""

    u_local: GridFunction
    lap_local: GridFunction

    def __post_init__(self):
        if self.u_local.grid != self.lap_local.grid:
            raise InputError("grid-mismatch", "u_local and lap_local must share a grid")

    @property
    def grid(self):
        return self.u_local.grid

    @property
    def window(self):
        return self.grid.a, self.grid.b


# ---------------------------------------------------------------------------
# mollifier

def wendland(r):
    """Wendland bump ``(1 - r)_+^3 (3 r + 1)``, positive definite on the line."""
    r = np.abs(np.asarray(r, dtype=float))
    return np.where(r < 1.0, (1.0 - r) ** 3 * (3.0 * r + 1.0), 0.0)


# integral of the bump over the real line
_WENDLAND_MASS = 0.8


@dataclass(frozen=True)
class MollifierSpec:
    """Unit-mass Wendland mollifier supported in ``[-support_radius, support_radius]``.

    ``fourier_floor`` is relative to ``max |F psi|``; frequencies where the
    transform falls below it are dropped during deconvolution.
    """

    support_radius: float = 1.5
    fourier_floor: float = 1e-8

    def __post_init__(self):
        if not self.support_radius > 1.0:
            raise InputError("invalid-mollifier",
                             f"support radius must exceed 1, got {self.support_radius}")
        if not self.fourier_floor > 0:
            raise InputError("invalid-mollifier", "fourier floor must be positive")

    def profile(self, x):
        R = self.support_radius
        return wendland(np.asarray(x, dtype=float) / R) / (_WENDLAND_MASS * R)

    def stencil(self, h):
        """Samples ``psi(k h)`` for ``|k h| < R`` (odd length, centred)."""
        K = int(np.ceil(self.support_radius / h))
        return self.profile(h * np.arange(-K, K + 1))

    def is_positive_definite(self, h, length=4096, tol=1e-10):
        st = self.stencil(h)
        L = max(length, 2 * st.size)
        buf = np.zeros(L)
        K = st.size // 2
        buf[:K + 1] = st[K:]
        buf[L - K:] = st[:K]
        spec = np.fft.fft(buf).real
        return bool(spec.min() >= -tol * spec.max())


def mollify(f, moll):
    """Discrete convolution ``h sum_j psi(x_i - x_j) f_j``; ``f`` may contain NaN (treated as 0)."""
    vals = np.nan_to_num(np.asarray(f.values, dtype=float))
    g = f.grid
    st = moll.stencil(g.h)
    K = st.size // 2
    nz = np.flatnonzero(vals)
    if nz.size and (nz[0] < K or nz[-1] > g.N - 1 - K):
        raise InputError("support-overflow",
                         "convolution support exceeds the grid; pad the grid by the support radius")
    return GridFunction(g, g.h * np.convolve(vals, st, mode="same"))


def deconvolve(f_conv, moll, return_info=False):
    """Invert :func:`mollify` by Fourier division with a spectral cut."""
    g = f_conv.grid
    st = moll.stencil(g.h)
    K = st.size // 2
    L = g.N + 2 * K
    buf = np.zeros(L)
    buf[:K + 1] = st[K:]
    buf[L - K:] = st[:K]
    Fpsi = g.h * np.fft.rfft(buf)
    mag = np.abs(Fpsi)
    keep = mag > moll.fourier_floor * mag.max()
    if not np.any(keep):
        raise NumericalFailure("all-floor", "every frequency of the mollifier is below the floor")
    data = np.zeros(L)
    data[:g.N] = f_conv.values
    F = np.fft.rfft(data)
    out = np.zeros_like(F)
    out[keep] = F[keep] / Fpsi[keep]
    res = GridFunction(g, np.fft.irfft(out, n=L)[:g.N])
    if return_info:
        return res, {"cut": int(np.count_nonzero(~keep)), "kept": int(np.count_nonzero(keep))}
    return res


# ---------------------------------------------------------------------------
# Kelvin route

@dataclass
class ReconReport:
    reconstructed: GridFunction
    rel_l2_error: float = None
    stage_diagnostics: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict, repr=False)


def _check_supercritical(order, allow):
    if order.n > order.alpha:
        return False
    if not allow:
        raise InputError("supercritical-order",
                         f"n = {order.n} <= alpha = {order.alpha}; pass allow_supercritical=True "
                         "to run outside the theorem's hypothesis")
    log.warning("alpha = %g >= n = %d: the continuation theorem does not cover this case",
                order.alpha, order.n)
    return True


def reconstruct_kelvin(data, full, order, moll=None, lam=1e-4, *, allow_supercritical=False,
                       truth=None, penalty="as-printed", tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT,
                       restart=DEFAULT_RESTART, width=0.5):
    """Recover ``u`` on ``full`` from data on ``(-1, 1)`` through the Kelvin transform.

    Parameters
    ----------
    data : LocalData
        ``u`` and ``(-D)^s u`` on nodes inside ``(-1, 1)``.
    full : Grid1D
        Output grid; symmetric about 0 with ``b > 1``. Its spacing is reused
        for every intermediate grid.
    order : FracOrder
    moll : MollifierSpec, optional
    lam : float
        Tikhonov weight.
    truth : GridFunction, optional
        Ground truth ``u`` on ``full``; enables ``rel_l2_error``, measured on
        ``h = u - g`` over ``full`` minus ``(-1, 1)``.

    Returns
    -------
    ReconReport
    """
    moll = MollifierSpec() if moll is None else moll
    supercritical = _check_supercritical(order, allow_supercritical)
    if not full.is_symmetric() or full.b <= 1.0:
        raise InputError("invalid-bounds", "full grid must be symmetric and contain [-1, 1]")
    dgrid = data.grid
    if dgrid.a < -1.0 or dgrid.b > 1.0:
        raise InputError("grid-mismatch", "local data must lie inside [-1, 1]")
    alpha, hx, R = order.alpha, full.h, moll.support_radius
    diag = {"supercritical": supercritical}

    # stage 1-2: extension and the fractional Laplacian of h on the window
    g = build_extension(data.u_local, full, width=width)
    fd_full = assemble_fd_matrix(full, order)
    lap_g = GridFunction(full, fd_full @ g.values)
    lap_h = GridFunction(dgrid, data.lap_local.values - interpolate(lap_g, dgrid.nodes))

    # stage 3: exterior data of (-D)^s K[h], known for |t| >= t_min
    t_min = 1.0 / max(-dgrid.a, dgrid.b)
    X = full.b
    M = int(np.ceil((X + R) / hx))
    kgrid = Grid1D(-M * hx, M * hx, 2 * M + 1)
    t = kgrid.nodes
    known = np.abs(t) >= t_min * (1 - 1e-12)
    L = np.zeros(kgrid.N)
    tk = t[known]
    L[known] = np.abs(tk) ** (-alpha - 1.0) * interpolate(lap_h, 1.0 / tk)

    # stage 4: mollified data at probes whose psi-translate sees only known values
    st = moll.stencil(hx)
    K = st.size // 2
    conv = hx * np.convolve(L, st, mode="same")
    dist_mask = np.abs(t) - t_min
    sup_edge = 1.0 + R
    probes = (np.abs(t) > sup_edge + 1e-12) & (dist_mask > K * hx) & (np.abs(t) <= X + 1e-12)
    if not np.any(probes):
        raise NumericalFailure("mask-starvation", "no probe node satisfies the support condition")
    diag["probes"] = int(np.count_nonzero(probes))

    # stage 5: Tikhonov on the support of psi * K[h]
    MX = int(np.floor(X / hx + 1e-9))
    pgrid = Grid1D(-MX * hx, MX * hx, 2 * MX + 1)
    xp = pgrid.nodes
    A_full = assemble_fd_matrix(pgrid, order).matrix
    support = np.abs(xp) <= sup_edge + 1e-12
    rows = np.flatnonzero(np.isin(np.arange(-MX, MX + 1), np.flatnonzero(probes) - M))
    A = A_full[np.ix_(rows, np.flatnonzero(support))]
    b = conv[probes]
    sgrid = Grid1D(xp[support][0], xp[support][-1], int(np.count_nonzero(support)))
    P = hs_penalty_operator(sgrid, order, variant=penalty)
    rep = solve_tikhonov(TikhonovProblem(A, b, P, lam), tol=tol, maxit=maxit, restart=restart)
    diag["tikhonov"] = {"residual": rep.residual_norm, "penalty": rep.penalty_norm,
                        "iterations": rep.iterations, "converged": rep.converged}

    # stage 6: deconvolve (on a grid padded by the mollifier radius)
    pad = K + 1
    wpad = np.zeros(sgrid.N + 2 * pad)
    wpad[pad:pad + sgrid.N] = rep.solution
    wgrid = Grid1D(sgrid.a - pad * hx, sgrid.b + pad * hx, wpad.size)
    Kh, info = deconvolve(GridFunction(wgrid, wpad), moll, return_info=True)
    diag["deconvolution"] = info

    # stage 7-8: back through the Kelvin transform
    y = full.nodes
    outside = np.abs(y) >= 1.0
    h_rec = np.zeros(full.N)
    yo = y[outside]
    h_rec[outside] = np.abs(yo) ** (alpha - 1.0) * interpolate(Kh, 1.0 / yo)
    u_rec = GridFunction(full, g.values + h_rec)

    err = None
    if truth is not None:
        h_true = truth.values - g.values
        w = trapezoid_weights(full) * outside
        denom = np.sqrt(np.sum(w * h_true ** 2))
        if denom == 0:
            raise InputError("zero-reference", "ground-truth h vanishes outside the window")
        err = float(np.sqrt(np.sum(w * (h_rec - h_true) ** 2)) / denom)
    return ReconReport(u_rec, err, diag, {"g": g, "h": GridFunction(full, h_rec),
                                          "kelvin_h": Kh, "smoothed": rep.solution,
                                          "forward": A, "data": b, "support_grid": sgrid})


def kelvin_local_data(profile, full, order):
    """Exact local data on ``(-1, 1)`` and ground truth on ``full`` for a named profile."""
    from .profiles import get_profile
    f, lap = get_profile(profile)
    x = full.nodes
    inside = np.flatnonzero(np.abs(x) < 1.0 - 1e-12)
    sub = Grid1D(x[inside[0]], x[inside[-1]], inside.size)
    data = LocalData(GridFunction(sub, f(sub.nodes)), GridFunction(sub, lap(sub.nodes, order.s)))
    return data, GridFunction(full, f(x))


# ---------------------------------------------------------------------------
# Green route

def _first_difference(n):
    D = np.zeros((n - 1, n))
    D[np.arange(n - 1), np.arange(n - 1)] = -1.0
    D[np.arange(n - 1), np.arange(1, n)] = 1.0
    return D


def exterior_penalty(radial, kind="identity"):
    """Penalty on exterior values.

    ``identity``; ``gradient``: first differences taken separately on each side
    of the ball (constants on either side are free); ``h1``: both stacked.
    """
    M = radial.N
    if kind == "identity":
        return np.eye(2 * M)
    if kind in ("gradient", "h1"):
        D = _first_difference(M) / radial.h
        Z = np.zeros_like(D)
        G = np.vstack([np.hstack([D, Z]), np.hstack([Z, D])])
        return G if kind == "gradient" else np.vstack([np.eye(2 * M), G])
    raise InputError("invalid-penalty", f"unknown exterior penalty {kind!r}")


def _stitch(u_local, ext, ball):
    """Full-line grid function from interior data and exterior values."""
    radial = ext.radial
    xi = u_local.grid.nodes
    inner = np.abs(xi) < ball.r * (1 - 1e-12)
    x = np.concatenate([ext.nodes[:radial.N], xi[inner], ext.nodes[radial.N:]])
    v = np.concatenate([ext.values[:radial.N], u_local.values[inner], ext.values[radial.N:]])
    h = min(u_local.grid.h, radial.h)
    n = int(round(2 * radial.b / h)) + 1
    full = Grid1D(-radial.b, radial.b, n)
    return GridFunction(full, np.interp(full.nodes, x, v))


def reconstruct_green(data, radial, ball, lam=1e-6, *, penalty="h1", truth=None,
                      probes=None, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT, restart=DEFAULT_RESTART,
                      tail=True):
    """Recover exterior values of ``u`` from ``u`` and ``(-D)^s u`` on the ball.

    ``data`` lives on a grid covering ``[-r, r]``; ``radial`` is the exterior
    grid on ``[r, R_out]`` used on both sides. ``truth`` is an optional
    :class:`ExteriorFunction` of exact exterior values.

    The reconstructed field in the report is the stitched full-line function
    on ``[-R_out, R_out]``; the exterior values themselves are in
    ``extra['exterior']``.
    """
    x_rhs, rhs = fredholm_rhs(data.u_local, data.lap_local, ball, probes)
    M = assemble_fredholm(x_rhs, radial, ball, tail=tail)
    P = exterior_penalty(radial, penalty)
    rep = solve_tikhonov(TikhonovProblem(M, rhs, P, lam), tol=tol, maxit=maxit, restart=restart)
    if not rep.converged:
        log.warning("Fredholm solve stagnated at residual %.3e; the problem is severely ill-posed",
                    rep.residual_norm)
    ext = ExteriorFunction(radial, rep.solution)
    diag = {"tikhonov": {"residual": rep.residual_norm, "penalty": rep.penalty_norm,
                         "iterations": rep.iterations, "converged": rep.converged},
            "probes": int(x_rhs.size)}
    err = None if truth is None else exterior_error(ext, truth)
    return ReconReport(_stitch(data.u_local, ext, ball), err, diag,
                       {"exterior": ext, "forward": M, "data": rhs, "report": rep})


def exterior_error(ext, truth):
    """Relative L2 error of exterior values with trapezoid weights on each side."""
    if ext.radial != truth.radial:
        raise InputError("grid-mismatch", "exterior functions live on different radial grids")
    w = np.tile(trapezoid_weights(ext.radial), 2)
    ref = np.sqrt(np.sum(w * truth.values ** 2))
    if ref == 0.0:
        raise InputError("zero-reference", "reference exterior values vanish")
    return float(np.sqrt(np.sum(w * (ext.values - truth.values) ** 2)) / ref)


def green_sweep(data, radial, ball, lambdas, *, penalty="h1", truth=None, probes=None,
                tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT, restart=DEFAULT_RESTART):
    """Green-route solves over a list of ``lambda``; rows ``(lam, residual, penalty, error)``."""
    x_rhs, rhs = fredholm_rhs(data.u_local, data.lap_local, ball, probes)
    M = assemble_fredholm(x_rhs, radial, ball)
    reps = lambda_sweep(M, rhs, exterior_penalty(radial, penalty), lambdas, tol, maxit, restart)
    rows = []
    for r in reps:
        err = None if truth is None else exterior_error(ExteriorFunction(radial, r.solution), truth)
        rows.append((r.lam, r.residual_norm, r.penalty_norm, err))
    return rows, reps


# ---------------------------------------------------------------------------
# potential and heat applications

def recover_potential(u, lap, floor=1e-8):
    """``q = -lap / u`` where ``|u| > floor``; returns a masked grid function."""
    if u.grid != lap.grid:
        raise InputError("grid-mismatch", "u and lap must share a grid")
    known = np.abs(u.values) > floor
    if not np.any(known):
        raise NumericalFailure("all-masked", f"|u| <= {floor} at every node")
    q = np.full(u.grid.N, np.nan)
    q[known] = -lap.values[known] / u.values[known]
    return MaskedGridFunction(u.grid, q, known)


def time_derivative(slices, dt):
    """Second-order finite differences in time; one-sided stencils at both ends."""
    U = np.asarray(slices, dtype=float)
    if U.shape[0] < 3:
        raise InputError("insufficient-slices", f"need at least 3 time slices, got {U.shape[0]}")
    if not dt > 0:
        raise InputError("invalid-dt", f"time step must be positive, got {dt}")
    D = np.empty_like(U)
    D[1:-1] = (U[2:] - U[:-2]) / (2 * dt)
    D[0] = (-3 * U[0] + 4 * U[1] - U[2]) / (2 * dt)
    D[-1] = (3 * U[-1] - 4 * U[-2] + U[-3]) / (2 * dt)
    return D


def heat_reconstruct(u_meas, dt, omega, ball, lam=1e-6, *, radial=None, penalty="h1",
                     truths=None, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT, restart=DEFAULT_RESTART):
    """Slice-wise Green reconstruction for ``u_t + (-D)^s u = 0`` observed on the ball.

    Parameters
    ----------
    u_meas : sequence of GridFunction
        Slices on one grid covering ``[-r, r]``, equally spaced by ``dt``.
    omega : Grid1D
        Region on which each reconstruction is reported.
    radial : Grid1D, optional
        Exterior grid on ``[r, R_out]``; by default it reaches ``max(|omega|)``
        padded to at least ``10 r`` with the slice spacing.
    truths : sequence of GridFunction on ``omega``, optional

    Since ``(-D)^s u = -u_t`` on the ball, each slice is a Green-route problem.
    Returns one :class:`ReconReport` per slice whose ``reconstructed`` lives on
    ``omega``.
    """
    if len(u_meas) < 3:
        raise InputError("insufficient-slices", f"need at least 3 time slices, got {len(u_meas)}")
    grid = u_meas[0].grid
    if any(u.grid != grid for u in u_meas):
        raise InputError("grid-mismatch", "all slices must share one grid")
    if radial is None:
        R_out = max(10.0 * ball.r, abs(omega.a), abs(omega.b))
        radial = Grid1D(ball.r, R_out, int(round((R_out - ball.r) / grid.h)) + 1)
    if max(abs(omega.a), abs(omega.b)) > radial.b * (1 + 1e-12):
        raise InputError("grid-mismatch", "omega reaches beyond the exterior grid")
    ut = time_derivative([u.values for u in u_meas], dt)
    out = []
    for k, u in enumerate(u_meas):
        data = LocalData(u, GridFunction(grid, -ut[k]))
        rep = reconstruct_green(data, radial, ball, lam, penalty=penalty, tol=tol, maxit=maxit,
                                restart=restart)
        on_omega = GridFunction(omega, interpolate(rep.reconstructed, omega.nodes))
        err = None
        if truths is not None:
            err = relative_l2_error(on_omega, truths[k])
        rep.stage_diagnostics["slice"] = k
        out.append(ReconReport(on_omega, err, rep.stage_diagnostics, rep.extra))
    return out
