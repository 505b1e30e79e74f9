"""The 1D fractional Laplacian: finite-difference matrix, spectral oracle,
Riesz potential and the normalisation constant of the singular integral.

The finite-difference matrix treats a grid function as zero outside the
cells ``[a - h/2, b + h/2]`` owned by its nodes. Row ``i`` is assembled from

* a weighted trapezoid rule on the symmetric second difference
  ``u(x-xi) - 2u(x) + u(x+xi)`` over ``xi <= m h`` where ``m`` is the distance
  (in nodes) to the nearer edge; the splitting exponent ``gamma = 1 + s``
  makes the first panel exact to leading order,
* exact kernel integrals over the remaining (one-sided) cells, with the
  function piecewise constant per cell,
* the exact integral of ``u(x_i) |x_i - y|^{-1-2s}`` over the exterior.

Every contribution is written in difference form, so a constant function is
mapped exactly onto ``C_{1,s} / (2s) [(x_i - a_out)^{-2s} + (b_out - x_i)^{-2s}]``.
"""
from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.special import gamma as Gamma

from ._accel import njit, use_numba
from .errors import InputError
from .grid import GridFunction


@dataclass(frozen=True)
class FracOrder:
    s: float
    n: int = 1

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise InputError("invalid-order", f"s must lie in (0, 1), got {self.s}")
        if int(self.n) != self.n or self.n < 1:
            raise InputError("invalid-dimension", f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "n", int(self.n))

    @property
    def alpha(self):
        return 2.0 * self.s

    @classmethod
    def from_alpha(cls, alpha, n=1):
        return cls(alpha / 2.0, n)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Dense matrix of a discretised linear map between two node sets."""

    matrix: np.ndarray = field(repr=False)
    in_nodes: np.ndarray = field(repr=False)
    out_nodes: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape != (len(self.out_nodes), len(self.in_nodes)):
            raise InputError("shape-mismatch", f"matrix {m.shape} vs nodes "
                             f"({len(self.out_nodes)}, {len(self.in_nodes)})")
        if not np.all(np.isfinite(m)):
            raise InputError("non-finite-value", "operator entries must be finite")
        object.__setattr__(self, "matrix", m)

    @property
    def rows(self):
        return self.matrix.shape[0]

    @property
    def cols(self):
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, v):
        if isinstance(v, GridFunction):
            v = v.values
        return self.matrix @ np.asarray(v, dtype=float)

    def submatrix(self, rows, cols):
        return DenseOperator(self.matrix[np.ix_(rows, cols)], np.asarray(self.in_nodes)[cols],
                             np.asarray(self.out_nodes)[rows], dict(self.meta))

    def scaled(self, c):
        return DenseOperator(c * self.matrix, self.in_nodes, self.out_nodes, dict(self.meta))

    def dump(self, path):
        """Write a row-major CSV dump with a ``# rows=.. cols=.. s=..`` header."""
        s = self.meta.get("s", "")
        with open(path, "w") as fh:
            fh.write(f"# rows={self.rows} cols={self.cols} s={s}\n")
            np.savetxt(fh, self.matrix, delimiter=",", fmt="%.17g")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            header = fh.readline().lstrip("#").split()
        meta = dict(item.split("=", 1) for item in header)
        m = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        rows, cols = int(meta["rows"]), int(meta["cols"])
        m = m.reshape(rows, cols)
        out = {"s": float(meta["s"])} if meta.get("s") else {}
        return cls(m, np.arange(cols, dtype=float), np.arange(rows, dtype=float), out)


def normalization_constant(order):
    """``C_{n,s} = s 4^s Gamma((n + 2s)/2) / (pi^{n/2} Gamma(1 - s))``."""
    s, n = order.s, order.n
    return s * 4.0 ** s * Gamma((2.0 * s + n) / 2.0) / (np.pi ** (n / 2.0) * Gamma(1.0 - s))


# ---------------------------------------------------------------------------
# finite-difference assembly

def _panel_weight(k, nu, h):
    # integral of xi^(nu-1) over [(k-1)h, kh]
    return h ** nu * (k ** nu - (k - 1.0) ** nu) / nu


@njit(cache=True)
def _fd_matrix_nb(N, h, alpha, C):
    gam = 1.0 + 0.5 * alpha
    nu = gam - alpha
    A = np.zeros((N, N))
    kmax = N
    # symmetric-zone weights c_k / (k h)^gamma, full and truncated at k = m
    panel = np.empty(kmax + 2)
    for k in range(1, kmax + 2):
        panel[k] = h ** nu * (k ** nu - (k - 1.0) ** nu) / nu
    duo_full = np.zeros(kmax + 1)
    duo_last = np.zeros(kmax + 1)
    cell = np.zeros(kmax + 1)
    half = np.zeros(kmax + 1)
    for k in range(1, kmax + 1):
        scale = (k * h) ** (-gam)
        duo_full[k] = 0.5 * (panel[k] + panel[k + 1]) * scale
        duo_last[k] = 0.5 * panel[k] * scale
        cell[k] = (((k - 0.5) * h) ** (-alpha) - ((k + 0.5) * h) ** (-alpha)) / alpha
        half[k] = ((k * h) ** (-alpha) - ((k + 0.5) * h) ** (-alpha)) / alpha
    for i in range(N):
        iL = i
        iR = N - 1 - i
        m = min(iL, iR)
        diag = 0.0
        for k in range(1, m):
            w = C * duo_full[k]
            A[i, i - k] -= w
            A[i, i + k] -= w
            diag += 2.0 * w
        if m >= 1:
            w = C * (duo_last[m] + half[m])
            A[i, i - m] -= w
            A[i, i + m] -= w
            diag += 2.0 * w
        for k in range(m + 1, iL + 1):
            w = C * cell[k]
            A[i, i - k] -= w
            diag += w
        for k in range(m + 1, iR + 1):
            w = C * cell[k]
            A[i, i + k] -= w
            diag += w
        tail = (((iL + 0.5) * h) ** (-alpha) + ((iR + 0.5) * h) ** (-alpha)) / alpha
        A[i, i] = diag + C * tail
    return A


def _fd_matrix_np(N, h, alpha, C):
    gam = 1.0 + 0.5 * alpha
    nu = gam - alpha
    k = np.arange(N + 2, dtype=float)
    panel = np.zeros(N + 2)
    panel[1:] = _panel_weight(k[1:], nu, h)
    kk = k[1:N + 1]
    scale = (kk * h) ** (-gam)
    duo_full = np.zeros(N + 1)
    duo_last = np.zeros(N + 1)
    cell = np.zeros(N + 1)
    half = np.zeros(N + 1)
    duo_full[1:] = 0.5 * (panel[1:N + 1] + panel[2:N + 2]) * scale
    duo_last[1:] = 0.5 * panel[1:N + 1] * scale
    cell[1:] = (((kk - 0.5) * h) ** (-alpha) - ((kk + 0.5) * h) ** (-alpha)) / alpha
    half[1:] = ((kk * h) ** (-alpha) - ((kk + 0.5) * h) ** (-alpha)) / alpha

    i = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    dist = np.abs(i - j)
    m = np.minimum(i, N - 1 - i)
    W = np.where(dist < m, duo_full[dist],
                 np.where(dist == m, duo_last[dist] + half[dist], cell[dist]))
    W[dist == 0] = 0.0
    A = -C * W
    iL = np.arange(N)
    iR = N - 1 - iL
    tail = (((iL + 0.5) * h) ** (-alpha) + ((iR + 0.5) * h) ** (-alpha)) / alpha
    A[np.diag_indices(N)] = C * W.sum(axis=1) + C * tail
    return A


def assemble_fd_matrix(g, order):
    """Dense ``N x N`` finite-difference fractional Laplacian on grid ``g``."""
    if order.n != 1:
        raise InputError("unsupported-dimension", "finite differences are 1D only")
    C = normalization_constant(order)
    if use_numba():
        A = _fd_matrix_nb(g.N, g.h, order.alpha, C)
    else:
        A = _fd_matrix_np(g.N, g.h, order.alpha, C)
    return DenseOperator(A, g.nodes, g.nodes, {"s": order.s, "kind": "fd", "grid": g})


def apply_fd(u, order):
    A = assemble_fd_matrix(u.grid, order)
    return GridFunction(u.grid, A @ u.values)


# ---------------------------------------------------------------------------
# Fourier side

AUTO_PAD_LENGTH = 2 ** 21


def _spectral_multiply(u, symbol, pad):
    g = u.grid
    if pad is None:
        pad = max(1, -(-AUTO_PAD_LENGTH // g.N))
    if pad < 1:
        raise InputError("invalid-pad", "pad factor must be >= 1")
    vmax = np.max(np.abs(u.values))
    if vmax > 0 and max(abs(u.values[0]), abs(u.values[-1])) > 1e-6 * vmax:
        warnings.warn("spectral operator applied to data that does not decay at the "
                      "grid edges; periodic aliasing expected", RuntimeWarning, stacklevel=3)
    L = int(np.ceil(pad * g.N))
    buf = np.zeros(L)
    buf[:g.N] = u.values
    xi = 2.0 * np.pi * np.fft.fftfreq(L, d=g.h)
    out = np.fft.ifft(symbol(np.abs(xi)) * np.fft.fft(buf))
    resid = np.max(np.abs(out.imag)) if out.size else 0.0
    if resid > 1e-10 * max(1.0, np.max(np.abs(out.real))):
        warnings.warn(f"discarding imaginary residue {resid:.2e}", RuntimeWarning, stacklevel=3)
    return GridFunction(g, out.real[:g.N])


def apply_spectral(u, order, pad=None):
    """``F^{-1}(|xi|^{2s} F u)`` via the DFT of ``u`` zero-padded by ``pad``.

    Frequencies are ``2 pi k / (L h)`` for the padded length ``L``. The caller
    must supply data that decays to zero at the grid edges; a warning is issued
    otherwise. Zero-padding pushes the periodic images away and is what makes
    this usable as a whole-line oracle; the default pads to about 2M points.
    ``pad=1`` gives the plain periodic operator on the grid.
    """
    return _spectral_multiply(u, lambda k: k ** order.alpha, pad)


def riesz_potential(u, order, pad=None):
    """Spectral ``|xi|^{-2s}`` multiplier with the zero frequency projected out."""
    if order.alpha >= order.n:
        raise InputError("unsupported-order", f"Riesz potential needs 2s < n, got 2s={order.alpha}")

    def symbol(k):
        out = np.zeros_like(k)
        nz = k > 0
        out[nz] = k[nz] ** (-order.alpha)
        return out

    return _spectral_multiply(u, symbol, pad)
