"""Tikhonov-regularised least squares solved with restarted GMRES."""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.linalg import toeplitz
from scipy.sparse.linalg import cg

from .errors import InputError
from .fraclap import AUTO_PAD_LENGTH, DenseOperator, assemble_fd_matrix, normalization_constant

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_RESTART = 50
DEFAULT_MAXIT = 1000


@dataclass
class SolveReport:
    solution: np.ndarray = field(repr=False)
    residual_norm: float
    penalty_norm: float
    iterations: int
    converged: bool
    status: str = "converged"
    history: list = field(default_factory=list, repr=False)
    lam: float = None


@dataclass(frozen=True, eq=False)
class TikhonovProblem:
    """``min ||A x - b||^2 + lam ||P x||^2``; ``penalty=None`` means the identity."""

    forward: np.ndarray
    data: np.ndarray
    penalty: np.ndarray = None
    lam: float = 1e-4

    def __post_init__(self):
        A = _as_matrix(self.forward)
        b = np.asarray(self.data, dtype=float)
        P = np.eye(A.shape[1]) if self.penalty is None else _as_matrix(self.penalty)
        if b.shape != (A.shape[0],):
            raise InputError("dimension-mismatch", f"A is {A.shape}, b has shape {b.shape}")
        if P.shape[1] != A.shape[1]:
            raise InputError("dimension-mismatch", f"A is {A.shape}, P is {P.shape}")
        if not self.lam > 0:
            raise InputError("invalid-lambda", f"lambda must be positive, got {self.lam}")
        object.__setattr__(self, "forward", A)
        object.__setattr__(self, "data", b)
        object.__setattr__(self, "penalty", P)

    def with_lambda(self, lam):
        return TikhonovProblem(self.forward, self.data, self.penalty, lam)


def _as_matrix(op):
    return op.matrix if isinstance(op, DenseOperator) else np.asarray(op, dtype=float)


def gmres(apply, rhs, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT, restart=DEFAULT_RESTART, x0=None):
    """Restarted GMRES(m) for ``apply(x) = rhs`` starting from ``x0`` (default 0).

    Stops when ``||apply(x) - rhs|| <= tol ||rhs||``. ``maxit`` counts inner
    (Arnoldi) steps over all cycles. ``history`` holds the residual estimate
    after every inner step.
    """
    b = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(b)):
        raise InputError("non-finite-value", "rhs must be finite")
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(np.zeros(n), 0.0, 0.0, 0, True)
    target = tol * bnorm
    m = max(1, min(restart, n))
    history = []
    its = 0
    r = b - apply(x)
    beta = np.linalg.norm(r)
    status = "no-convergence"
    while its < maxit:
        if beta <= target:
            status = "converged"
            break
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        stalled = False
        for k in range(m):
            w = apply(V[k])
            for j in range(k + 1):  # modified Gram-Schmidt
                H[j, k] = w @ V[j]
                w = w - H[j, k] * V[j]
            H[k + 1, k] = np.linalg.norm(w)
            breakdown = H[k + 1, k] <= 1e-14 * max(1.0, np.abs(H[:k + 1, k]).max())
            if not breakdown:
                V[k + 1] = w / H[k + 1, k]
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                stalled = True
                break
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            its += 1
            k_used = k + 1
            history.append(abs(g[k + 1]))
            if abs(g[k + 1]) <= target or breakdown or its >= maxit:
                break
        if k_used:
            y = np.linalg.solve(np.triu(H[:k_used, :k_used]), g[:k_used])
            x = x + V[:k_used].T @ y
        r = b - apply(x)
        beta = np.linalg.norm(r)
        # an invariant Krylov space: nothing more to gain by restarting
        if (stalled or breakdown) and beta > target:
            break
    if beta <= target:
        status = "converged"
    return SolveReport(x, float(beta), 0.0, its, status == "converged", status, history)


def _conjugate_gradient(B, rhs, tol, maxit):
    its = [0]

    def count(_):
        its[0] += 1

    x, info = cg(B, rhs, rtol=tol, atol=0.0, maxiter=maxit, callback=count)
    r = np.linalg.norm(B @ x - rhs)
    ok = info == 0
    return SolveReport(x, float(r), 0.0, its[0], ok, "converged" if ok else "no-convergence")


def solve_tikhonov(p, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT, restart=DEFAULT_RESTART,
                   method="gmres"):
    """Minimise ``||A x - b||^2 + lam ||P x||^2`` through its normal equations.

    The normal matrix ``A^T A + lam P^T P`` is formed explicitly and handed to
    GMRES (or conjugate gradients with ``method="cg"``). A run that does not
    reach ``tol`` comes back with ``converged=False``.
    """
    A, b, P = p.forward, p.data, p.penalty
    B = A.T @ A + p.lam * (P.T @ P)
    rhs = A.T @ b
    if method == "gmres":
        rep = gmres(lambda v: B @ v, rhs, tol=tol, maxit=maxit, restart=restart)
    elif method == "cg":
        rep = _conjugate_gradient(B, rhs, tol, maxit)
    else:
        raise InputError("invalid-method", f"unknown Krylov method {method!r}")
    x = rep.solution
    rep.residual_norm = float(np.linalg.norm(A @ x - b))
    rep.penalty_norm = float(np.linalg.norm(P @ x))
    rep.lam = p.lam
    if not rep.converged:
        log.warning("Tikhonov solve (lam=%g) stopped after %d iterations without reaching tol=%g",
                    p.lam, rep.iterations, tol)
    return rep


def hs_penalty_operator(g, order, variant="as-printed"):
    """Penalty matrix whose squared norm stands in for ``[u]^2_{H^s}``.

    ``as-printed`` uses ``sqrt(2 / C_{1,s})`` times the finite-difference
    ``(-D)^s`` matrix; ``half-order`` uses the same factor with a spectral
    ``(-D)^{s/2}`` Toeplitz matrix, which is the textbook seminorm identity.
    """
    if order.n != 1:
        raise InputError("unsupported-dimension", "penalty operator is 1D only")
    c = np.sqrt(2.0 / normalization_constant(order))
    if variant == "as-printed":
        return assemble_fd_matrix(g, order).scaled(c)
    if variant == "half-order":
        N = g.N
        L = max(AUTO_PAD_LENGTH, 4 * N)
        xi = 2.0 * np.pi * np.fft.fftfreq(L, d=g.h)
        delta = np.zeros(L)
        delta[0] = 1.0
        k = np.fft.ifft(np.abs(xi) ** order.s * np.fft.fft(delta)).real
        col = k[:N]
        row = np.concatenate([[k[0]], k[::-1][:N - 1]])
        T = toeplitz(col, row)
        return DenseOperator(c * T, g.nodes, g.nodes, {"s": order.s, "kind": "half-order"})
    raise InputError("invalid-penalty", f"unknown penalty variant {variant!r}")


def lambda_sweep(forward, data, penalty, lambdas, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT,
                 restart=DEFAULT_RESTART, method="gmres"):
    """One :class:`SolveReport` per regularisation weight, in the given order."""
    lambdas = [float(l) for l in lambdas]
    if any(l <= 0 for l in lambdas):
        raise InputError("invalid-lambda", "all lambdas must be positive")
    if lambdas != sorted(lambdas):
        raise InputError("invalid-lambda", "lambdas must be sorted ascending")
    if not lambdas:
        return []
    base = TikhonovProblem(forward, data, penalty, lambdas[0])
    return [solve_tikhonov(base.with_lambda(l), tol, maxit, restart, method) for l in lambdas]


def lcurve_rows(reports):
    return [(r.lam, r.residual_norm, r.penalty_norm) for r in reports]
