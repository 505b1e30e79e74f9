"""Test profiles with independently computable fractional Laplacians.

* ``gaussian``: ``exp(-x^2)``, whose fractional Laplacian is
  ``4^s Gamma(1/2 + s) / Gamma(1/2) * 1F1(1/2 + s; 1/2; -x^2)``.
* ``sinc``: ``sin(x) / x``, with Fourier transform ``pi * 1_{|xi| < 1}``, so
  ``(-Delta)^s sinc(x) = int_0^1 xi^{2s} cos(x xi) d xi``.
"""
import warnings

import numpy as np
import mpmath
from scipy import integrate
from scipy.special import gamma as Gamma

from .errors import InputError


def gaussian(x):
    return np.exp(-np.asarray(x, dtype=float) ** 2)


def sinc(x):
    # numpy's sinc is sin(pi x)/(pi x); removable singularity handled there
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def _gaussian_lap_scalar(x, s):
    pref = 4.0 ** s * Gamma(0.5 + s) / Gamma(0.5)
    return pref * float(mpmath.hyp1f1(0.5 + s, 0.5, -x * x))


def gaussian_lap(x, s):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([_gaussian_lap_scalar(v, s) for v in x.ravel()]).reshape(x.shape)
    return out


def _sinc_lap_scalar(x, s):
    # weight='cos' switches to QAWO for oscillatory integrands
    if abs(x) < 1e-8:
        return 1.0 / (2.0 * s + 1.0)
    val, _ = integrate.quad(lambda t: t ** (2.0 * s), 0.0, 1.0, weight="cos", wvar=abs(x),
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def sinc_lap(x, s):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([_sinc_lap_scalar(v, s) for v in x.ravel()]).reshape(x.shape)


PROFILES = {
    "gaussian": (gaussian, gaussian_lap),
    "sinc": (sinc, sinc_lap),
}


def get_profile(name):
    try:
        return PROFILES[name]
    except KeyError:
        raise InputError("unknown-profile", f"{name!r}; choose from {sorted(PROFILES)}") from None


def _heat_gaussian_scalar(x, t, s):
    # exp(-k^2/4) < 1e-300 beyond k = 52
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(lambda k: np.exp(-0.25 * k * k - t * k ** (2.0 * s)), 0.0, 52.0,
                                weight="cos", wvar=abs(x), epsabs=1e-15, epsrel=1e-12, limit=400)
    return val / np.sqrt(np.pi)


def heat_gaussian(x, t, s):
    """Solution of ``u_t + (-D)^s u = 0`` on the line with ``u(x, 0) = exp(-x^2)``.

    Evaluated from its Fourier representation
    ``pi^{-1/2} int_0^inf exp(-k^2/4 - t k^{2s}) cos(x k) dk``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([_heat_gaussian_scalar(v, t, s) for v in x.ravel()]).reshape(x.shape)
