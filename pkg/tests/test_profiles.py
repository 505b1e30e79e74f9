import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma

from fracrecon.errors import InputError
from fracrecon.profiles import gaussian_lap, get_profile, heat_gaussian, sinc, sinc_lap


def test_gaussian_lap_at_origin():
    # 1F1(a; b; 0) = 1
    for s in (0.2, 0.5, 0.9):
        assert gaussian_lap(0.0, s) == pytest.approx(4 ** s * gamma(0.5 + s) / gamma(0.5), rel=1e-13)


def test_gaussian_lap_half_against_fourier_integral():
    # (-D)^{1/2} e^{-x^2} = pi^{-1/2} int_0^inf k e^{-k^2/4} cos(kx) dk
    for x in (0.0, 0.7, 2.5):
        ref, _ = integrate.quad(lambda k: k * np.exp(-k * k / 4) * np.cos(k * x), 0, 60, limit=200)
        assert gaussian_lap(x, 0.5) == pytest.approx(ref / np.sqrt(np.pi), rel=1e-9, abs=1e-12)


def test_sinc_values():
    np.testing.assert_allclose(sinc(np.array([0.0, np.pi])), [1.0, 0.0], atol=1e-16)
    for s in (0.1, 0.7):
        assert sinc_lap(0.0, s)[0] == pytest.approx(1 / (2 * s + 1), rel=1e-12)


def test_heat_gaussian_initial_and_pde():
    x = np.array([0.0, 0.8, 2.0])
    np.testing.assert_allclose(heat_gaussian(x, 0.0, 0.4), np.exp(-x * x), atol=1e-14)
    dt = 1e-5
    ut = (heat_gaussian(x, 0.3 + dt, 0.4) - heat_gaussian(x, 0.3 - dt, 0.4)) / (2 * dt)
    # at t > 0 the Laplacian is no longer the Gaussian one; compare against the
    # Fourier integral of k^{2s} times the propagated transform
    ref = [integrate.quad(lambda k: k ** 0.8 * np.exp(-k * k / 4 - 0.3 * k ** 0.8) * np.cos(k * v),
                          0, 52, limit=400)[0] / np.sqrt(np.pi) for v in x]
    np.testing.assert_allclose(-ut, ref, rtol=1e-6)


def test_unknown_profile():
    with pytest.raises(InputError, match="unknown-profile"):
        get_profile("cauchy")
