import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import erf

from fracrecon.errors import InputError
from fracrecon.grid import (Grid1D, GridFunction, interpolate, l2_norm, make_grid,
                            relative_l2_error, restrict, sample, trapezoid_integral)


def test_make_grid_spacing_and_nodes():
    g = make_grid(-5, 5, 11)
    assert g.h == 1.0
    assert g.node(5) == 0.0
    assert make_grid(0, 1, 101).h == pytest.approx(0.01, abs=1e-15)
    g2 = make_grid(-1, 1, 2)
    assert list(g2.nodes) == [-1.0, 1.0] and g2.h == 2.0


def test_last_node_is_exact():
    g = make_grid(-0.3, 1.7, 977)
    assert g.nodes[-1] == 1.7
    assert g.node(0) == -0.3


@pytest.mark.parametrize("a,b,N,code", [(1, 1, 5, "invalid-bounds"), (2, 1, 5, "invalid-bounds"),
                                        (0, 1, 1, "invalid-count"), (0, 1, 0, "invalid-count")])
def test_make_grid_errors(a, b, N, code):
    with pytest.raises(InputError) as exc:
        make_grid(a, b, N)
    assert exc.value.code == code


def test_grid_function_validation():
    g = make_grid(0, 1, 3)
    with pytest.raises(InputError, match="shape-mismatch"):
        GridFunction(g, [1.0, 2.0])
    with pytest.raises(InputError, match="non-finite-value"):
        GridFunction(g, [1.0, np.nan, 2.0])


def test_grid_function_is_immutable():
    u = GridFunction(make_grid(0, 1, 3), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        u.values[0] = 5.0


def test_sample_square():
    u = sample(lambda x: x ** 2, make_grid(-1, 1, 3))
    np.testing.assert_array_equal(u.values, [1.0, 0.0, 1.0])


def test_sample_removable_singularity():
    u = sample(lambda x: np.sinc(x / np.pi), make_grid(-5, 5, 11))
    assert u.values[5] == 1.0


def test_sample_non_finite():
    with pytest.raises(InputError, match="non-finite-value"):
        sample(lambda x: 1.0 / x, make_grid(-1, 1, 3))


def test_interpolate_square_off_node():
    # analytic x^2 at 0.005
    u = sample(lambda x: x ** 2, make_grid(-1, 1, 201))
    assert abs(interpolate(u, 0.005) - 2.5e-5) <= 1e-6


def test_interpolate_exact_at_nodes(rng):
    g = make_grid(-2, 3, 57)
    u = GridFunction(g, rng.normal(size=g.N))
    np.testing.assert_array_equal(interpolate(u, g.nodes), u.values)
    assert interpolate(u, g.node(13)) == u.values[13]


def test_interpolate_out_of_range():
    u = sample(lambda x: x, make_grid(-1, 1, 3))
    with pytest.raises(InputError, match="out-of-range"):
        interpolate(u, 2.0)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_interpolate_reproduces_cubics(c):
    g = make_grid(-1, 2, 31)
    p = np.polynomial.Polynomial(c)
    u = sample(p, g)
    x = np.linspace(-1, 2, 97)
    np.testing.assert_allclose(interpolate(u, x), p(x), atol=1e-10 * (1 + np.abs(c).sum()))


def test_trapezoid_constant_and_linear():
    g = make_grid(0, 1, 101)
    assert trapezoid_integral(sample(lambda x: np.ones_like(x), g)) == pytest.approx(1.0, abs=1e-15)
    assert trapezoid_integral(sample(lambda x: x, g)) == pytest.approx(0.5, abs=1e-15)


def test_trapezoid_gaussian_against_erf():
    val = trapezoid_integral(sample(lambda x: np.exp(-x * x), make_grid(-5, 5, 2001)))
    assert abs(val - np.sqrt(np.pi) * erf(5.0)) <= 1e-6


@given(st.floats(-10, 10, allow_subnormal=False), st.floats(-10, 10, allow_subnormal=False),
       st.floats(-5, 4), st.floats(0.1, 5),
       st.integers(2, 300))
def test_trapezoid_exact_for_affine(p, q, a, length, N):
    g = make_grid(a, a + length, N)
    b = a + length
    exact = p * (b * b - a * a) / 2 + q * length
    val = trapezoid_integral(sample(lambda x: p * x + q, g))
    assert val == pytest.approx(exact, rel=1e-12, abs=1e-12 * (abs(p) + abs(q) + 1e-300) * length * (1 + abs(b)))


def test_relative_error_examples():
    g = make_grid(0, 1, 101)
    v = sample(lambda x: np.ones_like(x), g)
    assert relative_l2_error(v, v) == 0.0
    assert relative_l2_error(2 * v, v) == pytest.approx(1.0, abs=1e-15)
    assert relative_l2_error(v, 2 * v) == pytest.approx(0.5, abs=1e-15)
    assert relative_l2_error(v + 0.1, v) == pytest.approx(0.1, abs=1e-12)


def test_relative_error_zero_reference():
    g = make_grid(0, 1, 5)
    z = GridFunction(g, np.zeros(5))
    with pytest.raises(InputError, match="zero-reference"):
        relative_l2_error(z, z)


def test_relative_error_grid_mismatch():
    a = GridFunction(make_grid(0, 1, 5), np.ones(5))
    b = GridFunction(make_grid(0, 2, 5), np.ones(5))
    with pytest.raises(InputError, match="grid-mismatch"):
        relative_l2_error(a, b)


def test_l2_norm_of_constant():
    g = make_grid(-1, 1, 11)
    assert l2_norm(GridFunction(g, np.full(11, 3.0))) == pytest.approx(3 * np.sqrt(2))


def test_restrict_open_interval():
    u = sample(lambda x: x, make_grid(-2, 2, 9))
    r = restrict(u, -1, 1, open_interval=True)
    np.testing.assert_allclose(r.grid.nodes, [-0.5, 0.0, 0.5])
    r2 = restrict(u, -1, 1)
    assert r2.grid.N == 5 and r2.grid.a == -1.0


def test_grids_compare_by_value():
    assert Grid1D(0, 1, 5) == make_grid(0.0, 1.0, 5)
    assert Grid1D(0, 1, 5) != Grid1D(0, 1, 6)
