import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from fracrecon.errors import InputError, NumericalFailure
from fracrecon.fraclap import FracOrder, assemble_fd_matrix
from fracrecon.greens import BallSpec, ExteriorFunction, eval_ug
from fracrecon.grid import (Grid1D, GridFunction, make_grid, relative_l2_error, sample,
                            trapezoid_integral)
from fracrecon.kelvin import MaskedGridFunction
from fracrecon.profiles import heat_gaussian
from fracrecon.recon import (LocalData, MollifierSpec, ReconReport, deconvolve, exterior_penalty,
                             green_sweep, heat_reconstruct, kelvin_local_data, mollify,
                             reconstruct_green, reconstruct_kelvin, recover_potential,
                             time_derivative, wendland)

SOLVER = {"tol": 1e-8, "maxit": 5000}


# ---------------------------------------------------------------------------
# mollifier

def test_wendland_profile():
    assert wendland(0.0) == 1.0
    assert wendland(1.0) == 0.0 and wendland(-2.0) == 0.0
    m = MollifierSpec(2.0)
    x = np.linspace(-3, 3, 60001)
    p = m.profile(x)
    assert np.all(p[np.abs(x) >= 2.0] == 0)
    np.testing.assert_allclose(p, m.profile(-x), rtol=0, atol=0)
    assert trapezoid(p, x) == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("h", [0.1, 0.025, 0.005])
def test_mollifier_positive_definite(h):
    assert MollifierSpec(1.5).is_positive_definite(h)


def test_mollifier_validation():
    with pytest.raises(InputError, match="invalid-mollifier"):
        MollifierSpec(1.0)
    with pytest.raises(InputError, match="invalid-mollifier"):
        MollifierSpec(1.5, 0.0)


@pytest.mark.parametrize("N", [401, 1601])
def test_mollify_spike(N):
    m = MollifierSpec()
    g = make_grid(-4, 4, N)
    v = np.zeros(N)
    v[N // 2] = 1 / g.h
    out = mollify(GridFunction(g, v), m)
    np.testing.assert_allclose(out.values, m.profile(g.nodes), atol=1e-3)


def test_mollify_zero_and_mass():
    m = MollifierSpec()
    g = make_grid(-6, 6, 1201)
    assert np.all(mollify(GridFunction(g, np.zeros(g.N)), m).values == 0)
    f = sample(lambda x: np.clip(1 - x * x / 4, 0, None) ** 4 * (1 + 0.3 * x), g)
    mass = trapezoid_integral(f) * trapezoid_integral(sample(m.profile, g))
    assert trapezoid_integral(mollify(f, m)) == pytest.approx(mass, rel=1e-6)


def test_mollify_masked_input():
    g = make_grid(-5, 5, 101)
    v = np.where(np.abs(g.nodes) < 1, np.cos(g.nodes), 0.0)
    masked = MaskedGridFunction(g, v, np.abs(g.nodes) > 0.3)
    out = mollify(masked, MollifierSpec())
    ref = mollify(GridFunction(g, np.where(masked.known, v, 0.0)), MollifierSpec())
    np.testing.assert_array_equal(out.values, ref.values)


def test_mollify_support_overflow():
    g = make_grid(-2, 2, 101)
    with pytest.raises(InputError, match="support-overflow"):
        mollify(GridFunction(g, np.ones(g.N)), MollifierSpec())


@given(st.floats(0.5, 2.5), st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=20)
def test_deconvolution_round_trip(width, shift, tilt):
    m = MollifierSpec()
    g = make_grid(-8, 8, 1601)
    f = sample(lambda x: np.clip(1 - ((x - shift) / width) ** 2, 0, None) ** 4 * (1 + tilt * x), g)
    back, info = deconvolve(mollify(f, m), m, return_info=True)
    assert relative_l2_error(back, f) <= 0.01
    assert info["kept"] > 0


def test_deconvolve_zero_and_floor():
    g = make_grid(-5, 5, 201)
    assert np.all(deconvolve(GridFunction(g, np.zeros(g.N)), MollifierSpec()).values == 0)
    with pytest.raises(NumericalFailure, match="all-floor"):
        deconvolve(GridFunction(g, np.ones(g.N)), MollifierSpec(1.5, np.inf))


# ---------------------------------------------------------------------------
# Kelvin route

def _restrict_inside(full, values):
    x = full.nodes
    ins = np.flatnonzero(np.abs(x) < 1)
    sub = Grid1D(x[ins[0]], x[ins[-1]], ins.size)
    return GridFunction(sub, values[ins])


def test_local_data_validation():
    a = GridFunction(make_grid(-1, 1, 11), np.zeros(11))
    b = GridFunction(make_grid(-1, 1, 12), np.zeros(12))
    with pytest.raises(InputError, match="grid-mismatch"):
        LocalData(a, b)
    assert LocalData(a, a).window == (-1.0, 1.0)


def test_kelvin_zero_residual_shortcut():
    order = FracOrder.from_alpha(0.6)
    full = make_grid(-5, 5, 420)
    u = sample(lambda x: np.clip(1 - 4 * x * x, 0, None) ** 4, full)
    lap = assemble_fd_matrix(full, order) @ u.values
    data = LocalData(_restrict_inside(full, u.values), _restrict_inside(full, lap))
    rep = reconstruct_kelvin(data, full, order, width=0.2)
    # only roundoff from interpolating lap_g back onto the data nodes is left
    assert np.max(np.abs(rep.extra["h"].values)) <= 1e-8
    np.testing.assert_allclose(rep.reconstructed.values, u.values, atol=1e-8)
    assert rep.rel_l2_error is None


def test_kelvin_report_fields():
    order = FracOrder.from_alpha(0.6)
    full = make_grid(-5, 5, 200)
    data, truth = kelvin_local_data("gaussian", full, order)
    rep = reconstruct_kelvin(data, full, order, truth=truth)
    assert isinstance(rep, ReconReport)
    assert rep.reconstructed.grid == full
    assert rep.rel_l2_error is not None and np.isfinite(rep.rel_l2_error)
    d = rep.stage_diagnostics
    assert d["probes"] > 0 and d["deconvolution"]["kept"] > 0
    assert set(d["tikhonov"]) == {"residual", "penalty", "iterations", "converged"}
    inside = np.abs(full.nodes) < 1
    np.testing.assert_allclose(rep.reconstructed.values[inside], truth.values[inside], atol=1e-10)


def test_kelvin_self_consistency_on_window():
    # FD(u_rec) restricted to the window should match lap_local up to the
    # stage residual plus the discretisation error of the FD operator itself
    order = FracOrder.from_alpha(0.6)
    full = make_grid(-5, 5, 420)
    data, truth = kelvin_local_data("gaussian", full, order)
    rep = reconstruct_kelvin(data, full, order, truth=truth)
    fd = assemble_fd_matrix(full, order).matrix
    inside = np.abs(full.nodes) < 1
    lap = data.lap_local.values
    scale = np.linalg.norm(lap)
    mismatch = np.linalg.norm((fd @ rep.reconstructed.values)[inside] - lap) / scale
    discretisation = np.linalg.norm((fd @ truth.values)[inside] - lap) / scale
    b = rep.extra["data"]
    stage = rep.stage_diagnostics["tikhonov"]["residual"] / np.linalg.norm(b)
    assert mismatch <= stage + discretisation


def test_kelvin_mask_starvation():
    order = FracOrder.from_alpha(0.6)
    full = make_grid(-2, 2, 201)
    data, _ = kelvin_local_data("gaussian", full, order)
    with pytest.raises(NumericalFailure, match="mask-starvation"):
        reconstruct_kelvin(data, full, order)


def test_kelvin_supercritical_flag(caplog):
    order = FracOrder.from_alpha(1.5)
    full = make_grid(-5, 5, 100)
    data, _ = kelvin_local_data("gaussian", full, order)
    with pytest.raises(InputError, match="supercritical-order"):
        reconstruct_kelvin(data, full, order)
    with caplog.at_level(logging.WARNING):
        rep = reconstruct_kelvin(data, full, order, allow_supercritical=True)
    assert rep.stage_diagnostics["supercritical"] is True
    assert any("does not cover" in r.getMessage() for r in caplog.records)


def test_kelvin_input_errors():
    order = FracOrder.from_alpha(0.6)
    full = make_grid(-5, 5, 100)
    data, _ = kelvin_local_data("gaussian", full, order)
    with pytest.raises(InputError, match="invalid-bounds"):
        reconstruct_kelvin(data, make_grid(-4, 5, 100), order)
    wide = LocalData(GridFunction(make_grid(-2, 2, 11), np.zeros(11)),
                     GridFunction(make_grid(-2, 2, 11), np.zeros(11)))
    with pytest.raises(InputError, match="grid-mismatch"):
        reconstruct_kelvin(wide, full, order)


# ---------------------------------------------------------------------------
# Green route

def EXP(y):
    return np.exp(-(np.abs(y) - 1)) * (1 + 0.3 * np.sign(y))


def green_data(s, f, N_ball=81, radial=None, noise=0.0, seed=0):
    ball = BallSpec(1.0, FracOrder(s))
    bgrid = make_grid(-1, 1, N_ball)
    radial = make_grid(1, 10, 361) if radial is None else radial
    truth = ExteriorFunction.sample(f, radial)
    x = bgrid.nodes
    inner = np.abs(x) < 1 - 1e-12
    u = np.empty_like(x)
    u[inner] = eval_ug(truth, x[inner], ball)
    u[~inner] = f(x[~inner])
    if noise:
        u = u + noise * np.sqrt(np.mean(u ** 2)) * np.random.default_rng(seed).standard_normal(u.size)
    data = LocalData(GridFunction(bgrid, u), GridFunction(bgrid, np.zeros_like(u)))
    return data, radial, ball, truth


LAMBDAS = np.logspace(-10, -2, 9)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_green_manufactured(s):
    data, radial, ball, truth = green_data(s, EXP)
    rows, _ = green_sweep(data, radial, ball, LAMBDAS, truth=truth, **SOLVER)
    assert min(r[3] for r in rows) <= 0.05


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_green_constant_exterior(s):
    data, radial, ball, truth = green_data(s, lambda y: 2.0 + 0 * y)
    rows, _ = green_sweep(data, radial, ball, LAMBDAS, truth=truth, penalty="gradient", **SOLVER)
    assert min(r[3] for r in rows) <= 0.02


def test_green_zero_data():
    data, radial, ball, _ = green_data(0.5, lambda y: 0 * y)
    rep = reconstruct_green(data, radial, ball)
    assert np.all(rep.extra["exterior"].values == 0)
    assert np.all(rep.reconstructed.values == 0)


def test_green_report_and_stitch():
    data, radial, ball, truth = green_data(0.5, EXP)
    rep = reconstruct_green(data, radial, ball, 1e-6, truth=truth)
    full = rep.reconstructed
    assert full.grid.a == -10 and full.grid.b == 10
    inside = np.abs(full.grid.nodes) < 1
    np.testing.assert_allclose(full.values[inside],
                               np.interp(full.grid.nodes[inside], data.grid.nodes,
                                         data.u_local.values), atol=1e-12)
    assert rep.rel_l2_error <= 0.05
    assert rep.stage_diagnostics["probes"] == 79


def test_exterior_penalty_kinds():
    radial = make_grid(1, 2, 5)
    I = exterior_penalty(radial, "identity")
    G = exterior_penalty(radial, "gradient")
    H = exterior_penalty(radial, "h1")
    assert I.shape == (10, 10) and G.shape == (8, 10) and H.shape == (18, 10)
    two_constants = np.r_[np.full(5, 3.0), np.full(5, -1.0)]
    assert np.all(G @ two_constants == 0)
    with pytest.raises(InputError, match="invalid-penalty"):
        exterior_penalty(radial, "h2")


# ---------------------------------------------------------------------------
# potential and heat

def test_potential_constant():
    g = make_grid(-2, 2, 41)
    u = sample(lambda x: 1 + x * x, g)
    q = recover_potential(u, GridFunction(g, -2 * u.values))
    assert np.all(q.values == 2.0) and q.n_masked == 0


def test_potential_zero_crossing():
    g = make_grid(-2, 2, 41)
    u = sample(lambda x: x, g)
    q = recover_potential(u, GridFunction(g, -u.values ** 3), floor=0.15)
    assert q.n_masked == 3
    assert np.all(np.isfinite(q.values[q.known]))
    np.testing.assert_allclose(q.values[q.known], g.nodes[q.known] ** 2, rtol=1e-14)


def test_potential_manufactured():
    g = make_grid(-3, 3, 301)
    u = sample(lambda x: (1 + 0.5 * np.cos(3 * x)) * np.exp(-0.25 * x * x), g)
    q_true = 1 + g.nodes ** 2
    q = recover_potential(u, GridFunction(g, -q_true * u.values))
    assert np.max(np.abs(q.values[q.known] - q_true[q.known])) <= 1e-12


def test_potential_errors():
    g = make_grid(-1, 1, 11)
    with pytest.raises(NumericalFailure, match="all-masked"):
        recover_potential(GridFunction(g, np.zeros(11)), GridFunction(g, np.ones(11)))
    with pytest.raises(InputError, match="grid-mismatch"):
        recover_potential(GridFunction(g, np.ones(11)),
                          GridFunction(make_grid(-1, 1, 12), np.ones(12)))


def test_time_derivative_exact_on_quadratics():
    t = 0.3 + 0.1 * np.arange(6)
    slices = np.array([[tt ** 2, 3 * tt - 1] for tt in t])
    D = time_derivative(slices, 0.1)
    np.testing.assert_allclose(D[:, 0], 2 * t, rtol=1e-12)
    np.testing.assert_allclose(D[:, 1], 3.0, rtol=1e-12)
    with pytest.raises(InputError, match="insufficient-slices"):
        time_derivative(slices[:2], 0.1)
    with pytest.raises(InputError, match="invalid-dt"):
        time_derivative(slices, 0.0)


def test_heat_two_slices():
    g = make_grid(-1, 1, 11)
    two = [GridFunction(g, np.ones(11))] * 2
    with pytest.raises(InputError, match="insufficient-slices"):
        heat_reconstruct(two, 0.1, make_grid(-3, 3, 31), BallSpec(1.0, FracOrder(0.5)))


def test_heat_stationary_is_lift_problem():
    s = 0.5
    data, radial, ball, truth = green_data(s, EXP, N_ball=41)
    slices = [data.u_local] * 3
    omega = make_grid(-3, 3, 61)
    reps = heat_reconstruct(slices, 0.1, omega, ball, 1e-6, radial=radial, **SOLVER)
    direct = reconstruct_green(data, radial, ball, 1e-6, **SOLVER)
    for rep in reps:
        np.testing.assert_allclose(rep.extra["exterior"].values,
                                   direct.extra["exterior"].values, rtol=1e-6)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_heat_manufactured(s):
    ball = BallSpec(1.0, FracOrder(s))
    bgrid = make_grid(-1, 1, 41)
    omega = make_grid(-3, 3, 121)
    ts = 0.5 + 0.05 * np.arange(4)
    slices = [GridFunction(bgrid, heat_gaussian(bgrid.nodes, t, s)) for t in ts]
    truths = [GridFunction(omega, heat_gaussian(omega.nodes, t, s)) for t in ts]
    reps = heat_reconstruct(slices, 0.05, omega, ball, 1e-4, truths=truths, **SOLVER)
    assert len(reps) == 4
    assert all(r.rel_l2_error <= 0.10 for r in reps)
    assert [r.stage_diagnostics["slice"] for r in reps] == [0, 1, 2, 3]
