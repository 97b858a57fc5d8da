import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxreg.coefficients import (
    CoefficientField,
    EllipticityBounds,
    constant_field,
    piecewise_constant_in_time,
)
from maxreg.fem import build_interval_mesh, build_rect_mesh, mark_dirichlet, p1_space
from maxreg.norms import Trajectory
from maxreg.parabolic import TimeGrid, apriori_check, nodal_forcing, solve_nonautonomous
from maxreg.quasilinear import (
    FixedPointConfig,
    SigmaFunction,
    apply_psi,
    c_l2_distance,
    effective_coefficients,
    fixed_point_solve,
    quasilinear_residual,
    verify_effective_ellipticity,
)

TANH = SigmaFunction(lambda x: 1.5 + 0.5 * np.tanh(x), 1.0, 2.0)


def _problem(n_cells=16, steps=16, amplitude=2.0):
    mesh = build_interval_mesh(n_cells)
    part = mark_dirichlet(mesh, lambda x: True)
    grid = TimeGrid.uniform(1.0, steps, [0.5])
    field = piecewise_constant_in_time([constant_field([[1.0]]), constant_field([[2.0]])], [0.5], horizon=1.0)
    f = nodal_forcing(
        lambda t, x: amplitude * np.sin(np.pi * t) * np.sin(np.pi * x[:, 0]), grid, mesh, part
    )
    return mesh, part, grid, field, f


# -- validation ---------------------------------------------------------------------------


def test_sigma_function_validation():
    with pytest.raises(ValueError):
        SigmaFunction(lambda x: x, 2.0, 1.0)
    with pytest.raises(ValueError, match="leaves"):
        SigmaFunction(lambda x: 1.0 + np.abs(x), 1.0, 3.0)
    s = SigmaFunction.constant(2.5)
    np.testing.assert_array_equal(s(np.zeros(3)), [2.5, 2.5, 2.5])
    assert s.max_jump() == 0.0


def test_sigma_continuity_check_shrinks():
    assert TANH.max_jump(20001) < TANH.max_jump(2001) < 0.01


@pytest.mark.parametrize("kw", [{"tolerance": 0.0}, {"max_iterations": 0}, {"damping": 0.0}, {"damping": 1.5}])
def test_fixed_point_config_validation(kw):
    with pytest.raises(ValueError):
        FixedPointConfig(**kw)


def test_c_l2_distance_hand_value():
    mesh = build_interval_mesh(2)
    part = mark_dirichlet(mesh, lambda x: True)
    M = p1_space(mesh, part).mass
    grid = np.array([0.0, 0.5, 1.0])
    u = Trajectory(grid, np.array([[0.0], [1.0], [3.0]]))
    assert c_l2_distance(u, Trajectory.zeros(grid, 1), M) == pytest.approx(3 * np.sqrt(1 / 3), rel=1e-15)


def test_apply_psi_rejects_grid_mismatch():
    mesh, part, grid, field, f = _problem()
    other = Trajectory.zeros(TimeGrid.uniform(1.0, 8).times, part.n_free)
    with pytest.raises(ValueError):
        apply_psi(other, field, TANH, f, grid, mesh, part)


# -- consistency with the linear solver ---------------------------------------------------


def test_sigma_one_reproduces_linear_solution():
    mesh, part, grid, field, f = _problem()
    res = fixed_point_solve(field, SigmaFunction.constant(1.0), f, grid, mesh, part, FixedPointConfig(1e-12))
    lin = solve_nonautonomous(field, f, grid, mesh, part)
    assert res.converged and res.iterations <= 2
    assert c_l2_distance(res.trajectory, lin, p1_space(mesh, part).mass) <= 1e-12
    assert quasilinear_residual(lin, field, SigmaFunction.constant(1.0), f, grid, mesh, part) < 1e-10


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_constant_sigma_scales_the_coefficient(c):
    mesh, part, grid, _, f = _problem()
    field = constant_field([[1.5]])
    res = fixed_point_solve(field, SigmaFunction.constant(c), f, grid, mesh, part, FixedPointConfig(1e-12))
    lin = solve_nonautonomous(constant_field([[1.5 * c]]), f, grid, mesh, part)
    assert res.converged and res.iterations <= 2
    np.testing.assert_allclose(res.trajectory.values, lin.values, atol=1e-12)


def test_zero_forcing_is_a_fixed_point():
    mesh, part, grid, field, f = _problem()
    zero = Trajectory.zeros(grid.times, part.n_free)
    assert not np.any(apply_psi(zero, field, TANH, 0 * f, grid, mesh, part).values)
    res = fixed_point_solve(field, TANH, 0 * f, grid, mesh, part)
    assert res.converged and res.iterations == 1 and res.history == [0.0]


def test_effective_coefficients_are_sigma_times_mu():
    mesh, part, grid, field, f = _problem()
    v = solve_nonautonomous(field, f, grid, mesh, part)
    mus = effective_coefficients(v, field, TANH, grid, mesh, part)
    B = p1_space(mesh, part).barycenter_operator
    for k, (t, mu) in enumerate(zip(grid.times[1:], mus), start=1):
        expected = TANH(B @ v.values[k])[:, None, None] * field.cell_matrices(t, mesh, side="left")
        np.testing.assert_array_equal(mu, expected)


# -- the tanh nonlinearity ----------------------------------------------------------------


def test_tanh_iteration_converges_monotonically():
    mesh, part, grid, field, f = _problem()
    tol = 1e-10
    res = fixed_point_solve(field, TANH, f, grid, mesh, part, FixedPointConfig(tol))
    assert res.converged and res.iterations < 50
    assert all(b < a for a, b in zip(res.history, res.history[1:]))
    assert res.history[-1] < tol
    resid = quasilinear_residual(res.trajectory, field, TANH, f, grid, mesh, part)
    assert resid < 10 * tol


def test_ellipticity_and_apriori_bounds_at_every_iterate():
    mesh, part, grid, field, f = _problem()
    bounds = field.bounds.scaled(TANH.lower, TANH.upper)
    v = Trajectory.zeros(grid.times, part.n_free)
    for _ in range(6):
        rep = verify_effective_ellipticity(v, field, TANH, grid, mesh, part)
        assert rep.passed
        u = apply_psi(v, field, TANH, f, grid, mesh, part)
        # u solves a linear problem whose coefficient lies in E(sigma_lo c, sigma_hi C)
        check = apriori_check(u, f, grid, mesh, part, bounds, tolerance=0.0)
        assert check.passed, check.ratios
        v = u


def test_ellipticity_violation_is_reported():
    mesh, part, grid, field, f = _problem()
    v = solve_nonautonomous(field, 50 * f, grid, mesh, part)
    assert verify_effective_ellipticity(v, field, TANH, grid, mesh, part).passed
    # a field whose declared upper bound understates its values
    understated = CoefficientField(field.sampler, EllipticityBounds(1.0, 1.5), 1, field.jump_times, 1.0)
    rep = verify_effective_ellipticity(v, understated, TANH, grid, mesh, part)
    assert not rep.passed and rep.violations


def test_solution_is_stable_under_time_refinement():
    sols = {}
    for N in (64, 128, 256):
        mesh, part, grid, field, f = _problem(steps=N)
        sols[N] = fixed_point_solve(field, TANH, f, grid, mesh, part, FixedPointConfig(1e-10)).trajectory
    M = p1_space(mesh, part).mass

    def gap(a, b):
        # compare at the coarse nodes
        stride = (len(sols[b].grid) - 1) // (len(sols[a].grid) - 1)
        coarse = Trajectory(sols[a].grid, sols[b].values[::stride])
        return c_l2_distance(sols[a], coarse, M)

    # first order once the coarse grid resolves the forcing
    g1, g2 = gap(64, 128), gap(128, 256)
    assert g1 < 0.01 and 1.5 <= g1 / g2 <= 3


def test_two_dimensional_problem_converges():
    mesh = build_rect_mesh(4, 4)
    part = mark_dirichlet(mesh, lambda x: True)
    grid = TimeGrid.uniform(1.0, 8)
    f = nodal_forcing(lambda t, x: np.ones(len(x)), grid, mesh, part)
    res = fixed_point_solve(constant_field(np.eye(2)), TANH, f, grid, mesh, part, FixedPointConfig(1e-10))
    assert res.converged
    assert quasilinear_residual(res.trajectory, constant_field(np.eye(2)), TANH, f, grid, mesh, part) < 1e-8


@given(st.floats(0.2, 5.0), st.floats(0.0, 0.9))
def test_residual_small_for_any_admissible_tanh(center_scale, rel_amp):
    center = 1.0 + center_scale
    amp = rel_amp * center
    sigma = SigmaFunction(lambda x: center + amp * np.tanh(x), center - amp, center + amp)
    mesh, part, grid, field, f = _problem(n_cells=8, steps=8)
    res = fixed_point_solve(field, sigma, f, grid, mesh, part, FixedPointConfig(1e-10, 200))
    if res.converged:
        assert quasilinear_residual(res.trajectory, field, sigma, f, grid, mesh, part) < 1e-6
    assert verify_effective_ellipticity(res.trajectory, field, sigma, grid, mesh, part).passed
