import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxreg.coefficients import EllipticityBounds, constant_field, piecewise_constant_in_time
from maxreg.fem import build_interval_mesh, mark_dirichlet, p1_space
from maxreg.norms import mr_norm
from maxreg.parabolic import (
    ParabolicProblem,
    TimeGrid,
    apriori_check,
    energy_residual,
    estimate_mr_constant,
    form_bounds,
    forcing_norm,
    mr_probe_ratio,
    mr_ratio_report,
    nodal_forcing,
    probe_forcings,
    reference_problem,
    solve_nonautonomous,
)

from .conftest import SETUPS


def _identity(mesh):
    return constant_field(np.eye(mesh.dim))


def _switching(mesh, T=1.0):
    d = mesh.dim
    return piecewise_constant_in_time(
        [constant_field(np.eye(d)), constant_field(3.0 * np.eye(d)), constant_field(0.5 * np.eye(d))],
        [0.25, 0.5], horizon=T,
    )


def _random_forcing(seed, grid, n):
    F = np.zeros((len(grid), n))
    F[1:] = np.random.default_rng(seed).standard_normal((grid.n_steps, n))
    return F


# -- time grids ---------------------------------------------------------------------------


def test_time_grid_uniform_and_extra_nodes():
    g = TimeGrid.uniform(2.0, 4, [0.3, 1.0 + 1e-14])
    np.testing.assert_allclose(g.times, [0, 0.3, 0.5, 1.0, 1.5, 2.0])
    assert g.horizon == 2.0 and g.n_steps == 5 and len(g) == 6
    assert g.contains(0.3) and not g.contains(0.31)
    np.testing.assert_allclose(TimeGrid.uniform(1.0, 2).refined().times, [0, 0.25, 0.5, 0.75, 1.0])


@pytest.mark.parametrize(
    "bad",
    [lambda: TimeGrid.uniform(0.0, 4), lambda: TimeGrid.uniform(1.0, 0), lambda: TimeGrid.uniform(1.0, 4, [1.5]),
     lambda: TimeGrid(np.array([0.0, 0.5, 0.5, 1.0])), lambda: TimeGrid(np.array([0.1, 1.0]))],
)
def test_time_grid_rejects_invalid(bad):
    with pytest.raises(ValueError):
        bad()


def test_form_bounds_include_shift():
    b = form_bounds(EllipticityBounds(0.5, 2.0), 1.0)
    assert (b.c_lower, b.c_upper) == (0.5, 2.0)
    b = form_bounds(EllipticityBounds(2.0, 3.0), 1.0)
    assert (b.c_lower, b.c_upper) == (1.0, 3.0)
    with pytest.raises(ValueError):
        form_bounds(EllipticityBounds(1.0, 1.0), 0.0)


# -- solver -------------------------------------------------------------------------------


def test_zero_forcing_gives_zero_solution(setup):
    mesh, part = setup
    grid = TimeGrid.uniform(1.0, 8)
    u = solve_nonautonomous(_switching(mesh), np.zeros((9, part.n_free)), grid, mesh, part)
    assert not np.any(u.values)


def test_scalar_surrogate_one_step(unit_interval):
    # operator M on the single DOF: (M + dt M) u1 = dt M  ->  u1 = dt / (1 + dt)
    mesh, part = unit_interval
    space = p1_space(mesh, part)
    grid = TimeGrid.uniform(0.1, 1)
    problem = ParabolicProblem(mesh, part, grid, operator=space.mass)
    u = problem.solve(np.array([[0.0], [1 / 3]]))
    assert u.values[1, 0] == pytest.approx(0.1 / 1.1, rel=1e-14)


def test_scalar_field_solution_closed_form(unit_interval):
    # mu = 2, shift 1: A = 2 * 4 + 1/3, u_k = (M u_{k-1} + dt F) / (M + dt A)
    mesh, part = unit_interval
    grid = TimeGrid.uniform(1.0, 5)
    F = np.zeros((6, 1))
    F[1:, 0] = np.arange(1, 6)
    u = solve_nonautonomous(constant_field([[2.0]]), F, grid, mesh, part)
    M, A, dt, prev = 1 / 3, 8 + 1 / 3, 0.2, 0.0
    for k in range(1, 6):
        prev = (M * prev + dt * F[k, 0]) / (M + dt * A)
        assert u.values[k, 0] == pytest.approx(prev, rel=1e-13)


def test_step_equations_hold(setup):
    mesh, part = setup
    grid = TimeGrid.uniform(1.0, 12, [1 / 3])
    field = _switching(mesh)
    problem = ParabolicProblem(mesh, part, grid, field)
    F = _random_forcing(0, grid, part.n_free)
    U = problem.solve(F).values
    M = problem.M
    for k, (A, dt) in enumerate(zip(problem.operators, grid.steps), start=1):
        res = M @ (U[k] - U[k - 1]) + dt * (A @ U[k]) - dt * F[k]
        assert np.abs(res).max() <= 1e-12 * max(1.0, np.abs(dt * F[k]).max())


def test_left_limit_sampling_at_jumps():
    mesh = build_interval_mesh(6)
    part = mark_dirichlet(mesh, lambda x: True)
    grid = TimeGrid.uniform(1.0, 4)
    problem = ParabolicProblem(mesh, part, grid, _switching(mesh))
    space = p1_space(mesh, part)
    # steps end at 0.25, 0.5, 0.75, 1.0: coefficients 1, 3, 0.5, 0.5
    for A, c in zip(problem.operators, [1.0, 3.0, 0.5, 0.5]):
        expected = c * space.stiffness_identity + space.mass
        assert abs(A - expected).max() < 1e-12


def test_missing_jump_time_is_rejected():
    mesh = build_interval_mesh(6)
    part = mark_dirichlet(mesh, lambda x: True)
    with pytest.raises(ValueError, match="jump time"):
        ParabolicProblem(mesh, part, TimeGrid.uniform(1.0, 3), _switching(mesh))


def test_constructor_validation(unit_interval):
    mesh, part = unit_interval
    grid = TimeGrid.uniform(1.0, 2)
    with pytest.raises(ValueError):
        ParabolicProblem(mesh, part, grid)
    with pytest.raises(ValueError):
        ParabolicProblem(mesh, part, grid, operator=[p1_space(mesh, part).mass])
    with pytest.raises(ValueError):
        ParabolicProblem(mesh, part, grid, operator=p1_space(mesh, part).mass).solve(np.zeros((2, 1)))


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_superposition(a, b, seed):
    mesh, part = SETUPS["rect-mixed"]
    grid = TimeGrid.uniform(1.0, 8)
    problem = ParabolicProblem(mesh, part, grid, _switching(mesh))
    F, H = _random_forcing(seed, grid, part.n_free), _random_forcing(seed + 1, grid, part.n_free)
    lhs = problem.solve(a * F + b * H).values
    rhs = a * problem.solve(F).values + b * problem.solve(H).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_nodal_forcing_interpolates_source(unit_interval):
    mesh, part = unit_interval
    grid = TimeGrid.uniform(1.0, 2)
    F = nodal_forcing(lambda t, x: t * np.ones(len(x)), grid, mesh, part)
    # integral of the hat function times t: t / 2
    np.testing.assert_allclose(F[:, 0], [0.0, 0.25, 0.5], rtol=1e-14)


# -- energy identity ----------------------------------------------------------------------


def test_energy_residual_equals_increment_dissipation(setup):
    mesh, part = setup
    grid = TimeGrid.uniform(1.0, 16, [0.25, 0.5])
    field = _switching(mesh)
    F = _random_forcing(3, grid, part.n_free)
    u = solve_nonautonomous(field, F, grid, mesh, part)
    res = energy_residual(u, field, F, grid, mesh, part)
    M = p1_space(mesh, part).mass
    dU = np.diff(u.values, axis=0)
    expected = np.concatenate([[0.0], -0.5 * np.cumsum(np.einsum("kn,kn->k", dU, (M @ dU.T).T))])
    np.testing.assert_allclose(res, expected, atol=1e-10 * (1 + np.abs(expected).max()))
    assert np.all(res <= 1e-12)


def test_energy_residual_zero_forcing(setup):
    mesh, part = setup
    grid = TimeGrid.uniform(1.0, 4)
    F = np.zeros((5, part.n_free))
    u = solve_nonautonomous(_identity(mesh), F, grid, mesh, part)
    assert not np.any(energy_residual(u, _identity(mesh), F, grid, mesh, part))


def test_energy_residual_halves_under_refinement():
    mesh = build_interval_mesh(16)
    part = mark_dirichlet(mesh, lambda x: True)
    field = _identity(mesh)
    finals = []
    for N in (32, 64, 128):
        grid = TimeGrid.uniform(1.0, N)
        F = nodal_forcing(lambda t, x: np.sin(np.pi * t) * np.sin(np.pi * x[:, 0]), grid, mesh, part)
        u = solve_nonautonomous(field, F, grid, mesh, part)
        finals.append(energy_residual(u, field, F, grid, mesh, part)[-1])
    assert 1.5 <= finals[0] / finals[1] <= 3 and 1.5 <= finals[1] / finals[2] <= 3


# -- a priori checks and estimates --------------------------------------------------------


def test_apriori_constants():
    mesh = build_interval_mesh(8)
    part = mark_dirichlet(mesh, lambda x: True)
    grid = TimeGrid.uniform(1.0, 8)
    F = _random_forcing(0, grid, part.n_free)
    u = solve_nonautonomous(constant_field([[1.0]]), F, grid, mesh, part)
    rep = apriori_check(u, F, grid, mesh, part, EllipticityBounds(0.5, 2.0))
    assert (rep.constants["state"], rep.constants["derivative"], rep.constants["mr"]) == (2.0, 5.0, 7.0)
    rep = apriori_check(u, F, grid, mesh, part, EllipticityBounds(1.0, 1.0))
    assert rep.constants["mr"] == 3.0
    assert rep.passed and max(rep.ratios.values()) <= 1.0


def test_apriori_zero_forcing_gives_zero_ratios(setup):
    mesh, part = setup
    grid = TimeGrid.uniform(1.0, 4)
    F = np.zeros((5, part.n_free))
    u = solve_nonautonomous(_identity(mesh), F, grid, mesh, part)
    rep = apriori_check(u, F, grid, mesh, part, EllipticityBounds(1.0, 1.0))
    assert rep.passed and all(v == 0.0 for v in rep.ratios.values())


@given(st.integers(0, 2**32 - 1))
def test_apriori_bounds_hold_for_switching_fields(seed):
    mesh, part = SETUPS["rect-dirichlet"]
    grid = TimeGrid.uniform(1.0, 12, [0.25, 0.5])
    field = _switching(mesh)
    F = _random_forcing(seed, grid, part.n_free)
    u = solve_nonautonomous(field, F, grid, mesh, part)
    rep = apriori_check(u, F, grid, mesh, part, field.bounds, tolerance=0.0)
    assert rep.passed, rep.ratios


def test_reference_estimate_below_three(setup):
    mesh, part = setup
    grid = TimeGrid.uniform(1.0, 16)
    est = estimate_mr_constant(reference_problem(mesh, part, grid), 2.0, probes=24)
    assert est.probes == 24 and est.value <= 3.0 * (1 + 1e-6)
    assert est.labels[:3] == ["mode0", "mode1", "mode2"] or part.n_free < 3


def test_estimate_nondecreasing_in_probes():
    mesh, part = SETUPS["rect-mixed"]
    problem = reference_problem(mesh, part, TimeGrid.uniform(1.0, 16))
    values = [estimate_mr_constant(problem, 2.0, probes=p, seed=5).value for p in (1, 4, 16, 32)]
    assert values == sorted(values)
    with pytest.raises(ValueError):
        estimate_mr_constant(problem, 2.0, probes=0)


def test_probe_family_prefix_is_stable():
    mesh, part = SETUPS["interval-dirichlet"]
    problem = reference_problem(mesh, part, TimeGrid.uniform(1.0, 10))
    short, long = probe_forcings(problem, 5, seed=2), probe_forcings(problem, 9, seed=2)
    for (la, Fa), (lb, Fb) in zip(short, long):
        assert la == lb
        np.testing.assert_array_equal(Fa, Fb)


def test_scalar_probe_ratio_closed_form(unit_interval):
    # one DOF, operator G = 13/3: constant forcing F gives u_k = (1 - rho^k) F / G
    mesh, part = unit_interval
    N, T = 20, 1.0
    grid = TimeGrid.uniform(T, N)
    G, M, dt = 13 / 3, 1 / 3, T / N
    F = np.zeros((N + 1, 1))
    F[1:] = 0.7
    rho = M / (M + dt * G)
    u = (1 - rho ** np.arange(N + 1)) * 0.7 / G
    du = np.diff(u) / dt
    for r in (1.5, 2.0, 3.0):
        state = np.sqrt(G) * (dt * np.sum(np.abs(u[1:]) ** r)) ** (1 / r)
        deriv = M / np.sqrt(G) * (dt * np.sum(np.abs(du) ** r)) ** (1 / r)
        f_norm = 0.7 / np.sqrt(G) * T ** (1 / r)
        ratio = mr_probe_ratio(reference_problem(mesh, part, grid), F, r)
        assert ratio == pytest.approx((state + deriv) / f_norm, rel=1e-12)


def test_mr_norm_first_order_in_time():
    mesh = build_interval_mesh(16)
    part = mark_dirichlet(mesh, lambda x: True)
    vals = []
    for N in (16, 32, 64, 128):
        grid = TimeGrid.uniform(1.0, N)
        F = nodal_forcing(lambda t, x: np.sin(np.pi * t) * np.sin(np.pi * x[:, 0]), grid, mesh, part)
        vals.append(mr_norm(solve_nonautonomous(_identity(mesh), F, grid, mesh, part), 2.0, 2.0, mesh, part))
    d = np.abs(np.diff(vals))
    assert 1.5 <= d[0] / d[1] <= 3 and 1.5 <= d[1] / d[2] <= 3


def test_tilde_ratio_is_one_for_the_duality_map(setup):
    # A(I) + I is exactly the Gram operator, so (d/dt + J) u = f on every probe
    mesh, part = setup
    grid = TimeGrid.uniform(1.0, 16)
    rep = mr_ratio_report(_identity(mesh), 2.0, 2.0, grid, mesh, part, probes=8, window=(1.9, 2.1))
    assert rep.tilde_ratio == pytest.approx(1.0, rel=1e-10)
    assert rep.mr_ratio <= 3.0 * (1 + 1e-6)
    assert rep.in_window and rep.passed and rep.bound == 24.0


def test_mr_ratio_report_outside_window_is_not_checked():
    mesh, part = SETUPS["interval-dirichlet"]
    grid = TimeGrid.uniform(1.0, 12, [0.25, 0.5])
    rep = mr_ratio_report(_switching(mesh), 3.0, 2.0, grid, mesh, part, probes=4, window=(1.9, 2.1))
    assert not rep.in_window and rep.passed
    d = rep.as_dict()
    assert d["window"] == [1.9, 2.1] and d["ratios"]["tilde"] == rep.tilde_ratio


def test_forcing_norm_scales_with_horizon(unit_interval):
    mesh, part = unit_interval
    for T in (0.5, 2.0):
        grid = TimeGrid.uniform(T, 7)
        F = np.ones((8, 1))
        assert forcing_norm(F, grid, mesh, part, 3.0) == pytest.approx(np.sqrt(3 / 13) * T ** (1 / 3), rel=1e-13)
