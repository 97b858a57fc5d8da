import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxreg.acceptance import translating_inclusion
from maxreg.coefficients import (
    CoefficientField,
    EllipticityBounds,
    InterfaceSpec,
    constant_field,
    l1_distance,
    linf_distance,
    matrix_bounds,
    moving_interface_field,
    piecewise_constant_in_time,
    verify_ellipticity,
)
from maxreg.fem import build_interval_mesh, build_rect_mesh


def test_bounds_validation():
    with pytest.raises(ValueError):
        EllipticityBounds(0.0, 1.0)
    with pytest.raises(ValueError):
        EllipticityBounds(2.0, 1.0)
    assert EllipticityBounds(0.5, 2.0).scaled(2.0, 3.0) == EllipticityBounds(1.0, 6.0)


@pytest.mark.parametrize("matrix,lower,upper", [
    (np.eye(2), 1.0, 1.0),
    (np.diag([2.0, 3.0]), 2.0, 3.0),
    (np.array([[1.0, 1.0], [0.0, 1.0]]), 0.5, (1 + np.sqrt(5)) / 2),
])
def test_constant_field_bounds(matrix, lower, upper):
    f = constant_field(matrix)
    assert f.bounds.c_lower == pytest.approx(lower, abs=1e-14)
    assert f.bounds.c_upper == pytest.approx(upper, abs=1e-14)
    # independent oracle: eigenvalues of the symmetric part and singular values
    sym = 0.5 * (matrix + matrix.T)
    assert f.bounds.c_lower == pytest.approx(np.linalg.eigvalsh(sym).min(), abs=1e-14)
    assert f.bounds.c_upper == pytest.approx(np.linalg.svd(matrix, compute_uv=False).max(), abs=1e-14)


def test_constant_field_rejects_non_elliptic():
    with pytest.raises(ValueError):
        constant_field(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_piecewise_single_field_is_identity():
    f = constant_field(np.diag([1.0, 2.0]))
    g = piecewise_constant_in_time([f], [], horizon=1.0)
    pts = np.random.default_rng(0).uniform(size=(5, 2))
    np.testing.assert_array_equal(g.sample(0.3, pts), f.sample(0.3, pts))


def test_piecewise_selection_and_sides():
    g = piecewise_constant_in_time([constant_field(np.eye(2)), constant_field(2 * np.eye(2))], [0.5], 1.0)
    np.testing.assert_array_equal(g(0.25, [0.1, 0.1]), np.eye(2))
    np.testing.assert_array_equal(g(0.75, [0.1, 0.1]), 2 * np.eye(2))
    # at the jump: right-continuous by default, left limit on request
    np.testing.assert_array_equal(g.sample(0.5, [[0.1, 0.1]], side="right")[0], 2 * np.eye(2))
    np.testing.assert_array_equal(g.sample(0.5, [[0.1, 0.1]], side="left")[0], np.eye(2))
    assert g.jump_times == (0.5,)
    assert (g.bounds.c_lower, g.bounds.c_upper) == (1.0, 2.0)


def test_piecewise_validation():
    f = constant_field(np.eye(1))
    with pytest.raises(ValueError):
        piecewise_constant_in_time([f, f], [], 1.0)
    with pytest.raises(ValueError):
        piecewise_constant_in_time([f, f, f], [0.6, 0.4], 1.0)
    with pytest.raises(ValueError):
        piecewise_constant_in_time([f, f], [1.0], 1.0)


def test_moving_interface_membership():
    f = translating_inclusion()
    np.testing.assert_array_equal(f(0.0, [0.3]), [[1.0]])
    np.testing.assert_array_equal(f(0.0, [0.5]), [[2.0]])
    np.testing.assert_array_equal(f(1.0, [0.45]), [[1.0]])


def test_moving_interface_must_stay_inside():
    spec = InterfaceSpec("interval", 0.1, (0.3,), (0.7,), 1.0, 2.0, ((0.0,), (1.0,)))
    with pytest.raises(ValueError):
        moving_interface_field(spec, 1.0)
    with pytest.raises(ValueError, match="differ"):
        moving_interface_field(InterfaceSpec("interval", 0.1, (0.3,), (0.1,), 1.0, 1.0, ((0.0,), (1.0,))), 1.0)
    with pytest.raises(ValueError, match="shape"):
        moving_interface_field(InterfaceSpec("ellipse", 0.1, (0.3, 0.3)), 1.0)


def test_moving_disk_2d():
    spec = InterfaceSpec("disk", 0.15, (0.3, 0.3), (0.3, 0.3), 1.0, 4.0, ((0.0, 0.0), (1.0, 1.0)))
    f = moving_interface_field(spec, 1.0)
    np.testing.assert_array_equal(f(0.0, [0.3, 0.3]), np.eye(2))
    np.testing.assert_array_equal(f(1.0, [0.3, 0.3]), 4 * np.eye(2))
    np.testing.assert_array_equal(f(1.0, [0.6, 0.6]), np.eye(2))
    assert verify_ellipticity(f, build_rect_mesh(8, 8), 11).passed


def test_distances_on_diagonal_and_constant_field():
    mesh = build_interval_mesh(64)
    f = translating_inclusion()
    assert linf_distance(f, 0.3, 0.3, mesh) == 0.0
    assert l1_distance(f, 0.3, 0.3, mesh) == 0.0
    c = constant_field(np.eye(1))
    assert linf_distance(c, 0.0, 0.9, mesh) == 0.0
    assert l1_distance(c, 0.0, 0.9, mesh) == 0.0


def test_moving_interface_linf_jump_is_exactly_one():
    mesh = build_interval_mesh(256)
    assert linf_distance(translating_inclusion(), 0.0, 0.5, mesh) == 1.0


@pytest.mark.parametrize("h", [1 / 16, 1 / 32, 1 / 64])
def test_l1_slope_matches_symmetric_difference(h):
    # intervals of equal length shifted by v*h differ on a set of measure 2*v*h
    mesh = build_interval_mesh(256)
    f = translating_inclusion()
    for t in (0.0, 0.4):
        assert l1_distance(f, t, t + h, mesh, refine=64) / h == pytest.approx(0.2, abs=0.02)


def test_l1_barycenter_rule_within_one_cell():
    mesh = build_interval_mesh(256)
    f = translating_inclusion()
    h = 1 / 4
    cell = 1 / 256
    assert abs(l1_distance(f, 0.0, h, mesh) - 0.2 * h) <= 2 * cell


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_distances_are_pseudometrics(t, s, u):
    mesh = build_interval_mesh(64)
    f = translating_inclusion()
    for dist in (linf_distance, l1_distance):
        assert dist(f, t, s, mesh) == pytest.approx(dist(f, s, t, mesh), abs=1e-15)
        assert dist(f, t, s, mesh) >= 0
        assert dist(f, t, u, mesh) <= dist(f, t, s, mesh) + dist(f, s, u, mesh) + 1e-12


def test_verify_ellipticity_pass_and_fail():
    mesh = build_rect_mesh(3, 3)
    f = constant_field(np.eye(2))
    assert verify_ellipticity(f, mesh, 5).passed
    rep = verify_ellipticity(f, mesh, 5, bounds=EllipticityBounds(2.0, 3.0))
    assert not rep.passed
    assert rep.violations[0]["kind"] == "lower" and rep.violations[0]["value"] == pytest.approx(1.0)
    assert verify_ellipticity(translating_inclusion(), build_interval_mesh(32), 21).passed


@given(st.integers(0, 2**32 - 1))
def test_constructors_pass_their_own_bounds(seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((2, 2))
    A = A @ A.T + 0.1 * np.eye(2) + r.uniform(-0.5, 0.5) * np.array([[0, 1], [-1, 0]])
    B = np.diag(r.uniform(0.2, 3.0, 2))
    mesh = build_rect_mesh(3, 3)
    a, b = constant_field(A), constant_field(B)
    assert verify_ellipticity(a, mesh, 3).passed
    assert verify_ellipticity(piecewise_constant_in_time([a, b], [0.5], 1.0), mesh, 9).passed
    lo, hi = matrix_bounds(np.stack([A, B]))
    assert lo > 0 and hi >= lo


def test_from_function_and_cell_matrices():
    f = CoefficientField.from_function(lambda t, x: (1 + t + x[0]) * np.eye(1), EllipticityBounds(1, 3), 1)
    mesh = build_interval_mesh(4)
    mats = f.cell_matrices(0.5, mesh)
    np.testing.assert_allclose(mats[:, 0, 0], 1.5 + mesh.barycenters[:, 0])
    assert verify_ellipticity(f, mesh, 5).passed
