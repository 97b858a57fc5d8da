"""Damped Picard iteration for ``u' + A(sigma(u) mu_t) u + u = f``, ``u(0) = 0``.

The map ``Psi`` freezes the nonlinearity: given a trajectory ``v`` it solves
the linear problem whose coefficient on step ``k`` is ``sigma(v_k(x_c)) *
mu_{t_k}(x_c)`` on every cell ``c`` (``x_c`` the barycenter, ``v_k`` the P1
interpolant at the step's right endpoint).  Existence of a fixed point comes
from a compactness argument, not a contraction, so the iteration may stall;
the solver then reports the best iterate instead of raising.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coefficients import CoefficientField, EllipticityBounds, EllipticityReport, check_cell_matrices
from .fem import BoundaryPartition, Mesh, p1_space
from .norms import Trajectory, dual_norms
from .parabolic import ParabolicProblem, TimeGrid, check_forcing

__all__ = [
    "SigmaFunction",
    "FixedPointConfig",
    "FixedPointResult",
    "effective_coefficients",
    "apply_psi",
    "fixed_point_solve",
    "quasilinear_residual",
    "verify_effective_ellipticity",
    "c_l2_distance",
]


@dataclass(frozen=True)
class SigmaFunction:
    """Continuous scalar nonlinearity with values in ``[lower, upper]``."""

    func: Callable[[np.ndarray], np.ndarray]
    lower: float
    upper: float
    probe_range: tuple = (-10.0, 10.0)

    def __post_init__(self):
        if not 0 < self.lower <= self.upper < np.inf:
            raise ValueError("need 0 < lower <= upper")
        x = np.linspace(*self.probe_range, 2001)
        y = self(x)
        if y.min() < self.lower - 1e-12 or y.max() > self.upper + 1e-12:
            raise ValueError(
                f"sigma leaves [{self.lower}, {self.upper}] on the probe range (observed "
                f"[{y.min():.6g}, {y.max():.6g}])"
            )

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape)

    def max_jump(self, n: int = 20001) -> float:
        """Largest change between neighbouring samples on the probe range; a
        finite-sampling continuity check that should shrink as ``n`` grows."""
        return float(np.abs(np.diff(self(np.linspace(*self.probe_range, n)))).max())

    @classmethod
    def constant(cls, c: float) -> "SigmaFunction":
        return cls(lambda x: np.full_like(x, c), c, c)


@dataclass(frozen=True)
class FixedPointConfig:
    tolerance: float = 1e-8
    max_iterations: int = 50
    damping: float = 1.0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class FixedPointResult:
    trajectory: Trajectory
    iterations: int
    history: list
    converged: bool
    dampings: list = field(default_factory=list)


def c_l2_distance(u: Trajectory, v: Trajectory, mass) -> float:
    """Discrete C(J; L2) distance ``max_k ||u_k - v_k||_M``."""
    D = u.values - v.values
    return float(np.sqrt(np.maximum(np.einsum("kn,kn->k", D, (mass @ D.T).T), 0.0)).max())


def effective_coefficients(
    v: Trajectory, field: CoefficientField, sigma: SigmaFunction, grid: TimeGrid, mesh: Mesh,
    partition: BoundaryPartition,
) -> list:
    """Per-step cell matrices ``sigma(v_k) * mu_{t_k}``, steps k = 1..N."""
    B = p1_space(mesh, partition).barycenter_operator
    out = []
    for k, t in enumerate(grid.times[1:], start=1):
        s = sigma(B @ v.values[k])
        out.append(s[:, None, None] * field.cell_matrices(t, mesh, side="left"))
    return out


def _frozen_problem(v, field, sigma, grid, mesh, partition):
    space = p1_space(mesh, partition)
    ops = [
        (space.stiffness(mu) + space.mass).tocsr()
        for mu in effective_coefficients(v, field, sigma, grid, mesh, partition)
    ]
    return ParabolicProblem(mesh, partition, grid, operator=ops)


def apply_psi(
    v: Trajectory,
    field: CoefficientField,
    sigma: SigmaFunction,
    f,
    grid: TimeGrid,
    mesh: Mesh,
    partition: BoundaryPartition,
) -> Trajectory:
    """One application of the frozen-coefficient solution map (shift 1)."""
    if not np.array_equal(v.grid, grid.times):
        raise ValueError("trajectory and grid differ")
    return _frozen_problem(v, field, sigma, grid, mesh, partition).solve(f)


def fixed_point_solve(
    field: CoefficientField,
    sigma: SigmaFunction,
    f,
    grid: TimeGrid,
    mesh: Mesh,
    partition: BoundaryPartition,
    cfg: FixedPointConfig = FixedPointConfig(),
) -> FixedPointResult:
    """Iterate ``v <- (1 - w) v + w Psi(v)`` from ``v = 0``.

    Stops when the C(J; L2) distance between consecutive iterates drops
    below ``cfg.tolerance``.  With ``cfg.damping == 1`` a step that increases
    the distance is redone with ``w = 0.5``.
    """
    space = p1_space(mesh, partition)
    f = check_forcing(f, grid, space.n)
    v = Trajectory.zeros(grid.times, space.n)
    history, dampings = [], []
    for n in range(1, cfg.max_iterations + 1):
        u = apply_psi(v, field, sigma, f, grid, mesh, partition)
        w = cfg.damping
        v_new = (1.0 - w) * v + w * u
        dist = c_l2_distance(v_new, v, space.mass)
        if w == 1.0 and history and dist > history[-1]:
            w = 0.5
            v_new = 0.5 * v + 0.5 * u
            dist = c_l2_distance(v_new, v, space.mass)
        history.append(dist)
        dampings.append(w)
        v = v_new
        if dist < cfg.tolerance:
            return FixedPointResult(v, n, history, True, dampings)
    return FixedPointResult(v, cfg.max_iterations, history, False, dampings)


def quasilinear_residual(
    u: Trajectory,
    field: CoefficientField,
    sigma: SigmaFunction,
    f,
    grid: TimeGrid,
    mesh: Mesh,
    partition: BoundaryPartition,
) -> float:
    """``max_k`` W^{-1,2} norm of the defect of the discrete quasilinear equation."""
    space = p1_space(mesh, partition)
    f = check_forcing(f, grid, space.n)
    mus = effective_coefficients(u, field, sigma, grid, mesh, partition)
    du = u.derivative()
    defects = np.array([
        space.mass @ du[k - 1] + space.stiffness(mu) @ u.values[k] + space.mass @ u.values[k] - f[k]
        for k, mu in enumerate(mus, start=1)
    ])
    return float(dual_norms(defects, mesh, partition, 2.0).max())


def verify_effective_ellipticity(
    u: Trajectory,
    field: CoefficientField,
    sigma: SigmaFunction,
    grid: TimeGrid,
    mesh: Mesh,
    partition: BoundaryPartition,
) -> EllipticityReport:
    """Check ``sigma(u) mu`` against ``E(lower*c_lower, upper*c_upper)`` on every step and cell."""
    bounds: EllipticityBounds = field.bounds.scaled(sigma.lower, sigma.upper)
    violations, lo, hi = [], np.inf, -np.inf
    mus = effective_coefficients(u, field, sigma, grid, mesh, partition)
    for t, mu in zip(grid.times[1:], mus):
        v, l_obs, u_obs = check_cell_matrices(mu, bounds, float(t))
        violations += v
        lo, hi = min(lo, l_obs), max(hi, u_obs)
    return EllipticityReport(not violations, bounds, len(mus) * mesh.n_cells, lo, hi, violations)
