"""
A quasilinear problem by damped Picard iteration
================================================

Solves ``u' + A(sigma(u) mu_t) u + u = f`` with sigma = 1.5 + 0.5 tanh,
tracking the distance between iterates, the residual of the nonlinear
scheme and the ellipticity of the effective coefficient.
"""

import numpy as np

from maxreg import (
    FixedPointConfig,
    SigmaFunction,
    TimeGrid,
    build_interval_mesh,
    constant_field,
    fixed_point_solve,
    mark_dirichlet,
    nodal_forcing,
    piecewise_constant_in_time,
    quasilinear_residual,
)
from maxreg.quasilinear import verify_effective_ellipticity

mesh = build_interval_mesh(32)
part = mark_dirichlet(mesh, lambda x: True)
grid = TimeGrid.uniform(1.0, 32, [0.5])
field = piecewise_constant_in_time([constant_field([[1.0]]), constant_field([[2.0]])], [0.5], horizon=1.0)
f = nodal_forcing(lambda t, x: 2.0 * np.sin(np.pi * t) * np.sin(np.pi * x[:, 0]), grid, mesh, part)

sigma = SigmaFunction(lambda x: 1.5 + 0.5 * np.tanh(x), 1.0, 2.0)
res = fixed_point_solve(field, sigma, f, grid, mesh, part, FixedPointConfig(tolerance=1e-10))

print(f"converged: {res.converged} after {res.iterations} iterations")
for i, (d, w) in enumerate(zip(res.history, res.dampings), start=1):
    print(f"  iteration {i}: distance {d:.3e} (damping {w})")
print("residual:", quasilinear_residual(res.trajectory, field, sigma, f, grid, mesh, part))

rep = verify_effective_ellipticity(res.trajectory, field, sigma, grid, mesh, part)
print(f"effective coefficient in E({rep.bounds.c_lower}, {rep.bounds.c_upper}):", rep.passed,
      f"observed [{rep.observed_lower:.4f}, {rep.observed_upper:.4f}]")
