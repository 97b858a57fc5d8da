"""
Hoelder continuity in time
==========================

Solutions with forcing in L^r, r > 2, are Hoelder continuous in time with
values in L2 for exponents below 1/2 - 1/r.  The discrete quotient should
settle as the time grid is refined, even for a forcing that blows up at
t = 0 or switches off abruptly.
"""

import numpy as np

from maxreg import (
    TimeGrid,
    build_interval_mesh,
    constant_field,
    holder_quotient,
    mark_dirichlet,
    nodal_forcing,
    solve_nonautonomous,
)
from maxreg.fem import p1_space

mesh = build_interval_mesh(32)
part = mark_dirichlet(mesh, lambda x: True)
field = constant_field([[1.0]])
alpha = 0.2
mass = p1_space(mesh, part).mass

profiles = {
    "power t^-0.2": lambda t: t ** -0.2,
    "step": lambda t: float(t <= 0.5),
}

for name, g in profiles.items():
    values = []
    for N in (64, 128, 256):
        grid = TimeGrid.uniform(1.0, N)
        f = nodal_forcing(lambda t, x: g(t) * np.sin(np.pi * x[:, 0]), grid, mesh, part)
        u = solve_nonautonomous(field, f, grid, mesh, part)
        values.append(holder_quotient(u, alpha, mass))
    changes = np.abs(np.diff(values)) / np.array(values[:-1])
    print(f"{name:>14}: quotients {np.round(values, 5)}, relative changes {np.round(changes, 4)}")
