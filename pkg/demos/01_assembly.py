"""
P1 assembly, boundary parts and the duality map
===============================================

Builds a small mesh with a mixed Dirichlet/Neumann boundary, assembles
stiffness, mass and Gram matrices, solves an elliptic problem and measures
the norm of the stiffness operator as a map from W^{1,2} into its dual.
"""

import numpy as np

from maxreg import (
    assemble_mass,
    assemble_stiffness,
    build_rect_mesh,
    elliptic_solve,
    gram_W12,
    mark_dirichlet,
    operator_norm_W12,
)

# %%
# A 6x4 triangulation of (0, 1.5) x (0, 1); the Dirichlet part is the left edge,
# the rest of the boundary carries natural (Neumann) conditions.
mesh = build_rect_mesh(6, 4, 1.5, 1.0)
part = mark_dirichlet(mesh, lambda x: x[0] <= 0.0)
print(f"{mesh.n_cells} cells, {mesh.n_vertices} vertices, {part.n_free} free DOFs")

# %%
# An anisotropic, non-symmetric coefficient.  Its symmetric part has smallest
# eigenvalue 1, the matrix itself has spectral norm about 3.06.
mu = np.array([[3.0, 0.5], [-0.5, 1.0]])
K = assemble_stiffness(mesh, part, mu)
M = assemble_mass(mesh, part)
G = gram_W12(mesh, part)
print("stiffness symmetric?", abs(K - K.T).max() < 1e-12)
print("mass of the constant function:", np.ones(part.n_free) @ M @ np.ones(part.n_free))

# %%
# Solve (A + I) psi = M 1 and check the residual.
rhs = M @ np.ones(part.n_free)
psi = elliptic_solve(K + M, rhs)
print("residual", np.linalg.norm((K + M) @ psi - rhs))

# %%
# ||K||_{W^{1,2} -> W^{-1,2}} never exceeds the spectral norm of the
# coefficient; the Gram matrix also carries the L2 part, so it can be smaller.
norm = operator_norm_W12(K, G)
print(f"operator norm {norm:.6f} <= |mu|_2 = {np.linalg.norm(mu, 2):.6f}")
