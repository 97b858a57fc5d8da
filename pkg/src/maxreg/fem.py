"""P1 finite elements on simplicial meshes with mixed boundary conditions.

Dirichlet conditions are imposed by eliminating the marked vertices, so every
matrix returned here lives on the free degrees of freedom only.  The pair
``(mesh, partition)`` therefore fixes the discrete space; heavier derived data
(cell gradients, sparsity pattern, the Gram matrix and its factorization) is
cached per pair in :func:`p1_space`.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "AssemblyError",
    "LinearSolveError",
    "Mesh",
    "BoundaryPartition",
    "P1Space",
    "p1_space",
    "build_interval_mesh",
    "build_rect_mesh",
    "mark_dirichlet",
    "assemble_stiffness",
    "assemble_mass",
    "gram_W12",
    "elliptic_solve",
    "operator_norm_W12",
    "is_symmetric",
    "write_mesh",
    "read_mesh",
    "write_matrix_coo",
    "read_matrix_coo",
]


_DENSE_EIG_LIMIT = 400


class AssemblyError(ValueError):
    """Raised for degenerate cells or invalid coefficient data."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class LinearSolveError(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh in one or two space dimensions.

    Parameters
    ----------
    vertices : ndarray, shape (n_vertices, d)
    cells : ndarray of int, shape (n_cells, d + 1)
        Segments for ``d == 1``, triangles for ``d == 2``.

    Boundary facets are derived from the connectivity: a facet is on the
    boundary iff it belongs to exactly one cell.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: tuple = field(init=False)

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        cells = np.array(self.cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (1, 2):
            raise ValueError("vertices must have shape (n, 1) or (n, 2)")
        d = vertices.shape[1]
        if cells.ndim != 2 or cells.shape[1] != d + 1:
            raise ValueError(f"cells must have shape (n_cells, {d + 1})")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise ValueError("cell vertex index out of range")
        vertices.flags.writeable = False
        cells.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "boundary_facets", _boundary_facets(cells))
        self._geometry  # rejects degenerate cells up front

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @functools.cached_property
    def boundary_vertices(self) -> frozenset:
        return frozenset(int(v) for facet in self.boundary_facets for v in facet)

    @functools.cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @functools.cached_property
    def _geometry(self):
        return _cell_geometry(self.vertices, self.cells)

    @property
    def volumes(self) -> np.ndarray:
        """Cell lengths (1D) or areas (2D)."""
        return self._geometry[0]

    @property
    def gradients(self) -> np.ndarray:
        """Hat-function gradients, shape (n_cells, d + 1, d); constant per cell."""
        return self._geometry[1]

    def measure(self) -> float:
        return float(self.volumes.sum())

    def sample_points(self, refine: int = 1):
        """Sub-cell sample points and weights.

        Each cell is split uniformly into ``refine`` segments (1D) or
        ``refine**2`` triangles (2D); the barycenters of the pieces are
        returned with their measures.  ``refine == 1`` gives the cell
        barycenters.

        Returns
        -------
        points : ndarray, shape (n_cells, n_sub, d)
        weights : ndarray, shape (n_cells, n_sub)
        """
        lam, w = _reference_subcell_barycenters(self.dim, refine)
        corners = self.vertices[self.cells]  # (nc, d+1, d)
        points = np.einsum("sk,ckd->csd", lam, corners)
        weights = self.volumes[:, None] * w[None, :]
        return points, weights


def _boundary_facets(cells):
    nv = cells.shape[1]
    counts = {}
    for cell in cells:
        for skip in range(nv):
            facet = tuple(sorted(int(v) for j, v in enumerate(cell) if j != skip))
            counts[facet] = counts.get(facet, 0) + 1
    return tuple(sorted(f for f, c in counts.items() if c == 1))


def _cell_geometry(vertices, cells):
    d = vertices.shape[1]
    corners = vertices[cells]
    extent = max(float(np.ptp(vertices, axis=0).max()), 1.0) if len(vertices) else 1.0
    if d == 1:
        h = corners[:, 1, 0] - corners[:, 0, 0]
        vol = np.abs(h)
        bad = np.flatnonzero(vol <= 1e-14 * extent)
        if bad.size:
            raise AssemblyError(f"degenerate cell {bad[0]} (zero length)", cell=int(bad[0]))
        grads = np.stack([-1.0 / h, 1.0 / h], axis=1)[:, :, None]
        return vol, grads
    edges = corners[:, 1:, :] - corners[:, :1, :]  # rows e1, e2
    det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
    vol = 0.5 * np.abs(det)
    bad = np.flatnonzero(vol <= 1e-14 * extent**2)
    if bad.size:
        raise AssemblyError(f"degenerate cell {bad[0]} (zero area)", cell=int(bad[0]))
    # inverse of the Jacobian with columns e1, e2: rows are grad(lambda_1), grad(lambda_2)
    inv = np.empty_like(edges)
    inv[:, 0, 0] = edges[:, 1, 1] / det
    inv[:, 0, 1] = -edges[:, 1, 0] / det
    inv[:, 1, 0] = -edges[:, 0, 1] / det
    inv[:, 1, 1] = edges[:, 0, 0] / det
    grads = np.concatenate([-(inv[:, :1] + inv[:, 1:]), inv], axis=1)
    return vol, grads


@functools.lru_cache(maxsize=None)
def _reference_subcell_barycenters(d, refine):
    if refine < 1:
        raise ValueError("refine must be >= 1")
    n = refine
    if d == 1:
        s = (np.arange(n) + 0.5) / n
        return np.stack([1 - s, s], axis=1), np.full(n, 1.0 / n)
    pts = []
    for i in range(n):
        for j in range(n - i):
            pts.append(((i + 1 / 3) / n, (j + 1 / 3) / n))  # upright pieces
            if i + j < n - 1:
                pts.append(((i + 2 / 3) / n, (j + 2 / 3) / n))  # inverted pieces
    xy = np.array(pts)
    lam = np.column_stack([1 - xy.sum(axis=1), xy])
    return lam, np.full(len(xy), 1.0 / n**2)


def build_interval_mesh(n_cells: int, length: float = 1.0) -> Mesh:
    if int(n_cells) != n_cells or n_cells < 1:
        raise ValueError("n_cells must be a positive integer")
    if not length > 0:
        raise ValueError("length must be positive")
    x = np.linspace(0.0, length, int(n_cells) + 1)
    cells = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    return Mesh(x[:, None], cells)


def build_rect_mesh(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> Mesh:
    """Structured triangulation of (0, lx) x (0, ly); every rectangle is cut
    along its lower-left to upper-right diagonal."""
    for name, n in (("nx", nx), ("ny", ny)):
        if int(n) != n or n < 1:
            raise ValueError(f"{name} must be a positive integer")
    if not (lx > 0 and ly > 0):
        raise ValueError("lx and ly must be positive")
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    cells = []
    for j in range(ny):
        for i in range(nx):
            v0 = j * (nx + 1) + i
            v1, v2, v3 = v0 + 1, v0 + nx + 2, v0 + nx + 1
            cells.append((v0, v1, v2))
            cells.append((v0, v2, v3))
    return Mesh(vertices, np.array(cells))


@dataclass(frozen=True, eq=False)
class BoundaryPartition:
    """Dirichlet vertices and the ordered list of remaining (free) vertices."""

    mesh: Mesh
    dirichlet_vertices: frozenset

    def __post_init__(self):
        dv = frozenset(int(v) for v in self.dirichlet_vertices)
        if not dv <= self.mesh.boundary_vertices:
            raise ValueError("Dirichlet vertices must lie on the boundary")
        object.__setattr__(self, "dirichlet_vertices", dv)

    @functools.cached_property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.mesh.n_vertices, dtype=bool)
        mask[list(self.dirichlet_vertices)] = False
        free = np.flatnonzero(mask)
        free.flags.writeable = False
        return free

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    def extend(self, vec) -> np.ndarray:
        """Free-DOF vector -> nodal values on all vertices (zero on the Dirichlet part)."""
        vec = np.asarray(vec, dtype=float)
        full = np.zeros(vec.shape[:-1] + (self.mesh.n_vertices,))
        full[..., self.free_dofs] = vec
        return full


def mark_dirichlet(mesh: Mesh, selector: Callable[[np.ndarray], bool]) -> BoundaryPartition:
    """Mark every boundary vertex ``x`` with ``selector(x)`` true as Dirichlet."""
    marked = {v for v in mesh.boundary_vertices if selector(mesh.vertices[v])}
    return BoundaryPartition(mesh, frozenset(marked))


class P1Space:
    """Cached discrete data for one ``(mesh, partition)`` pair."""

    def __init__(self, mesh: Mesh, partition: BoundaryPartition):
        if partition.mesh is not mesh:
            raise ValueError("partition was built for a different mesh")
        self.mesh = mesh
        self.partition = partition
        self.n = partition.n_free
        local = -np.ones(mesh.n_vertices, dtype=np.int64)
        local[partition.free_dofs] = np.arange(self.n)
        dofs = local[mesh.cells]  # (nc, d+1)
        nloc = dofs.shape[1]
        rows = np.repeat(dofs[:, :, None], nloc, axis=2)
        cols = np.repeat(dofs[:, None, :], nloc, axis=1)
        self._keep = (rows >= 0) & (cols >= 0)
        self._rows = rows[self._keep]
        self._cols = cols[self._keep]
        self.cell_dofs = dofs

    def assemble_local(self, local: np.ndarray) -> sp.csr_matrix:
        """Scatter per-cell matrices of shape (n_cells, d+1, d+1)."""
        A = sp.coo_matrix((local[self._keep], (self._rows, self._cols)), shape=(self.n, self.n))
        return A.tocsr()

    def stiffness(self, mu: np.ndarray) -> sp.csr_matrix:
        g = self.mesh.gradients
        local = np.einsum("c,cid,cde,cje->cij", self.mesh.volumes, g, mu, g)
        return self.assemble_local(local)

    @functools.cached_property
    def mass(self) -> sp.csr_matrix:
        d = self.mesh.dim
        ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
        return self.assemble_local(self.mesh.volumes[:, None, None] * ref[None])

    @functools.cached_property
    def load_mass(self) -> sp.csr_matrix:
        """Mass matrix with free-DOF rows and all-vertex columns.

        Maps nodal values of an L2 function on every vertex to its load vector.
        """
        d = self.mesh.dim
        ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
        local = self.mesh.volumes[:, None, None] * ref[None]
        nloc = d + 1
        rows = np.repeat(self.cell_dofs[:, :, None], nloc, axis=2)
        cols = np.repeat(np.asarray(self.mesh.cells)[:, None, :], nloc, axis=1)
        keep = rows >= 0
        A = sp.coo_matrix((local[keep], (rows[keep], cols[keep])), shape=(self.n, self.mesh.n_vertices))
        return A.tocsr()

    @functools.cached_property
    def stiffness_identity(self) -> sp.csr_matrix:
        d = self.mesh.dim
        return self.stiffness(np.broadcast_to(np.eye(d), (self.mesh.n_cells, d, d)))

    @functools.cached_property
    def gram(self) -> sp.csr_matrix:
        return (self.stiffness_identity + self.mass).tocsr()

    @functools.cached_property
    def gram_lu(self):
        return spla.splu(self.gram.tocsc())

    @functools.cached_property
    def mass_lu(self):
        return spla.splu(self.mass.tocsc())

    @functools.cached_property
    def cell_gradient_operator(self) -> sp.csr_matrix:
        """Sparse map free-DOF vector -> stacked cell gradients (n_cells*d,)."""
        nc, nloc, d = self.mesh.gradients.shape
        rows = (np.arange(nc)[:, None, None] * d + np.arange(d)[None, None, :])
        rows = np.broadcast_to(rows, (nc, nloc, d))
        cols = np.broadcast_to(self.cell_dofs[:, :, None], (nc, nloc, d))
        vals = self.mesh.gradients
        keep = cols >= 0
        return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(nc * d, self.n))

    @functools.cached_property
    def barycenter_operator(self) -> sp.csr_matrix:
        """Free-DOF vector -> values of the P1 interpolant at cell barycenters."""
        nc, nloc = self.cell_dofs.shape
        rows = np.broadcast_to(np.arange(nc)[:, None], (nc, nloc))
        keep = self.cell_dofs >= 0
        return sp.csr_matrix(
            (np.full(keep.sum(), 1.0 / nloc), (rows[keep], self.cell_dofs[keep])),
            shape=(nc, self.n),
        )


@functools.lru_cache(maxsize=64)
def p1_space(mesh: Mesh, partition: BoundaryPartition) -> P1Space:
    return P1Space(mesh, partition)


def coefficient_array(mesh: Mesh, coeff) -> np.ndarray:
    """Normalize a coefficient description to per-cell matrices (n_cells, d, d).

    Accepts a scalar, a single d x d matrix, a per-cell array, or a callable
    ``x -> matrix`` that is sampled at the cell barycenters.
    """
    d, nc = mesh.dim, mesh.n_cells
    if callable(coeff):
        mu = np.array([np.asarray(coeff(x), dtype=float).reshape(d, d) for x in mesh.barycenters])
    else:
        mu = np.asarray(coeff, dtype=float)
        if mu.ndim == 0:
            mu = mu * np.eye(d)
        if mu.shape == (d, d):
            mu = np.broadcast_to(mu, (nc, d, d))
    if mu.shape != (nc, d, d):
        raise AssemblyError(f"coefficient has shape {mu.shape}, expected {(nc, d, d)}")
    bad = np.flatnonzero(~np.isfinite(mu).all(axis=(1, 2)))
    if bad.size:
        raise AssemblyError(f"non-finite coefficient on cell {bad[0]}", cell=int(bad[0]))
    return mu


def assemble_stiffness(mesh: Mesh, partition: BoundaryPartition, coeff) -> sp.csr_matrix:
    """Stiffness matrix ``K[i, j] = sum_c |c| (mu_c grad phi_j) . grad phi_i`` on free DOFs."""
    return p1_space(mesh, partition).stiffness(coefficient_array(mesh, coeff))


def assemble_mass(mesh: Mesh, partition: BoundaryPartition) -> sp.csr_matrix:
    return p1_space(mesh, partition).mass


def gram_W12(mesh: Mesh, partition: BoundaryPartition) -> sp.csr_matrix:
    """Gram matrix of the W^{1,2} inner product; the discrete duality map."""
    return p1_space(mesh, partition).gram


def is_symmetric(A, tol: float = 1e-12) -> bool:
    A = sp.csr_matrix(A)
    diff = A - A.T
    return diff.nnz == 0 or float(np.abs(diff.data).max()) < tol


def elliptic_solve(A, rhs) -> np.ndarray:
    """Solve ``A psi = rhs`` by sparse LU, falling back to CG (tol 1e-12)."""
    A = sp.csc_matrix(A)
    rhs = np.asarray(rhs, dtype=float)
    if not np.any(rhs):
        return np.zeros_like(rhs)
    scale = max(float(np.linalg.norm(rhs)), np.finfo(float).tiny)
    residual = np.inf
    try:
        psi = spla.splu(A).solve(rhs)
        residual = float(np.linalg.norm(A @ psi - rhs)) / scale
        if np.isfinite(residual) and residual < 1e-8:
            return psi
    except RuntimeError:
        pass
    psi, info = spla.cg(A, rhs, rtol=1e-12, atol=0.0, maxiter=10 * A.shape[0] + 100)
    residual = float(np.linalg.norm(A @ psi - rhs)) / scale
    if info != 0 or not np.isfinite(residual) or residual > 1e-8:
        raise LinearSolveError("elliptic solve failed", residual)
    return psi


def operator_norm_W12(K, G, tol: float = 1e-8, maxiter: int = 10000) -> float:
    """Norm of ``K`` as a map (R^n, G-norm) -> (R^n, G^{-1}-norm).

    Square root of the top eigenvalue of ``K^T G^{-1} K x = lam G x``.  Small
    systems use a dense SVD after a Cholesky change of basis; larger ones use Lanczos
    (ARPACK) in the G inner product with relative tolerance ``tol``.  Plain
    power iteration is not used because the top eigenvalues cluster
    (e.g. ``K = 3 K_I + M`` on an 8x8 mesh has a gap ratio of 1 - 5e-6).
    """
    K = sp.csr_matrix(K)
    G = sp.csc_matrix(G)
    n = K.shape[0]
    if n == 0 or K.nnz == 0:
        return 0.0
    if n <= _DENSE_EIG_LIMIT:
        # ||L^{-1} K L^{-T}||_2 with G = L L^T
        L = sla.cholesky(G.toarray(), lower=True)
        C = sla.solve_triangular(L, sla.solve_triangular(L, K.toarray(), lower=True).T, lower=True).T
        return float(np.linalg.norm(C, 2))
    lu = spla.splu(G)
    B = spla.LinearOperator((n, n), matvec=lambda x: K.T @ lu.solve(K @ x), dtype=float)
    Ginv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    v0 = 1.0 + 0.5 * np.random.default_rng(0).standard_normal(n)
    try:
        lam = spla.eigsh(B, k=1, M=G, Minv=Ginv, which="LA", tol=tol, maxiter=maxiter, v0=v0,
                         return_eigenvectors=False)[0]
    except spla.ArpackNoConvergence as exc:
        raise LinearSolveError(f"Lanczos did not converge in {maxiter} iterations") from exc
    return float(np.sqrt(max(lam, 0.0)))


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text mesh: ``d n_vertices n_cells``, coordinate lines, cell lines."""
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_cells}"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in c) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    d, nv, nc = (int(s) for s in rows[0])
    if len(rows) != 1 + nv + nc:
        raise ValueError(f"{path}: expected {1 + nv + nc} lines, found {len(rows)}")
    vertices = np.array([[float(s) for s in r] for r in rows[1 : 1 + nv]]).reshape(nv, d)
    cells = np.array([[int(s) for s in r] for r in rows[1 + nv :]], dtype=np.int64)
    return Mesh(vertices, cells.reshape(nc, d + 1))


def write_matrix_coo(A, path) -> None:
    A = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"# shape {A.shape[0]} {A.shape[1]}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


def read_matrix_coo(path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().split()
        shape = (int(header[2]), int(header[3]))
        rows = [ln.split() for ln in fh if ln.strip()]
    if not rows:
        return sp.csr_matrix(shape)
    data = np.array(rows, dtype=float)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape)

