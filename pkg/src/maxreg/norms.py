"""Discrete Sobolev, dual, Bochner and maximal-regularity norms.

Spatial conventions
-------------------
A *state* is a coefficient vector on the free DOFs.  A *functional* is also a
vector on the free DOFs, acting by ``phi -> f @ phi``; a state ``u`` becomes
the functional ``M @ u`` (L2 pairing).  ``dual_norm(f, qprime)`` is the norm of
``f`` as an element of the dual of W^{1,qprime}, so the W^{-1,q} norm used for
derivatives of W^{1,q}-valued trajectories takes ``qprime = q / (q - 1)``.

Time conventions
----------------
Trajectories hold nodal values on a grid ``0 = t_0 < ... < t_N = T`` with
``u_0 = 0``.  Time integrals use the right-endpoint rule and derivatives are
backward differences, i.e. exactly the quantities the implicit Euler scheme
controls.
"""
from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .fem import BoundaryPartition, Mesh, p1_space

__all__ = [
    "DualNormWarning",
    "DualNormResult",
    "Trajectory",
    "conjugate",
    "w1q_norm",
    "dual_norm",
    "dual_norm_info",
    "bochner_norm",
    "mr_norm",
    "mr_tilde_norm",
    "holder_quotient",
]


class DualNormWarning(RuntimeWarning):
    pass


def conjugate(q: float) -> float:
    """Hoelder conjugate exponent q' with 1/q + 1/q' = 1."""
    _check_exponent(q, "exponent")
    return q / (q - 1.0)


def _check_exponent(q, name="q"):
    if not (1.0 < q < np.inf):
        raise ValueError(f"{name} must lie in (1, inf), got {q}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Nodal values of a discrete solution.

    ``values[k]`` is the state at ``grid[k]``; ``values[0]`` must vanish.
    """

    grid: np.ndarray
    values: np.ndarray
    scheme: str = "implicit_euler"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if grid.ndim != 1 or len(grid) < 2:
            raise ValueError("grid needs at least two nodes")
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must start at 0 and increase strictly")
        if values.shape[0] != len(grid):
            raise ValueError(f"{values.shape[0]} states for {len(grid)} grid nodes")
        if np.any(values[0] != 0.0):
            raise ValueError("trajectory must start from the zero state")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid, n_dofs: int) -> "Trajectory":
        return cls(grid, np.zeros((len(grid), n_dofs)))

    @property
    def n_dofs(self) -> int:
        return self.values.shape[1]

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.grid)

    def derivative(self) -> np.ndarray:
        """Backward differences ``(u_k - u_{k-1}) / dt_k``, shape (N, n_dofs)."""
        return np.diff(self.values, axis=0) / self.steps[:, None]

    def _check_compatible(self, other):
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("trajectories live on different time grids")

    def __add__(self, other):
        self._check_compatible(other)
        return Trajectory(self.grid, self.values + other.values, self.scheme)

    def __sub__(self, other):
        self._check_compatible(other)
        return Trajectory(self.grid, self.values - other.values, self.scheme)

    def __mul__(self, alpha):
        return Trajectory(self.grid, alpha * self.values, self.scheme)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        header = ",".join(["t"] + [f"dof_{i}" for i in range(self.n_dofs)])
        data = np.column_stack([self.grid, self.values])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, scheme: str = "implicit_euler") -> "Trajectory":
        with open(Path(path)) as fh:
            header = fh.readline().strip().split(",")
            if header[0] != "t":
                raise ValueError(f"{path}: first column must be 't'")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1:], scheme)


# -- spatial norms ----------------------------------------------------------------------

_GAUSS3 = (
    np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)]),
    np.array([5.0, 8.0, 5.0]) / 18.0,
)


@functools.lru_cache(maxsize=64)
def _w1q_data(mesh: Mesh, partition: BoundaryPartition):
    """Gradient operator, cell weights and a value-quadrature operator."""
    space = p1_space(mesh, partition)
    D = space.cell_gradient_operator
    grad_w = mesh.volumes
    if mesh.dim == 1:
        s, w = _GAUSS3
        lam = np.column_stack([1 - s, s])
    else:
        lam = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        w = np.full(3, 1.0 / 3.0)
    nc, nloc = space.cell_dofs.shape
    nq = len(w)
    rows = np.broadcast_to((np.arange(nc)[:, None] * nq + np.arange(nq)[None, :])[:, :, None], (nc, nq, nloc))
    cols = np.broadcast_to(space.cell_dofs[:, None, :], (nc, nq, nloc))
    vals = np.broadcast_to(lam[None, :, :], (nc, nq, nloc))
    keep = cols >= 0
    E = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(nc * nq, space.n))
    quad_w = (mesh.volumes[:, None] * w[None, :]).ravel()
    return D, grad_w, E, quad_w


def _power_sum(vec, mesh, partition, q):
    """``N(vec)**q`` plus the cell gradients and quadrature values it was built from."""
    D, gw, E, qw = _w1q_data(mesh, partition)
    vec = np.asarray(vec, dtype=float)
    d = mesh.dim
    g = (D @ vec.T).T.reshape(vec.shape[:-1] + (mesh.n_cells, d))
    gnorm = np.linalg.norm(g, axis=-1)
    e = (E @ vec.T).T
    total = (gnorm**q) @ gw + (np.abs(e) ** q) @ qw
    return total, g, gnorm, e


def w1q_norm(vec, mesh: Mesh, partition: BoundaryPartition, q: float):
    """``(int |grad psi|^q + |psi|^q)^(1/q)`` for a P1 function.

    The gradient term is exact; ``|psi|^q`` uses 3-point Gauss per segment in
    1D and the edge-midpoint rule in 2D (both exact at q = 2).  A 2-D array
    is treated as a stack of vectors.
    """
    _check_exponent(q)
    vec = np.asarray(vec, dtype=float)
    # scale rows to unit max entry so |.|^q neither underflows nor overflows
    scale = np.abs(vec).max(axis=-1, keepdims=True) if vec.size else np.ones(vec.shape[:-1] + (1,))
    safe = np.where(scale > 0, scale, 1.0)
    total, *_ = _power_sum(vec / safe, mesh, partition, q)
    out = np.maximum(total, 0.0) ** (1.0 / q) * safe[..., 0]
    return float(out) if np.ndim(out) == 0 else out


def _norm_and_gradient(vec, mesh, partition, q):
    D, gw, E, qw = _w1q_data(mesh, partition)
    total, g, gnorm, e = _power_sum(vec, mesh, partition, q)
    n = total ** (1.0 / q)
    with np.errstate(divide="ignore", invalid="ignore"):
        gscale = np.where(gnorm > 0, gnorm ** (q - 2), 0.0)
        escale = np.where(e != 0, np.abs(e) ** (q - 2), 0.0)
    grad_pow = q * (D.T @ ((gw * gscale)[:, None] * g).ravel() + E.T @ (qw * escale * e))
    # d N / d vec = d(N^q)/d vec / (q N^(q-1))
    return n, grad_pow / (q * n ** (q - 1))


_LBFGS_MEMORY = 10


@dataclass(frozen=True)
class DualNormResult:
    value: float
    converged: bool
    iterations: int
    maximizer: Optional[np.ndarray] = None


def dual_norm_info(
    f,
    mesh: Mesh,
    partition: BoundaryPartition,
    qprime: float,
    method: str = "auto",
    init=None,
    rtol: float = 1e-8,
    maxiter: int = 500,
) -> DualNormResult:
    """``sup_phi <f, phi> / ||phi||_{W^{1,qprime}}`` with diagnostics.

    ``method="gram"`` (default at qprime = 2) evaluates ``sqrt(f G^{-1} f)``.
    ``method="ascent"`` maximizes the ratio by L-BFGS ascent whose initial
    metric is the W^{1,2} Gram matrix (first direction ``G^{-1} grad``), with
    Armijo backtracking, started at the Riesz representative ``G^{-1} f``
    unless ``init`` is given.  The iteration stops once the squared W^{-1,2} norm
    of the gradient, relative to the current value, falls below ``rtol``;
    a failed line search or hitting ``maxiter`` marks the result as not
    converged.
    """
    _check_exponent(qprime, "qprime")
    f = np.asarray(f, dtype=float)
    space = p1_space(mesh, partition)
    if not np.any(f):
        return DualNormResult(0.0, True, 0, np.zeros_like(f))
    # the norm is homogeneous; work with a unit-size functional
    scale = float(np.abs(f).max())
    if scale != 1.0:
        res = dual_norm_info(f / scale, mesh, partition, qprime, method, init, rtol, maxiter)
        return DualNormResult(res.value * scale, res.converged, res.iterations, res.maximizer)
    if method == "auto":
        method = "gram" if qprime == 2 else "ascent"
    riesz = space.gram_lu.solve(f)
    if method == "gram":
        if qprime != 2:
            raise ValueError("the Gram formula is only valid for qprime = 2")
        return DualNormResult(float(np.sqrt(f @ riesz)), True, 0, riesz)
    if method != "ascent":
        raise ValueError(f"unknown method {method!r}")

    phi = riesz if init is None else np.asarray(init, dtype=float).copy()
    if f @ phi < 0:
        phi = -phi
    phi = phi / w1q_norm(phi, mesh, partition, qprime)
    value = float(f @ phi)

    def ratio_gradient(x, v):
        # at ||x|| = 1 the ratio gradient is f - <f,x> dN
        _, dn = _norm_and_gradient(x, mesh, partition, qprime)
        return f - v * dn

    grad = ratio_gradient(phi, value)
    pairs: list = []
    for it in range(1, maxiter + 1):
        riesz_grad = space.gram_lu.solve(grad)
        stationarity = float(grad @ riesz_grad) / value**2
        if not np.isfinite(stationarity):
            return DualNormResult(value, False, it, phi)
        # squared relative dual norm of the gradient ~ relative error in the value
        if stationarity < rtol:
            return DualNormResult(value, True, it, phi)
        direction = _lbfgs_direction(grad, pairs, space.gram_lu, value)
        slope = float(grad @ direction)
        if not slope > 0:
            pairs.clear()
            direction = riesz_grad / value
            slope = float(grad @ direction)
        step, accepted = 1.0, False
        for _ in range(60):
            trial = phi + step * direction
            t_norm = w1q_norm(trial, mesh, partition, qprime)
            t_value = float(f @ trial) / t_norm
            if t_value >= value + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return DualNormResult(value, False, it, phi)
        new = trial / t_norm
        new_grad = ratio_gradient(new, t_value)
        s_k, y_k = new - phi, grad - new_grad
        if s_k @ y_k > 1e-12 * np.linalg.norm(s_k) * np.linalg.norm(y_k):
            pairs.append((s_k, y_k))
            del pairs[:-_LBFGS_MEMORY]
        phi, value, grad = new, t_value, new_grad
    return DualNormResult(value, False, maxiter, phi)


def _lbfgs_direction(grad, pairs, gram_lu, value):
    """Two-loop L-BFGS ascent direction with initial metric ``G^{-1}``.

    Without curvature pairs the direction is ``G^{-1} grad / value``, which
    lands on the Riesz representative in one step at qprime = 2.
    """
    q = grad.copy()
    alphas = []
    for s, y in reversed(pairs):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((a, rho, s, y))
    if pairs:
        s, y = pairs[-1]
        gamma = (s @ y) / (y @ gram_lu.solve(y))
    else:
        gamma = 1.0 / value
    z = gamma * gram_lu.solve(q)
    for a, rho, s, y in reversed(alphas):
        z += s * (a - rho * (y @ z))
    return z


def dual_norm(f, mesh: Mesh, partition: BoundaryPartition, qprime: float, **kw) -> float:
    """Norm of the functional ``f`` on W^{1,qprime}; warns if the ascent stalls."""
    res = dual_norm_info(f, mesh, partition, qprime, **kw)
    if not res.converged:
        warnings.warn(
            f"dual-norm ascent not converged after {res.iterations} iterations", DualNormWarning, stacklevel=2
        )
    return res.value


def dual_norms(F, mesh, partition, qprime: float) -> np.ndarray:
    """Row-wise dual norms of a stack of functionals."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if qprime == 2:
        scale = np.abs(F).max(axis=1, initial=0.0)[:, None]
        scale[scale == 0] = 1.0
        F = F / scale
        riesz = p1_space(mesh, partition).gram_lu.solve(F.T).T
        return np.sqrt(np.maximum(np.einsum("ij,ij->i", F, riesz), 0.0)) * scale[:, 0]
    return np.array([dual_norm(f, mesh, partition, qprime) for f in F])


# -- time norms ---------------------------------------------------------------------------


def bochner_norm(series, grid, r: float) -> float:
    """``(sum_k dt_k |s_k|^r)^(1/r)`` with the right-endpoint rule; ``series[0]`` is unused."""
    _check_exponent(r, "r")
    s = np.abs(np.asarray(series, dtype=float))
    grid = np.asarray(grid, dtype=float)
    if s.shape != grid.shape:
        raise ValueError(f"series has {s.size} values for {grid.size} grid nodes")
    top = s[1:].max(initial=0.0)
    if top == 0:
        return 0.0
    return float(top * (np.diff(grid) @ (s[1:] / top) ** r) ** (1.0 / r))


def _nodal(series_after_first):
    return np.concatenate([[0.0], series_after_first])


def mr_norm(traj: Trajectory, r: float, q: float, mesh: Mesh, partition: BoundaryPartition) -> float:
    """``||u||_{L^r(W^{1,q})} + ||u'||_{L^r(W^{-1,q})}``."""
    _check_exponent(q)
    M = p1_space(mesh, partition).mass
    state = w1q_norm(traj.values, mesh, partition, q)
    deriv = dual_norms((M @ traj.derivative().T).T, mesh, partition, conjugate(q))
    return bochner_norm(state, traj.grid, r) + bochner_norm(_nodal(deriv), traj.grid, r)


def mr_tilde_norm(
    traj: Trajectory, r: float, mesh: Mesh, partition: BoundaryPartition, reference=None
) -> float:
    """``||(d/dt + K) u||_{L^r(W^{-1,2})}`` for an autonomous reference ``K``.

    ``reference`` defaults to the Gram matrix (the duality map).
    """
    space = p1_space(mesh, partition)
    K = space.gram if reference is None else reference
    F = (space.mass @ traj.derivative().T).T + (K @ traj.values[1:].T).T
    return bochner_norm(_nodal(dual_norms(F, mesh, partition, 2.0)), traj.grid, r)


def holder_quotient(traj: Trajectory, alpha: float, mass) -> float:
    """``max_{k<l} ||u_l - u_k||_M / (t_l - t_k)^alpha`` over all node pairs."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    U = traj.values
    gram = U @ (mass @ U.T)
    diag = np.diag(gram)
    dist2 = np.maximum(diag[:, None] + diag[None, :] - 2.0 * gram, 0.0)
    dt = np.abs(traj.grid[:, None] - traj.grid[None, :])
    iu = np.triu_indices(len(traj.grid), k=1)
    return float(np.max(np.sqrt(dist2[iu]) / dt[iu] ** alpha))
