"""Implicit Euler for ``u' + (A(t) + shift*I) u = f``, ``u(0) = 0``, and its diagnostics.

One step of the scheme reads::

    (M + dt_k (K_k + shift M)) u_k = M u_{k-1} + dt_k f_k

with ``K_k`` the stiffness matrix of the coefficient on the step
``(t_{k-1}, t_k]`` (sampled at ``t_k``, left limit at jump times) and
``f_k = f(t_k)`` a nodal functional.  Forcing is stored as an array of shape
``(N + 1, n_dofs)`` aligned with the grid; row 0 is never used.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import CoefficientField, EllipticityBounds
from .fem import BoundaryPartition, LinearSolveError, Mesh, p1_space
from .norms import (
    DualNormWarning,
    Trajectory,
    bochner_norm,
    conjugate,
    dual_norms,
    mr_norm,
    mr_tilde_norm,
)

__all__ = [
    "TimeGrid",
    "ParabolicProblem",
    "AprioriReport",
    "MREstimate",
    "MRRatioReport",
    "form_bounds",
    "nodal_forcing",
    "check_forcing",
    "solve_nonautonomous",
    "energy_residual",
    "apriori_check",
    "forcing_norm",
    "probe_forcings",
    "estimate_mr_constant",
    "mr_probe_ratio",
    "mr_ratio_report",
    "reference_problem",
]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2 or t[0] != 0.0:
            raise ValueError("time grid must start at 0 and have at least two nodes")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, horizon: float, n_steps: int, extra_nodes: Sequence[float] = ()) -> "TimeGrid":
        """``n_steps`` equal steps on ``[0, horizon]`` merged with ``extra_nodes``.

        Extra nodes closer than ``1e-12 * horizon`` to an existing node snap onto it.
        """
        if not horizon > 0:
            raise ValueError("horizon T must be positive")
        if n_steps < 1:
            raise ValueError("need at least one time step")
        t = list(np.linspace(0.0, horizon, int(n_steps) + 1))
        for x in extra_nodes:
            if not 0 < x < horizon:
                raise ValueError(f"extra node {x} outside (0, T)")
            if min(abs(x - s) for s in t) > 1e-12 * horizon:
                t.append(float(x))
        return cls(np.array(sorted(t)))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def __len__(self):
        return len(self.times)

    def contains(self, t: float, tol: float = 1e-12) -> bool:
        return bool(np.min(np.abs(self.times - t)) <= tol * self.horizon)

    def refined(self) -> "TimeGrid":
        """Every step split in half."""
        mids = 0.5 * (self.times[1:] + self.times[:-1])
        return TimeGrid(np.sort(np.concatenate([self.times, mids])))


def form_bounds(bounds: EllipticityBounds, shift: float = 1.0) -> EllipticityBounds:
    """Coercivity/boundedness constants of ``int mu grad.grad + shift * (.,.)_L2`` in W^{1,2}."""
    if not shift > 0:
        raise ValueError("form constants in the W^{1,2} norm need a positive shift")
    return EllipticityBounds(min(bounds.c_lower, shift), max(bounds.c_upper, shift))


def check_forcing(f, grid: TimeGrid, n_dofs: int) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (len(grid), n_dofs):
        raise ValueError(f"forcing has shape {f.shape}, expected {(len(grid), n_dofs)}")
    return f


def nodal_forcing(func, grid: TimeGrid, mesh: Mesh, partition: BoundaryPartition) -> np.ndarray:
    """Load vectors of an L2 source ``func(t, vertices) -> values`` at every node.

    The source is replaced by its P1 interpolant and integrated exactly.
    """
    space = p1_space(mesh, partition)
    out = np.zeros((len(grid), space.n))
    for k, t in enumerate(grid.times):
        if k == 0:
            continue
        vals = np.asarray(func(t, mesh.vertices), dtype=float).reshape(mesh.n_vertices)
        out[k] = space.load_mass @ vals
    return out


class ParabolicProblem:
    """Discretized linear evolution problem on a fixed mesh and time grid.

    Give either a coefficient ``field`` (operator ``A(mu_t) + shift * I``), a
    fixed sparse ``operator`` matrix for an autonomous problem (e.g. the Gram
    matrix for the duality map), or a list with one full operator per step.
    Step matrices are factorized once and reused whenever steps share
    operator and step size.
    """

    def __init__(
        self,
        mesh: Mesh,
        partition: BoundaryPartition,
        grid: TimeGrid,
        field: Optional[CoefficientField] = None,
        shift: float = 1.0,
        operator=None,
    ):
        if (field is None) == (operator is None):
            raise ValueError("give exactly one of field or operator")
        if shift < 0:
            raise ValueError("shift must be nonnegative")
        self.mesh, self.partition, self.grid = mesh, partition, grid
        self.field, self.shift = field, float(shift)
        self.space = p1_space(mesh, partition)
        self.M = self.space.mass
        if field is not None:
            if field.dim != mesh.dim:
                raise ValueError("coefficient and mesh dimensions differ")
            for jt in field.jump_times:
                if jt < grid.horizon and not grid.contains(jt):
                    raise ValueError(f"jump time {jt} missing from the time grid")
            self.operators = self._field_operators()
        elif isinstance(operator, (list, tuple)):
            if len(operator) != grid.n_steps:
                raise ValueError(f"{len(operator)} step operators for {grid.n_steps} steps")
            self.operators = list(operator)
        else:
            A = sp.csr_matrix(operator)
            self.operators = [A] * grid.n_steps
        self._factors = None

    def _field_operators(self):
        ops, prev_mu, prev_A = [], None, None
        for t in self.grid.times[1:]:
            mu = self.field.cell_matrices(t, self.mesh, side="left")
            if prev_mu is not None and np.array_equal(mu, prev_mu):
                ops.append(prev_A)
                continue
            A = (self.space.stiffness(mu) + self.shift * self.M).tocsr()
            ops.append(A)
            prev_mu, prev_A = mu, A
        return ops

    @property
    def n_dofs(self) -> int:
        return self.space.n

    @property
    def factors(self):
        if self._factors is None:
            factors, cache = [], {}
            T = self.grid.horizon
            for A, dt in zip(self.operators, self.grid.steps):
                # linspace steps differ in the last bits; share factors across them
                key = (id(A), round(float(dt) / T, 13))
                if key not in cache:
                    S = (self.M + dt * A).tocsc()
                    try:
                        cache[key] = spla.splu(S)
                    except RuntimeError as exc:
                        raise LinearSolveError(f"singular step matrix at dt={dt}") from exc
                factors.append(cache[key])
            self._factors = factors
        return self._factors

    def solve(self, f) -> Trajectory:
        f = check_forcing(f, self.grid, self.n_dofs)
        U = np.zeros((len(self.grid), self.n_dofs))
        for k, (lu, dt) in enumerate(zip(self.factors, self.grid.steps), start=1):
            if not (np.any(U[k - 1]) or np.any(f[k])):
                continue
            U[k] = lu.solve(self.M @ U[k - 1] + dt * f[k])
            if not np.all(np.isfinite(U[k])):
                raise LinearSolveError(f"non-finite solution at step {k}")
        return Trajectory(self.grid.times, U)

    def energy_residual(self, traj: Trajectory, f) -> np.ndarray:
        f = check_forcing(f, self.grid, self.n_dofs)
        if not np.array_equal(traj.grid, self.grid.times):
            raise ValueError("trajectory was computed on a different grid")
        U, dt = traj.values, self.grid.steps
        form = np.array([U[k] @ (A @ U[k]) for k, A in enumerate(self.operators, start=1)])
        work = np.einsum("kn,kn->k", f[1:], U[1:])
        kinetic = 0.5 * np.einsum("kn,kn->k", U, (self.M @ U.T).T)
        return kinetic + np.concatenate([[0.0], np.cumsum(dt * (form - work))])


def solve_nonautonomous(
    field: CoefficientField,
    f,
    grid: TimeGrid,
    mesh: Mesh,
    partition: BoundaryPartition,
    shift: float = 1.0,
) -> Trajectory:
    return ParabolicProblem(mesh, partition, grid, field, shift).solve(f)


def energy_residual(traj, field, f, grid, mesh, partition, shift: float = 1.0) -> np.ndarray:
    """Discrete energy balance ``1/2|u_k|_M^2 + sum dt (A_j u_j, u_j) - sum dt <f_j, u_j>``.

    For implicit Euler this equals ``-1/2 sum_{j<=k} |u_j - u_{j-1}|_M^2``.
    """
    return ParabolicProblem(mesh, partition, grid, field, shift).energy_residual(traj, f)


def forcing_norm(f, grid: TimeGrid, mesh, partition, r: float, q: float = 2.0) -> float:
    """``||f||_{L^r(J; W^{-1,q})}`` of a nodal forcing."""
    f = np.asarray(f, dtype=float)
    nodal = np.concatenate([[0.0], dual_norms(f[1:], mesh, partition, conjugate(q))])
    return bochner_norm(nodal, grid.times, r)


def _ratio(num, den):
    if den == 0:
        if num == 0:
            return 0.0
        return np.inf
    return num / den


@dataclass
class AprioriReport:
    norms: dict
    constants: dict
    ratios: dict
    tolerance: float
    passed: bool

    def as_dict(self):
        return {"norms": self.norms, "bounds": self.constants, "ratios": self.ratios,
                "tolerance": self.tolerance, "pass": self.passed}


def apriori_check(
    traj: Trajectory,
    f,
    grid: TimeGrid,
    mesh: Mesh,
    partition: BoundaryPartition,
    bounds: EllipticityBounds,
    shift: float = 1.0,
    tolerance: float = 5e-2,
) -> AprioriReport:
    """Compare the discrete solution with the three L2 a priori bounds.

    With form constants ``(c, C) = form_bounds(bounds, shift)`` the checked
    inequalities are ``||u||_{L2(V)} <= ||f|| / c``,
    ``||u'||_{L2(V*)} <= (1 + C/c) ||f||`` and
    ``||u||_MR <= (1 + c + C)/c ||f||``.
    """
    fb = form_bounds(bounds, shift)
    c, C = fb.c_lower, fb.c_upper
    space = p1_space(mesh, partition)
    f = check_forcing(f, grid, space.n)
    state = np.sqrt(np.maximum(np.einsum("kn,kn->k", traj.values, (space.gram @ traj.values.T).T), 0))
    deriv = dual_norms((space.mass @ traj.derivative().T).T, mesh, partition, 2.0)
    u_l2v = bochner_norm(state, grid.times, 2.0)
    du_l2v = bochner_norm(np.concatenate([[0.0], deriv]), grid.times, 2.0)
    f_l2v = forcing_norm(f, grid, mesh, partition, 2.0)
    constants = {"c_lower": c, "c_upper": C, "state": 1.0 / c, "derivative": 1.0 + C / c,
                 "mr": (1.0 + c + C) / c}
    ratios = {
        "state": _ratio(u_l2v, constants["state"] * f_l2v),
        "derivative": _ratio(du_l2v, constants["derivative"] * f_l2v),
        "mr": _ratio(u_l2v + du_l2v, constants["mr"] * f_l2v),
    }
    norms = {"u_L2V": u_l2v, "du_L2Vstar": du_l2v, "mr": u_l2v + du_l2v, "f_L2Vstar": f_l2v}
    passed = all(v <= 1.0 + tolerance for v in ratios.values())
    return AprioriReport(norms, constants, ratios, tolerance, passed)


def _lowest_modes(problem: ParabolicProblem, count: int) -> np.ndarray:
    A = problem.operators[0]
    n = problem.n_dofs
    count = min(count, n)
    if n <= 1500:
        _, vecs = sla.eigh(A.toarray(), problem.M.toarray(), subset_by_index=(0, count - 1))
    else:
        _, vecs = spla.eigsh(A, k=count, M=problem.M, sigma=0.0, which="LM")
    vecs = vecs * np.sign(vecs.sum(axis=0) + (vecs.sum(axis=0) == 0))
    return vecs.T


def probe_forcings(problem: ParabolicProblem, count: int, seed: int = 0):
    """First ``count`` members of the deterministic-plus-seeded probe family.

    The family starts with the three lowest generalized eigenmodes of the
    first step operator (as functionals ``M phi``, constant in time) and
    continues with seeded random functionals ``M z`` switched on over a random
    window of grid steps.  Any prefix of the family is independent of
    ``count``, so a larger count only adds probes.
    """
    grid = problem.grid
    N, n = grid.n_steps, problem.n_dofs
    modes = _lowest_modes(problem, 3)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        F = np.zeros((N + 1, n))
        if i < len(modes):
            F[1:] = problem.M @ modes[i]
            label = f"mode{i}"
        else:
            a, b = np.sort(rng.choice(N + 1, size=2, replace=False))
            F[a + 1 : b + 1] = problem.M @ rng.standard_normal(n)
            label = f"random[{grid.times[a]:.4g},{grid.times[b]:.4g}]"
        out.append((label, F))
    return out


@dataclass
class MREstimate:
    value: float
    r: float
    ratios: list
    labels: list
    seed: int

    @property
    def probes(self) -> int:
        return len(self.ratios)


def mr_probe_ratio(problem: ParabolicProblem, F, r: float, q: float = 2.0) -> float:
    """``||u||_MR / ||F||_{L^r(W^{-1,q})}`` for the solution ``u`` of the problem."""
    u = problem.solve(F)
    return _ratio(mr_norm(u, r, q, problem.mesh, problem.partition),
                  forcing_norm(F, problem.grid, problem.mesh, problem.partition, r, q))


def estimate_mr_constant(problem: ParabolicProblem, r: float, probes: int = 16, seed: int = 0) -> MREstimate:
    """Lower bound for the discrete maximal-regularity constant in L^r(J; W^{-1,2}).

    Maximum over the probe family of ``||u||_MR / ||f||``; nondecreasing in
    ``probes`` for a fixed seed.
    """
    if probes < 1:
        raise ValueError("need at least one probe")
    labels, ratios = [], []
    for label, F in probe_forcings(problem, probes, seed):
        labels.append(label)
        ratios.append(mr_probe_ratio(problem, F, r))
    return MREstimate(float(max(ratios)), r, ratios, labels, seed)


def reference_problem(mesh, partition, grid) -> ParabolicProblem:
    """Autonomous problem for the duality map (Gram matrix) as the operator."""
    return ParabolicProblem(mesh, partition, grid, operator=p1_space(mesh, partition).gram)


@dataclass
class MRRatioReport:
    r: float
    q: float
    tilde_ratio: float
    mr_ratio: float
    bound: float
    window: Optional[tuple]
    in_window: bool
    tolerance: float
    passed: bool
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {
            "r": self.r, "q": self.q,
            "ratios": {"tilde": self.tilde_ratio, "mr": self.mr_ratio},
            "bounds": {"tilde": self.bound},
            "window": list(self.window) if self.window is not None else None,
            "in_window": self.in_window, "tolerance": self.tolerance,
            "pass": self.passed, "warnings": list(self.warnings),
        }


def mr_ratio_report(
    field: CoefficientField,
    r: float,
    q: float,
    grid: TimeGrid,
    mesh: Mesh,
    partition: BoundaryPartition,
    probes: int = 16,
    seed: int = 0,
    shift: float = 1.0,
    window=None,
    tolerance: float = 0.1,
) -> MRRatioReport:
    """Empirical inverse bounds of ``d/dt + A(mu_t) + shift`` over the probe family.

    ``tilde_ratio`` uses the norm ``||(d/dt + J) u||_{L^r(W^{-1,2})}`` with
    ``J`` the duality map; ``mr_ratio`` the plain MR norm with spatial
    exponent ``q``.  When ``r`` lies inside ``window`` (an ``(lo, hi)`` pair
    or an object with ``lo``/``hi``) the tilde ratio is compared with
    ``8 (1 + c + C) / c`` times ``1 + tolerance``.
    """
    problem = ParabolicProblem(mesh, partition, grid, field, shift)
    fb = form_bounds(field.bounds, shift)
    bound = 8.0 * (1.0 + fb.c_lower + fb.c_upper) / fb.c_lower
    tilde, plain, notes = 0.0, 0.0, []
    for label, F in probe_forcings(problem, probes, seed):
        u = problem.solve(F)
        f2 = forcing_norm(F, grid, mesh, partition, r, 2.0)
        tilde = max(tilde, _ratio(mr_tilde_norm(u, r, mesh, partition), f2))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DualNormWarning)
            fq = f2 if q == 2 else forcing_norm(F, grid, mesh, partition, r, q)
            plain = max(plain, _ratio(mr_norm(u, r, q, mesh, partition), fq))
        notes += [f"{label}: {w.message}" for w in caught if issubclass(w.category, DualNormWarning)]
    if window is not None:
        lo, hi = (window.lo, window.hi) if hasattr(window, "lo") else window
        window = (float(lo), float(hi))
        in_window = lo < r < hi
    else:
        in_window = False
    passed = (not in_window) or tilde <= bound * (1.0 + tolerance)
    return MRRatioReport(r, q, tilde, plain, bound, window, in_window, tolerance, passed, notes)

