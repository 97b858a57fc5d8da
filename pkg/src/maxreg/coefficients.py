"""Time-dependent coefficient fields ``mu: J -> E(c_lower, c_upper)``.

A field is a vectorized sampler ``(t, points, side) -> (n, d, d)`` together
with declared ellipticity bounds and the interior times at which it jumps.
``side`` only matters exactly at a jump time: ``"right"`` returns the value on
``[t, t_next)`` and ``"left"`` the value on ``(t_prev, t]``.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .fem import Mesh

__all__ = [
    "EllipticityBounds",
    "CoefficientField",
    "InterfaceSpec",
    "EllipticityReport",
    "matrix_bounds",
    "check_cell_matrices",
    "constant_field",
    "piecewise_constant_in_time",
    "moving_interface_field",
    "linf_distance",
    "l1_distance",
    "verify_ellipticity",
]

_SLACK = 1e-12


@dataclass(frozen=True)
class EllipticityBounds:
    c_lower: float
    c_upper: float

    def __post_init__(self):
        if not (0 < self.c_lower <= self.c_upper < np.inf):
            raise ValueError(
                f"need 0 < c_lower <= c_upper < inf, got ({self.c_lower}, {self.c_upper})"
            )

    def scaled(self, lower: float, upper: float) -> "EllipticityBounds":
        return EllipticityBounds(self.c_lower * lower, self.c_upper * upper)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    sampler: Callable[[float, np.ndarray, str], np.ndarray]
    bounds: EllipticityBounds
    dim: int
    jump_times: tuple = ()
    horizon: Optional[float] = None

    def __post_init__(self):
        jt = tuple(float(t) for t in self.jump_times)
        if any(b <= a for a, b in zip(jt, jt[1:])):
            raise ValueError("jump times must be strictly increasing")
        if jt and jt[0] <= 0:
            raise ValueError("jump times must be positive")
        if jt and self.horizon is not None and jt[-1] >= self.horizon:
            raise ValueError("jump times must lie inside (0, T)")
        object.__setattr__(self, "jump_times", jt)

    def sample(self, t: float, points, side: str = "right") -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return self.sampler(float(t), pts, side)

    def __call__(self, t: float, x) -> np.ndarray:
        return self.sample(t, np.asarray(x, dtype=float).reshape(1, self.dim))[0]

    def cell_matrices(self, t: float, mesh: Mesh, side: str = "right") -> np.ndarray:
        """Coefficient sampled at the cell barycenters, shape (n_cells, d, d)."""
        return self.sample(t, mesh.barycenters, side)

    @classmethod
    def from_function(cls, func, bounds: EllipticityBounds, dim: int, **kw) -> "CoefficientField":
        """Wrap a pointwise ``func(t, x) -> (d, d)`` matrix."""

        def sampler(t, pts, side):
            return np.array([np.asarray(func(t, x), dtype=float).reshape(dim, dim) for x in pts])

        return cls(sampler, bounds, dim, **kw)


def matrix_bounds(mats) -> tuple:
    """(min eigenvalue of the symmetric part, max spectral norm) over a stack."""
    mats = np.asarray(mats, dtype=float)
    if mats.ndim == 2:
        mats = mats[None]
    sym = 0.5 * (mats + np.swapaxes(mats, 1, 2))
    lower = np.linalg.eigvalsh(sym).min(axis=1)
    upper = np.linalg.norm(mats, ord=2, axis=(1, 2))
    return float(lower.min()), float(upper.max())


def constant_field(matrix) -> CoefficientField:
    """Autonomous, spatially constant coefficient with auto-computed bounds."""
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.shape[0] != A.shape[1] or A.shape[0] not in (1, 2):
        raise ValueError("expected a 1x1 or 2x2 matrix")
    lower, upper = matrix_bounds(A)
    if not lower > 0:
        raise ValueError(f"matrix is not elliptic (min eigenvalue of symmetric part {lower:.3g})")
    d = A.shape[0]

    def sampler(t, pts, side):
        return np.broadcast_to(A, (len(pts), d, d)).copy()

    return CoefficientField(sampler, EllipticityBounds(lower, upper), d)


def piecewise_constant_in_time(
    fields: Sequence[CoefficientField], breakpoints: Sequence[float], horizon: Optional[float] = None
) -> CoefficientField:
    """Select ``fields[k]`` on ``[breakpoints[k-1], breakpoints[k])``."""
    fields = list(fields)
    bps = [float(b) for b in breakpoints]
    if len(fields) != len(bps) + 1:
        raise ValueError("need exactly one more field than breakpoints")
    if any(b <= a for a, b in zip(bps, bps[1:])):
        raise ValueError("breakpoints must be strictly increasing")
    dims = {f.dim for f in fields}
    if len(dims) != 1:
        raise ValueError("all pieces must share the space dimension")

    def piece(t, side):
        if side == "left":
            return fields[bisect.bisect_left(bps, t)]
        return fields[bisect.bisect_right(bps, t)]

    def sampler(t, pts, side):
        return piece(t, side).sample(t, pts, side)

    jumps = sorted(set(bps).union(*(f.jump_times for f in fields)))
    bounds = EllipticityBounds(
        min(f.bounds.c_lower for f in fields), max(f.bounds.c_upper for f in fields)
    )
    return CoefficientField(sampler, bounds, dims.pop(), tuple(jumps), horizon)


@dataclass(frozen=True)
class InterfaceSpec:
    """A moving inclusion with coefficient ``inside * I`` in a background ``outside * I``.

    ``shape`` is ``"interval"`` (``size`` = half-width), ``"disk"`` (``size`` =
    radius) or ``"rectangle"`` (``size`` = pair of half-sides).  The center
    moves as ``center + velocity * t`` unless ``path`` is given.  ``domain`` is
    the bounding box ``(lower_corner, upper_corner)`` of the computational
    domain; the closed inclusion must stay strictly inside it.
    """

    shape: str
    size: object
    center: tuple
    velocity: tuple = None
    inside: float = 1.0
    outside: float = 2.0
    domain: tuple = None
    path: Optional[Callable[[float], Sequence[float]]] = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return len(np.atleast_1d(self.center))

    def center_at(self, t: float) -> np.ndarray:
        if self.path is not None:
            return np.atleast_1d(np.asarray(self.path(t), dtype=float))
        c0 = np.atleast_1d(np.asarray(self.center, dtype=float))
        v = np.zeros_like(c0) if self.velocity is None else np.atleast_1d(np.asarray(self.velocity, dtype=float))
        return c0 + v * t

    def half_extent(self) -> np.ndarray:
        """Half-widths of the inclusion's bounding box."""
        if self.shape == "interval" or self.shape == "disk":
            return np.full(self.dim, float(self.size))
        return np.atleast_1d(np.asarray(self.size, dtype=float))

    def contains(self, t: float, pts: np.ndarray) -> np.ndarray:
        rel = pts - self.center_at(t)[None, :]
        if self.shape == "interval":
            return np.abs(rel[:, 0]) <= self.size
        if self.shape == "disk":
            return np.einsum("nd,nd->n", rel, rel) <= float(self.size) ** 2
        return np.all(np.abs(rel) <= self.half_extent()[None, :], axis=1)


def _validate_interface(spec: InterfaceSpec, horizon: float, n_samples: int = 201):
    expected = {"interval": 1, "disk": 2, "rectangle": 2}
    if spec.shape not in expected:
        raise ValueError(f"unknown inclusion shape {spec.shape!r}")
    if spec.dim != expected[spec.shape]:
        raise ValueError(f"{spec.shape} inclusion needs a {expected[spec.shape]}D center")
    if spec.inside == spec.outside:
        raise ValueError("inside and outside values must differ")
    if not (spec.inside > 0 and spec.outside > 0):
        raise ValueError("inside and outside values must be positive")
    half = spec.half_extent()
    if np.any(half <= 0):
        raise ValueError("inclusion size must be positive")
    if spec.domain is None:
        return
    lo = np.atleast_1d(np.asarray(spec.domain[0], dtype=float))
    hi = np.atleast_1d(np.asarray(spec.domain[1], dtype=float))
    for t in np.linspace(0.0, horizon, n_samples):
        c = spec.center_at(t)
        if np.any(c - half <= lo) or np.any(c + half >= hi):
            raise ValueError(f"inclusion leaves the domain at t={t:.6g}")


def moving_interface_field(spec: InterfaceSpec, horizon: float) -> CoefficientField:
    """``mu_t(x) = inside*I`` on the closed inclusion at time t, ``outside*I`` elsewhere."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    _validate_interface(spec, horizon)
    d = spec.dim
    eye = np.eye(d)

    def sampler(t, pts, side):
        vals = np.where(spec.contains(t, pts), spec.inside, spec.outside)
        return vals[:, None, None] * eye[None]

    bounds = EllipticityBounds(min(spec.inside, spec.outside), max(spec.inside, spec.outside))
    return CoefficientField(sampler, bounds, d, (), horizon)


def _pointwise_differences(field, t, s, mesh, refine):
    pts, w = mesh.sample_points(refine)
    flat = pts.reshape(-1, mesh.dim)
    diff = field.sample(t, flat) - field.sample(s, flat)
    return np.linalg.norm(diff, ord=2, axis=(1, 2)), w.ravel()


def linf_distance(field: CoefficientField, t: float, s: float, mesh: Mesh, refine: int = 1) -> float:
    """Max over sample points of ``|mu_t(x) - mu_s(x)|_2``.

    ``refine == 1`` samples at cell barycenters only.
    """
    if t == s:
        return 0.0
    norms, _ = _pointwise_differences(field, t, s, mesh, refine)
    return float(norms.max())


def l1_distance(field: CoefficientField, t: float, s: float, mesh: Mesh, refine: int = 1) -> float:
    """Midpoint-rule approximation of ``int |mu_t(x) - mu_s(x)|_2 dx``.

    With ``refine == 1`` every cell contributes ``|cell|`` times the jump at its
    barycenter; larger values use ``refine**d`` sub-cells per cell, which is
    what resolves interface motion smaller than one cell.
    """
    if t == s:
        return 0.0
    norms, w = _pointwise_differences(field, t, s, mesh, refine)
    return float(norms @ w)


@dataclass
class EllipticityReport:
    passed: bool
    bounds: EllipticityBounds
    n_checked: int
    observed_lower: float
    observed_upper: float
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def check_cell_matrices(mats, bounds: EllipticityBounds, t: float = 0.0):
    """List of violations of ``bounds`` for a stack of per-cell matrices."""
    mats = np.asarray(mats, dtype=float)
    sym = 0.5 * (mats + np.swapaxes(mats, 1, 2))
    lower = np.linalg.eigvalsh(sym).min(axis=1)
    upper = np.linalg.norm(mats, ord=2, axis=(1, 2))
    out = []
    for c in np.flatnonzero(lower < bounds.c_lower - _SLACK):
        out.append({"t": t, "cell": int(c), "kind": "lower", "value": float(lower[c]), "limit": bounds.c_lower})
    for c in np.flatnonzero(upper > bounds.c_upper + _SLACK):
        out.append({"t": t, "cell": int(c), "kind": "upper", "value": float(upper[c]), "limit": bounds.c_upper})
    return out, float(lower.min()), float(upper.max())


def verify_ellipticity(
    field: CoefficientField,
    mesh: Mesh,
    time_samples: int,
    bounds: Optional[EllipticityBounds] = None,
    horizon: Optional[float] = None,
) -> EllipticityReport:
    """Check the declared bounds at every (time sample, cell barycenter).

    Times are ``time_samples`` equispaced points of ``[0, T]`` where ``T`` is
    ``horizon``, else ``field.horizon``, else 1.
    """
    if time_samples < 1:
        raise ValueError("time_samples must be >= 1")
    bounds = field.bounds if bounds is None else bounds
    T = horizon if horizon is not None else (field.horizon if field.horizon is not None else 1.0)
    times = np.linspace(0.0, T, time_samples) if time_samples > 1 else np.array([0.0])
    violations = []
    lo, hi = np.inf, -np.inf
    for t in times:
        v, l_obs, u_obs = check_cell_matrices(field.cell_matrices(t, mesh), bounds, float(t))
        violations += v
        lo, hi = min(lo, l_obs), max(hi, u_obs)
    return EllipticityReport(not violations, bounds, len(times) * mesh.n_cells, lo, hi, violations)
