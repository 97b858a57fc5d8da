"""Acceptance suite A1-A10.

Each ``criterion_*`` function builds its own problem instances, runs them and
returns a :class:`CriterionResult`; nothing here asserts.  The test suite and
the ``verify`` subcommand both consume :data:`CRITERIA`.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coefficients import (
    CoefficientField,
    EllipticityBounds,
    InterfaceSpec,
    l1_distance,
    linf_distance,
    matrix_bounds,
    moving_interface_field,
    piecewise_constant_in_time,
)
from .extrapolation import (
    SneibergInput,
    hilbert_window,
    interp_exponent,
    kappa_r0,
    sneiberg_isomorphism_radius,
    sneiberg_surjectivity_radius,
)
from .fem import build_interval_mesh, build_rect_mesh, mark_dirichlet, p1_space
from .norms import DualNormWarning, Trajectory, dual_norm, dual_norm_info, holder_quotient, mr_norm, mr_tilde_norm, w1q_norm
from .parabolic import (
    ParabolicProblem,
    TimeGrid,
    apriori_check,
    estimate_mr_constant,
    mr_ratio_report,
    nodal_forcing,
    reference_problem,
)
from .quasilinear import (
    FixedPointConfig,
    SigmaFunction,
    fixed_point_solve,
    quasilinear_residual,
    verify_effective_ellipticity,
)

__all__ = ["CriterionResult", "CRITERIA", "run_all", "reference_meshes", "translating_inclusion"]


@dataclass
class CriterionResult:
    id: str
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        return f"{self.id} {'PASS' if self.passed else 'FAIL'} {self.title}: {self.summary} ({self.elapsed:.2f}s)"

    def as_dict(self):
        return {"id": self.id, "title": self.title, "pass": self.passed, "summary": self.summary,
                "details": self.details, "elapsed": self.elapsed}


def _timed(cid: str, title: str):
    def wrap(fn):
        def run(**kw) -> CriterionResult:
            t0 = time.perf_counter()
            passed, summary, details = fn(**kw)
            return CriterionResult(cid, title, bool(passed), summary, details, time.perf_counter() - t0)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def reference_meshes():
    """Small meshes with Dirichlet, mixed and pure Neumann boundary parts."""
    m1 = build_interval_mesh(32)
    m2 = build_interval_mesh(16)
    m3 = build_rect_mesh(8, 8)
    m4 = build_rect_mesh(4, 6, 1.0, 1.5)
    return [
        ("interval32-dirichlet", m1, mark_dirichlet(m1, lambda x: True)),
        ("interval16-neumann", m2, mark_dirichlet(m2, lambda x: False)),
        ("rect8x8-mixed", m3, mark_dirichlet(m3, lambda x: x[0] <= 0.0)),
        ("rect4x6-dirichlet", m4, mark_dirichlet(m4, lambda x: True)),
    ]


def translating_inclusion(speed: float = 0.1, horizon: float = 1.0) -> CoefficientField:
    """1D inclusion ``[0.2, 0.4] + speed * t`` with value 1 inside and 2 outside."""
    spec = InterfaceSpec("interval", 0.1, (0.3,), (speed,), 1.0, 2.0, ((0.0,), (1.0,)))
    return moving_interface_field(spec, horizon)


# random coefficients in E(c_lower, c_upper), piecewise constant on a patch grid

def random_elliptic_matrix(rng, c_lower: float, c_upper: float, d: int = 2) -> np.ndarray:
    while True:
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        S = Q @ np.diag(rng.uniform(c_lower, c_upper, d)) @ Q.T
        if d > 1:
            S = S + rng.uniform(-0.4, 0.4) * np.array([[0.0, 1.0], [-1.0, 0.0]])
        lo, hi = matrix_bounds(S)
        if lo >= c_lower and hi <= c_upper:
            return S


def random_patch_field(rng, bounds: EllipticityBounds, patches: int = 4) -> CoefficientField:
    mats = np.array([random_elliptic_matrix(rng, bounds.c_lower, bounds.c_upper)
                     for _ in range(patches * patches)])

    def sampler(t, pts, side):
        ij = np.clip((np.asarray(pts) * patches).astype(int), 0, patches - 1)
        return mats[ij[:, 0] * patches + ij[:, 1]].copy()

    return CoefficientField(sampler, bounds, 2)


def random_piecewise_field(rng, bounds: EllipticityBounds, n_steps: int, horizon: float = 1.0):
    n_pieces = int(rng.integers(2, 5))
    nodes = np.sort(rng.choice(np.arange(1, n_steps), size=n_pieces - 1, replace=False))
    breakpoints = [horizon * k / n_steps for k in nodes]
    pieces = [random_patch_field(rng, bounds) for _ in range(n_pieces)]
    return piecewise_constant_in_time(pieces, breakpoints, horizon), breakpoints


@_timed("A1", "discrete a priori estimates")
def criterion_a1(seed: int = 0, n_fields: int = 20):
    bounds = EllipticityBounds(0.5, 2.0)
    mesh = build_rect_mesh(8, 8)
    part = mark_dirichlet(mesh, lambda x: True)
    space = p1_space(mesh, part)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = {"state": 0.0, "derivative": 0.0, "mr": 0.0}
    for _ in range(n_fields):
        fld, bps = random_piecewise_field(rng, bounds, 64)
        grid = TimeGrid.uniform(1.0, 64, bps)
        z1, z2 = rng.standard_normal((2, space.n))
        w = rng.uniform(1, 6)
        t = grid.times[:, None]
        F = np.cos(2 * np.pi * w * t) * (space.mass @ z1) + (t <= 0.5) * (space.mass @ z2)
        u = ParabolicProblem(mesh, part, grid, fld).solve(F)
        rep = apriori_check(u, F, grid, mesh, part, bounds)
        for k in worst:
            worst[k] = max(worst[k], rep.ratios[k])
    runtime = time.perf_counter() - t0
    passed = worst["state"] <= 1.0 and worst["derivative"] <= 1.05 and worst["mr"] <= 1.05 and runtime < 30
    summary = (f"max ratios state={worst['state']:.4f} (<=1) derivative={worst['derivative']:.4f} "
               f"mr={worst['mr']:.4f} (<=1.05), runtime {runtime:.1f}s (<30)")
    return passed, summary, {"ratios": worst, "runtime": runtime}


@_timed("A2", "energy identity convergence")
def criterion_a2(levels=(32, 64, 128, 256)):
    mesh = build_interval_mesh(64)
    part = mark_dirichlet(mesh, lambda x: True)
    residuals = []
    dissipative = True
    for N in levels:
        grid = TimeGrid.uniform(1.0, N)
        F = nodal_forcing(lambda t, x: np.sin(np.pi * t) * np.sin(np.pi * x[:, 0]), grid, mesh, part)
        prob = ParabolicProblem(mesh, part, grid, operator=p1_space(mesh, part).stiffness_identity)
        res = prob.energy_residual(prob.solve(F), F)
        dissipative &= bool(np.all(res <= 1e-12))
        residuals.append(float(res[-1]))
    factors = [residuals[i] / residuals[i + 1] for i in range(len(residuals) - 1)]
    passed = dissipative and all(1.5 <= f <= 3.0 for f in factors)
    summary = f"residuals {[f'{r:.3e}' for r in residuals]}, factors {[round(f, 4) for f in factors]} in [1.5, 3]"
    return passed, summary, {"residuals": residuals, "factors": factors, "dissipative": dissipative}


@_timed("A3", "reference constant bound")
def criterion_a3(probes: int = 64, seed: int = 0, n_steps: int = 32):
    values = {}
    for name, mesh, part in reference_meshes():
        grid = TimeGrid.uniform(1.0, n_steps)
        values[name] = estimate_mr_constant(reference_problem(mesh, part, grid), 2.0, probes, seed).value
    passed = all(v <= 3.0 * (1 + 1e-6) for v in values.values())
    summary = ", ".join(f"{k}={v:.4f}" for k, v in values.items()) + " (<=3)"
    return passed, summary, {"estimates": values}


def _monotone_checks(rng, n: int):
    """Count monotonicity violations of all radii on ``n`` random parameter points."""
    bad = 0
    for _ in range(n):
        th = rng.uniform(0.01, 0.99)
        beta, gamma = rng.uniform(0.1, 10, 2)
        f1, f2 = rng.uniform(1.01, 2.0, 2)
        base = SneibergInput(th, beta, gamma)
        for more in (SneibergInput(th, beta * f1, gamma), SneibergInput(th, beta, gamma * f2)):
            bad += sneiberg_surjectivity_radius(more) > sneiberg_surjectivity_radius(base)
            bad += sneiberg_isomorphism_radius(more)[0] > sneiberg_isomorphism_radius(base)[0]
        cl = rng.uniform(0.1, 1.0)
        cu = rng.uniform(1.0, 10.0)
        C = rng.uniform(0.1, 10.0)
        s = rng.uniform(2.1, 20.0)
        r0, r1 = rng.uniform(2.1, 10.0), rng.uniform(1.1, 1.9)
        k = kappa_r0(cl, cu, C, s)
        # larger C or c_upper, smaller c_lower: narrower windows
        for other in (kappa_r0(cl, cu, C * f1, s), kappa_r0(cl, cu * f2, C, s), kappa_r0(cl / f1, cu, C, s)):
            bad += other.kappa > k.kappa or other.r0 > k.r0
        # larger s: wider kappa window
        bad += kappa_r0(cl, cu, C, s * f2).r0 < k.r0
        for mode in ("surjective", "isomorphism"):
            w = hilbert_window(cl, cu, C, r0, r1, mode)
            for other in (hilbert_window(cl, cu, C * f1, r0, r1, mode),
                          hilbert_window(cl, cu * f2, C, r0, r1, mode),
                          hilbert_window(cl / f1, cu, C, r0, r1, mode)):
                bad += other.radius > w.radius or other.lo < w.lo or other.hi > w.hi
            bad += not (w.lo < 2.0 < w.hi)
    return bad


@_timed("A4", "formula exactness")
def criterion_a4(seed: int = 0, n_points: int = 10_000):
    k = kappa_r0(1, 1, 3, 4)
    surj = sneiberg_surjectivity_radius(SneibergInput(0.5, 3, 2))
    iso, bound = sneiberg_isomorphism_radius(SneibergInput(0.5, 3, 2))
    errs = {
        "kappa": abs(k.kappa - 1 / 300),
        "r0": abs(k.r0 - 600 / 299),
        "surjectivity": abs(surj - 1 / 14),
        "isomorphism": abs(iso - 1 / 156),
        "bound": abs(bound - 24),
    }
    interp_ok = interp_exponent(4, 4 / 3, 0.5) == 2.0
    violations = _monotone_checks(np.random.default_rng(seed), n_points)
    passed = max(errs.values()) <= 1e-14 and interp_ok and violations == 0
    summary = f"max error {max(errs.values()):.1e} (<=1e-14), interp exact={interp_ok}, monotonicity violations {violations}/{n_points}"
    return passed, summary, {"errors": errs, "interp_exact": interp_ok, "violations": violations}


def _random_trajectory(rng, n_dofs: int, N: int) -> Trajectory:
    times = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, N - 1)), [1.0]])
    times = np.unique(times)
    U = rng.standard_normal((len(times), n_dofs)) * rng.uniform(0.1, 10)
    U[0] = 0.0
    return Trajectory(times, U)


@_timed("A5", "tilde norm inequality")
def criterion_a5(seed: int = 0, n_traj: int = 50):
    rng = np.random.default_rng(seed)
    setups = reference_meshes()
    worst = 0.0
    for i in range(n_traj):
        _, mesh, part = setups[i % len(setups)]
        traj = _random_trajectory(rng, p1_space(mesh, part).n, int(rng.integers(4, 24)))
        for r in (1.5, 2.0, 3.0):
            worst = max(worst, mr_tilde_norm(traj, r, mesh, part) / mr_norm(traj, r, 2.0, mesh, part))
    passed = worst <= 1 + 1e-8
    return passed, f"max tilde/mr = {worst:.6f} (<=1+1e-8)", {"max_ratio": worst}


@_timed("A6", "moving interface discontinuity")
def criterion_a6(refine: int = 64):
    fld = translating_inclusion()
    mesh = build_interval_mesh(256)
    jump = linf_distance(fld, 0.0, 0.5, mesh)
    rates = {}
    for h in (1 / 64, 1 / 128):
        for t in (0.0, 0.25, 0.5):
            rates[f"h={h:g},t={t:g}"] = l1_distance(fld, t, t + h, mesh, refine=refine) / h
    passed = jump == 1.0 and all(0.18 <= v <= 0.22 for v in rates.values())
    summary = f"linf={jump} (==1), l1/h in [{min(rates.values()):.4f}, {max(rates.values()):.4f}] (within [0.18, 0.22])"
    return passed, summary, {"linf": jump, "l1_rates": rates, "refine": refine}


@_timed("A7", "tilde ratio inside the kappa window")
def criterion_a7(probes: int = 16, seed: int = 0, s: float = 4.0):
    mesh = build_interval_mesh(32)
    part = mark_dirichlet(mesh, lambda x: True)
    grid = TimeGrid.uniform(1.0, 32)
    C = estimate_mr_constant(reference_problem(mesh, part, grid), 2.0, 64, seed).value
    kr = kappa_r0(1.0, 2.0, C, s, optimistic=True)
    fld = translating_inclusion()
    ratios = {}
    for r in kr.window.grid(5):
        rep = mr_ratio_report(fld, float(r), 2.0, grid, mesh, part, probes, seed, window=kr.window)
        ratios[float(r)] = rep.tilde_ratio
    limit = 8.0 * (1 + 1 + 2) / 1 * 1.1
    passed = all(v <= limit for v in ratios.values())
    summary = (f"window ({kr.window.lo:.5f}, {kr.window.hi:.5f}) from C={C:.4f}, "
               f"max tilde ratio {max(ratios.values()):.4f} (<= {limit:.1f})")
    return passed, summary, {"C": C, "window": [kr.window.lo, kr.window.hi], "ratios": ratios}


HOLDER_PROFILES = {
    "power": lambda t, x: t ** -0.2 * np.sin(np.pi * x[:, 0]),
    "near-singular": lambda t, x: np.abs(t - 0.5 + 1e-3) ** -0.2 * np.sin(np.pi * x[:, 0]),
    "step": lambda t, x: 5.0 * (t <= 0.5) * np.sin(np.pi * x[:, 0]),
    "switching": lambda t, x: 10.0 * np.sign(np.sin(6 * np.pi * t)) * x[:, 0] * (1 - x[:, 0]),
}


@_timed("A8", "Hoelder quotient stability")
def criterion_a8(alpha: float = 0.2, levels=(64, 128, 256)):
    mesh = build_interval_mesh(32)
    part = mark_dirichlet(mesh, lambda x: True)
    fld = translating_inclusion()
    mass = p1_space(mesh, part).mass
    changes = {}
    for name, fn in HOLDER_PROFILES.items():
        vals = []
        for N in levels:
            grid = TimeGrid.uniform(1.0, N)
            u = ParabolicProblem(mesh, part, grid, fld).solve(nodal_forcing(fn, grid, mesh, part))
            vals.append(holder_quotient(u, alpha, mass))
        changes[name] = [abs(b - a) / a for a, b in zip(vals, vals[1:])]
    worst = max(max(v) for v in changes.values())
    return worst <= 0.10, f"max relative change {worst:.4f} (<=0.10)", {"changes": changes}


@_timed("A9", "quasilinear consistency")
def criterion_a9():
    mesh = build_interval_mesh(32)
    part = mark_dirichlet(mesh, lambda x: True)
    grid = TimeGrid.uniform(1.0, 32)
    fld = translating_inclusion()
    F = nodal_forcing(lambda t, x: 0.5 * t * np.sin(np.pi * x[:, 0]), grid, mesh, part)
    linear = ParabolicProblem(mesh, part, grid, fld).solve(F)
    one = fixed_point_solve(fld, SigmaFunction.constant(1.0), F, grid, mesh, part, FixedPointConfig(1e-12, 5))
    scale = max(np.abs(linear.values).max(), 1e-300)
    lin_err = float(np.abs(one.trajectory.values - linear.values).max() / scale)
    sigma = SigmaFunction(lambda x: 1.5 + 0.5 * np.tanh(x), 1.0, 2.0)
    res = fixed_point_solve(fld, sigma, F, grid, mesh, part, FixedPointConfig(1e-10, 50))
    resid = quasilinear_residual(res.trajectory, fld, sigma, F, grid, mesh, part)
    ell = verify_effective_ellipticity(res.trajectory, fld, sigma, grid, mesh, part)
    passed = lin_err <= 1e-10 and res.converged and res.iterations <= 50 and resid < 1e-6 and ell.passed
    summary = (f"sigma=1 error {lin_err:.1e} (<=1e-10); tanh: {res.iterations} iterations, "
               f"residual {resid:.1e} (<1e-6), ellipticity {'ok' if ell.passed else 'violated'}")
    return passed, summary, {"linear_error": lin_err, "iterations": res.iterations,
                             "converged": res.converged, "residual": resid, "ellipticity": ell.passed}


@_timed("A10", "dual norm oracle")
def criterion_a10(seed: int = 0, n_functionals: int = 100):
    rng = np.random.default_rng(seed)
    setups = [reference_meshes()[i] for i in (0, 2, 3)]
    worst, unconverged, pairing_bad = 0.0, 0, 0
    for i in range(n_functionals):
        _, mesh, part = setups[i % 3]
        n = p1_space(mesh, part).n
        f = rng.standard_normal(n)
        exact = dual_norm(f, mesh, part, 2.0, method="gram")
        info = dual_norm_info(f, mesh, part, 2.0, method="ascent", init=rng.standard_normal(n))
        unconverged += not info.converged
        worst = max(worst, abs(info.value - exact) / exact)
        for qp in (1.5, 2.0, 3.0):
            phi = rng.standard_normal(n)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DualNormWarning)
                lhs = abs(f @ phi)
                rhs = dual_norm(f, mesh, part, qp) * w1q_norm(phi, mesh, part, qp)
            pairing_bad += lhs > rhs * (1 + 1e-10)
    passed = worst <= 1e-6 and pairing_bad == 0
    summary = (f"max rel. ascent-vs-Gram error {worst:.1e} (<=1e-6), unconverged {unconverged}, "
               f"pairing violations {pairing_bad}")
    return passed, summary, {"max_error": worst, "unconverged": unconverged, "pairing_violations": pairing_bad}


CRITERIA: dict[str, Callable[..., CriterionResult]] = {
    "A1": criterion_a1, "A2": criterion_a2, "A3": criterion_a3, "A4": criterion_a4,
    "A5": criterion_a5, "A6": criterion_a6, "A7": criterion_a7, "A8": criterion_a8,
    "A9": criterion_a9, "A10": criterion_a10,
}


def run_all(ids=None, echo=None) -> list:
    out = []
    for cid in ids or CRITERIA:
        res = CRITERIA[cid]()
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
