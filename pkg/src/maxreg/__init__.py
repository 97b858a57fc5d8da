"""Maximal parabolic regularity for nonautonomous divergence-form problems.

P1 finite elements in space, implicit Euler in time, and the norms, constant
estimates and exponent windows needed to test maximal-regularity bounds
numerically.
"""
from .coefficients import (
    CoefficientField,
    EllipticityBounds,
    InterfaceSpec,
    constant_field,
    l1_distance,
    linf_distance,
    moving_interface_field,
    piecewise_constant_in_time,
    verify_ellipticity,
)
from .extrapolation import (
    SneibergInput,
    hilbert_window,
    interp_exponent,
    kappa_r0,
    sneiberg_isomorphism_radius,
    sneiberg_surjectivity_radius,
)
from .fem import (
    BoundaryPartition,
    Mesh,
    assemble_mass,
    assemble_stiffness,
    build_interval_mesh,
    build_rect_mesh,
    elliptic_solve,
    gram_W12,
    mark_dirichlet,
    operator_norm_W12,
)
from .norms import (
    DualNormWarning,
    Trajectory,
    bochner_norm,
    dual_norm,
    holder_quotient,
    mr_norm,
    mr_tilde_norm,
    w1q_norm,
)
from .parabolic import (
    ParabolicProblem,
    TimeGrid,
    apriori_check,
    energy_residual,
    estimate_mr_constant,
    mr_ratio_report,
    nodal_forcing,
    reference_problem,
    solve_nonautonomous,
)
from .quasilinear import FixedPointConfig, SigmaFunction, fixed_point_solve, quasilinear_residual

__version__ = "0.1.0"

__all__ = [
    "CoefficientField",
    "EllipticityBounds",
    "InterfaceSpec",
    "constant_field",
    "l1_distance",
    "linf_distance",
    "moving_interface_field",
    "piecewise_constant_in_time",
    "verify_ellipticity",
    "SneibergInput",
    "hilbert_window",
    "interp_exponent",
    "kappa_r0",
    "sneiberg_isomorphism_radius",
    "sneiberg_surjectivity_radius",
    "BoundaryPartition",
    "Mesh",
    "assemble_mass",
    "assemble_stiffness",
    "build_interval_mesh",
    "build_rect_mesh",
    "elliptic_solve",
    "gram_W12",
    "mark_dirichlet",
    "operator_norm_W12",
    "DualNormWarning",
    "Trajectory",
    "bochner_norm",
    "dual_norm",
    "holder_quotient",
    "mr_norm",
    "mr_tilde_norm",
    "w1q_norm",
    "ParabolicProblem",
    "TimeGrid",
    "apriori_check",
    "energy_residual",
    "estimate_mr_constant",
    "mr_ratio_report",
    "nodal_forcing",
    "reference_problem",
    "solve_nonautonomous",
    "FixedPointConfig",
    "SigmaFunction",
    "fixed_point_solve",
    "quasilinear_residual",
]
