"""Explicit extrapolation radii and exponent windows.

All functions are closed-form.  Constants such as ``C_J`` (the norm of the
inverse of ``d/dt + J`` for the duality map ``J``) are inputs: pass a known
value, or an estimate from :func:`maxreg.parabolic.estimate_mr_constant` and
set ``optimistic=True``.  Since every radius decreases in ``C_J``, a window
built from a lower estimate of ``C_J`` can only be wider than the guaranteed
one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "SneibergInput",
    "WindowResult",
    "KappaResult",
    "interp_exponent",
    "theta_from_r",
    "sneiberg_surjectivity_radius",
    "sneiberg_isomorphism_radius",
    "hilbert_window",
    "kappa_r0",
    "mr_inverse_bound",
]


def _check_exponent(r, name):
    if not (1.0 < r < np.inf):
        raise ValueError(f"{name} must lie in (1, inf), got {r}")


def interp_exponent(r0: float, r1: float, theta: float) -> float:
    """Exponent ``r`` with ``1/r = (1 - theta)/r0 + theta/r1``."""
    _check_exponent(r0, "r0")
    _check_exponent(r1, "r1")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return 1.0 / ((1.0 - theta) / r0 + theta / r1)


def theta_from_r(r: float, r0: float, r1: float) -> float:
    """Inverse of :func:`interp_exponent` in ``theta``."""
    _check_exponent(r, "r")
    _check_exponent(r0, "r0")
    _check_exponent(r1, "r1")
    if r0 == r1:
        if abs(r - r0) > 1e-14 * r0:
            raise ValueError(f"r={r} is not on the degenerate segment r0 = r1 = {r0}")
        return 0.0
    theta = (1.0 / r - 1.0 / r0) / (1.0 / r1 - 1.0 / r0)
    if not -1e-14 <= theta <= 1.0 + 1e-14:
        raise ValueError(f"r={r} lies outside the segment between r0={r0} and r1={r1}")
    return min(max(theta, 0.0), 1.0)


@dataclass(frozen=True)
class SneibergInput:
    """Interpolation parameter ``theta``, inverse bound ``beta`` and endpoint norm bound ``gamma``."""

    theta: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie strictly inside (0, 1)")
        if not (0.0 <= self.beta < np.inf and 0.0 <= self.gamma < np.inf):
            raise ValueError("beta and gamma must be finite and nonnegative")


def sneiberg_surjectivity_radius(inp: SneibergInput) -> float:
    """Radius ``min(theta, 1 - theta) / (1 + beta*gamma)`` within which surjectivity persists."""
    return min(inp.theta, 1.0 - inp.theta) / (1.0 + inp.beta * inp.gamma)


def sneiberg_isomorphism_radius(inp: SneibergInput) -> tuple:
    """``(radius, inverse_bound)`` for persistence of the isomorphism property.

    The radius is ``min(theta, 1 - theta) / (6 (1 + 2 beta gamma))`` and the
    inverse stays bounded by ``8 beta`` inside it.
    """
    radius = min(inp.theta, 1.0 - inp.theta) / (6.0 * (1.0 + 2.0 * inp.beta * inp.gamma))
    return radius, 8.0 * inp.beta


@dataclass(frozen=True)
class WindowResult:
    """Open interval ``(lo, hi)`` of admissible exponents around ``center``."""

    center: float
    lo: float
    hi: float
    bound: Optional[float] = None
    radius: Optional[float] = None
    theta: Optional[float] = None
    mode: str = ""
    optimistic: bool = False

    def __contains__(self, r) -> bool:
        return self.lo < r < self.hi

    def grid(self, n: int) -> np.ndarray:
        """``n`` equispaced exponents strictly inside the window."""
        return self.lo + (self.hi - self.lo) * (np.arange(1, n + 1) / (n + 1))

    def as_dict(self):
        return {
            "center": self.center, "lo": self.lo, "hi": self.hi, "bound": self.bound,
            "radius": self.radius, "theta": self.theta, "mode": self.mode,
            "optimistic": self.optimistic,
        }


def mr_inverse_bound(c_lower: float, c_upper: float) -> float:
    """``8 (1 + c_lower + c_upper) / c_lower``."""
    return 8.0 * (1.0 + c_lower + c_upper) / c_lower


def _check_constants(c_lower, c_upper, C):
    if not 0.0 < c_lower <= c_upper < np.inf:
        raise ValueError(f"need 0 < c_lower <= c_upper, got ({c_lower}, {c_upper})")
    if not C > 0:
        raise ValueError(f"the constant C must be positive, got {C}")


def hilbert_window(
    c_lower: float,
    c_upper: float,
    C_J: float,
    r0: float,
    r1: float,
    mode: str = "surjective",
    optimistic: bool = False,
) -> WindowResult:
    """Window of time exponents around 2 reached from the L2 theory.

    ``theta`` solves ``1/2 = (1 - theta)/r0 + theta/r1``.  With
    ``K = (1 + (1 + c_upper)/c_lower) * max(1, c_upper) * C_J`` the radius in
    the interpolation parameter is ``min(theta, 1-theta) / (1 + K)`` in
    ``"surjective"`` mode and ``min(theta, 1-theta) / (6 (1 + 2K))`` in
    ``"isomorphism"`` mode; the latter also carries the inverse bound
    ``8 (1 + c_lower + c_upper) / c_lower`` in the tilde norm.
    """
    _check_constants(c_lower, c_upper, C_J)
    if not (r0 > 2.0 and 1.0 < r1 < 2.0):
        raise ValueError("need r0 > 2 and 1 < r1 < 2")
    theta = theta_from_r(2.0, r0, r1)
    K = (1.0 + (1.0 + c_upper) / c_lower) * max(1.0, c_upper) * C_J
    if mode == "surjective":
        radius, bound = min(theta, 1.0 - theta) / (1.0 + K), None
    elif mode == "isomorphism":
        radius = min(theta, 1.0 - theta) / (6.0 * (1.0 + 2.0 * K))
        bound = mr_inverse_bound(c_lower, c_upper)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    # larger theta means smaller r because r0 > r1
    lo = interp_exponent(r0, r1, theta + radius)
    hi = interp_exponent(r0, r1, theta - radius)
    return WindowResult(2.0, lo, hi, bound, radius, theta, mode, optimistic)


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    r0: float
    window: WindowResult
    bound: float

    def as_dict(self):
        return {"kappa": self.kappa, "r0": self.r0, "window": [self.window.lo, self.window.hi],
                "bound": self.bound, "optimistic": self.window.optimistic}


def kappa_r0(c_lower: float, c_upper: float, C_Js: float, s: float, optimistic: bool = False) -> KappaResult:
    """Exponent window ``(r0', r0)`` valid for every coefficient in E(c_lower, c_upper).

    ``kappa = 1 / (12 (1 + 2 (1 + (1 + c_lower + c_upper)/c_lower) max(1, c_upper) C_Js))``
    and ``r0 = 1 / (1/2 - kappa (1 - 2/s))``.  Requires
    ``c_lower <= 1 <= c_upper`` and ``s > 2``.
    """
    _check_constants(c_lower, c_upper, C_Js)
    if c_lower > 1.0 or c_upper < 1.0:
        raise ValueError(
            f"hypothesis c_lower <= 1 <= c_upper violated: c_lower={c_lower}, c_upper={c_upper}"
        )
    if not 2.0 < s < np.inf:
        raise ValueError(f"s must lie in (2, inf), got {s}")
    K = (1.0 + (1.0 + c_lower + c_upper) / c_lower) * max(1.0, c_upper) * C_Js
    kappa = 1.0 / (12.0 * (1.0 + 2.0 * K))
    r0 = 1.0 / (0.5 - kappa * (1.0 - 2.0 / s))
    r0_conj = r0 / (r0 - 1.0)
    bound = mr_inverse_bound(c_lower, c_upper)
    window = WindowResult(2.0, r0_conj, r0, bound, kappa, 0.5, "kappa", optimistic)
    return KappaResult(kappa, r0, window, bound)
