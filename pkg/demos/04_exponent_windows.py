"""
Exponent windows from explicit constants
========================================

The extrapolation radii are closed-form.  This script reproduces the small
worked examples and shows how the window around r = 2 shrinks as the
inverse-norm constant grows.
"""

from maxreg import (
    SneibergInput,
    hilbert_window,
    interp_exponent,
    kappa_r0,
    sneiberg_isomorphism_radius,
    sneiberg_surjectivity_radius,
)

# %%
# Interpolating between L^4 and L^{4/3} at theta = 1/2 lands on L^2.
print("interp_exponent(4, 4/3, 1/2) =", interp_exponent(4.0, 4 / 3, 0.5))

# %%
# Abstract radii for theta = 1/2, inverse bound 3 and endpoint bound 2.
inp = SneibergInput(theta=0.5, beta=3.0, gamma=2.0)
print("surjectivity radius:", sneiberg_surjectivity_radius(inp))
print("isomorphism radius and inverse bound:", sneiberg_isomorphism_radius(inp))

# %%
# Window around 2 for coefficients in E(1, 1) with C_J = 3.
w = hilbert_window(1.0, 1.0, 3.0, r0=4.0, r1=4 / 3)
print(f"theta-radius {w.radius:.4f}, exponent window ({w.lo:.5f}, {w.hi:.5f})")

# %%
# The uniform kappa window: r0 = 600/299 for the same constants and s = 4.
res = kappa_r0(1.0, 1.0, 3.0, s=4.0)
print(f"kappa = {res.kappa:.6g}, window ({res.window.lo:.6f}, {res.r0:.6f}), bound {res.bound}")

# %%
# Larger constants give narrower windows.
for C in (1.0, 10.0, 1e3, 1e6):
    r = kappa_r0(1.0, 2.0, C, s=4.0)
    print(f"C_J = {C:>9g}: r0 - 2 = {r.r0 - 2:.3e}")
