"""
The Mabuchi functional
======================

L(phi1, phi2) integrates the velocity of a path of potentials against
omega_t^2, plus two torsion terms.  On any Hermitian surface the result does
not depend on the path, is a 1-cocycle, and shifts by C (1 - Err/V) when the
end point moves by a constant C.
"""

# %%
from hermitian_energy import (
    build_grid,
    generic_hermitian_metric,
    mabuchi_closed,
    mabuchi_pair,
    normalize_sup,
    random_band_limited_field,
)
from hermitian_energy.functionals import err, volume

grid = build_grid(16)
m = generic_hermitian_metric(grid, seed=7, amplitude=0.1)
p1, p2, p3 = (normalize_sup(random_band_limited_field(grid, 3, 0.05, s)) for s in (1, 2, 3))
psi = random_band_limited_field(grid, 3, 0.03, 4)

# %%
# Three different paths between the same end points
print("linear       :", mabuchi_pair(m, p1, p2))
print("poly detour  :", mabuchi_pair(m, p1, p2, "poly", detour=psi))
print("trig detour  :", mabuchi_pair(m, p1, p2, "trig", detour=psi))

# %%
# Closed form along t * phi
zero = 0.0 * p1
print("closed form  :", mabuchi_closed(m, p1), " path:", mabuchi_pair(m, zero, p1))

# %%
# Cocycle and translation
print("L12 + L21             :", mabuchi_pair(m, p1, p2) + mabuchi_pair(m, p2, p1))
print("L12 + L23 + L31       :", mabuchi_pair(m, p1, p2) + mabuchi_pair(m, p2, p3) + mabuchi_pair(m, p3, p1))
C = 0.5
print("L(p1, p2 + C) - L12   :", mabuchi_pair(m, p1, p2 + C) - mabuchi_pair(m, p1, p2))
print("C (1 - Err(p2) / V)   :", C * (1 - err(m, p2) / volume(m)))
