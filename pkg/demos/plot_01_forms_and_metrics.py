"""
Forms and metrics on the flat complex 2-torus
=============================================

The surface is the unit 4-torus with complex coordinates z^j = x^j + i y^j.
Forms are stored as one coefficient array per basis element and differentiated
spectrally.
"""

# %%
# A lattice and the flat Kahler form
import numpy as np

from hermitian_energy import build_grid, check_conditions, flat_kahler_metric
from hermitian_energy.forms import integrate_22, partial, partial_bar, random_form, wedge

grid = build_grid(16)
flat = flat_kahler_metric(grid)
print("omega^2 coefficient:", flat.omega_squared.coeffs[0, 0, 0, 0, 0])
print("volume int omega^2 :", integrate_22(flat.omega_squared).real)

# %%
# Graded Leibniz rule on random band-limited forms
a = random_form(grid, 1, 0, band=3, amplitude=1.0, seed=1)
b = random_form(grid, 1, 1, band=3, amplitude=1.0, seed=2)
lhs = partial_bar(wedge(a, b))
rhs = wedge(partial_bar(a), b) - wedge(a, partial_bar(b))
print("Leibniz residual   :", (lhs - rhs).sup_norm() / lhs.sup_norm())
print("d'd' residual      :", partial(partial(b)).sup_norm())

# %%
# Three metric families and which curvature conditions they satisfy
from hermitian_energy import gauduchon_torus_metric, generic_hermitian_metric

for m in (flat, gauduchon_torus_metric(grid, 0.3), generic_hermitian_metric(grid, seed=7)):
    rep = check_conditions(m)
    print(f"{m.label:28s} |d omega| = {rep.cond3_residual:9.2e}   "
          f"|ddbar omega| = {rep.cond4_residual:9.2e}   "
          f"density range = [{rep.cond11_signed:+.2e}, {rep.cond12_signed:+.2e}]")
