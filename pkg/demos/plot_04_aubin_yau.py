"""
Aubin-Yau functionals with torsion corrections
==============================================

I = I_bullet + 2A + 2B and J = -L + (1/V) int phi omega^2 + 2A + 2B.  Both
differences 2I/3 - J and 3J - I are gradient energies, which gives
I/3 <= J <= 2I/3 on any Hermitian surface.
"""

# %%
from hermitian_energy import build_grid, generic_hermitian_metric, normalize_sup, random_band_limited_field
from hermitian_energy import functionals as fn

grid = build_grid(16)
m = generic_hermitian_metric(grid, seed=7, amplitude=0.1)
print("torsion weights a, b, c, d:", fn.aubin_yau_constants())

# %%
for seed in range(4):
    phi = normalize_sup(random_band_limited_field(grid, 3, 0.05, seed))
    I, J = fn.i_ay(m, phi), fn.j_ay(m, phi)
    A, B = fn.func_A(m, phi), fn.func_B(m, phi)
    l1, r1 = fn.gap_418(m, phi)
    l2, r2 = fn.gap_421(m, phi)
    print(f"seed {seed}: I = {I:.6e}  J/I = {J / I:.4f}  A = B = {A:+.2e} ({abs(A - B):.0e})")
    print(f"    2I/3 - J = {l1:.6e} vs energy {r1:.6e};  3J - I = {l2:.6e} vs energy {r2:.6e}")
