import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermitian_energy import functionals as fn
from hermitian_energy.grid import constant_field, random_band_limited_field
from hermitian_energy.metrics import ddbar_potential

PI2 = np.pi**2


def rel(a, b):
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


# --- trivial anchors -------------------------------------------------------------


def test_zero_potential(generic):
    z = constant_field(generic.grid, 0.0)
    assert fn.err(generic, z) == 0.0
    assert fn.mabuchi_closed(generic, z) == 0.0
    assert fn.mabuchi_pair(generic, z, z) == 0.0
    assert fn.i_bullet(generic, z) == 0.0 and fn.j_bullet(generic, z) == 0.0
    assert fn.i_ay(generic, z) == 0.0 and fn.j_ay(generic, z) == 0.0
    assert fn.gap_418(generic, z) == (0.0, 0.0) and fn.gap_421(generic, z) == (0.0, 0.0)


def test_constant_potential(generic, gauduchon):
    c = constant_field(generic.grid, -0.3)
    assert fn.volume_phi(generic, c) == fn.volume(generic)
    assert fn.i_bullet(generic, c) == pytest.approx(0.0, abs=1e-15)
    assert fn.j_bullet(generic, c) == pytest.approx(0.0, abs=1e-15)
    assert fn.func_A(generic, c) == 0.0
    # L(0, C) = C on a Gauduchon metric
    assert fn.mabuchi_closed(gauduchon, c) == pytest.approx(-0.3, abs=1e-14)


def test_volume_values(flat, gauduchon):
    assert fn.volume(flat) == pytest.approx(8.0, abs=1e-14)
    assert fn.volume(gauduchon) == pytest.approx(7.64, abs=1e-13)
    assert fn.reference_volume(gauduchon) == gauduchon.exact_volume


# --- the volume defect -----------------------------------------------------------


def test_err_matches_by_parts_formula(generic, potentials):
    for seed in (11, 12, 13):
        phi = potentials(seed)
        assert fn.err(generic, phi) == pytest.approx(fn.err_by_parts(generic, phi), rel=1e-10)


def test_err_nonzero_on_generic_metric(generic, potentials):
    value = fn.err(generic, potentials(11))
    assert abs(value) > 1e-6 * fn.volume(generic)
    assert value == pytest.approx(-0.0017635775651295, rel=1e-9)  # regression anchor


def test_err_vanishes_on_gauduchon(gauduchon, generic_corrected, potentials):
    for m in (gauduchon, generic_corrected):
        for seed in (1, 2, 3):
            assert abs(fn.err(m, potentials(seed))) <= 1e-9 * fn.volume(m)


def test_kahler_volume_invariance(flat, kahler, potentials):
    for m in (flat, kahler):
        phi = potentials(5)
        assert fn.volume_phi(m, phi) == pytest.approx(fn.volume(m), rel=1e-10)


def test_err_extremes(flat, gauduchon, generic):
    assert fn.err_extremes_estimate(flat, 3, 0) == pytest.approx((0.0, 0.0), abs=1e-12)
    lo, hi = fn.err_extremes_estimate(gauduchon, 3, 0)
    assert max(abs(lo), abs(hi)) <= 1e-9 * fn.volume(gauduchon)
    lo, hi = fn.err_extremes_estimate(generic, 5, 0)
    assert lo <= 0.0 <= hi and hi - lo > 1e-6
    with pytest.raises(ValueError):
        fn.err_extremes_estimate(generic, 0, 0)


def test_inadmissible_potential_rejected(generic):
    big = random_band_limited_field(generic.grid, 3, 3.0, 1)
    with pytest.raises(fn.InadmissiblePotentialError):
        fn.volume_phi(generic, big)
    with pytest.raises(fn.InadmissiblePotentialError):
        fn.mabuchi_pair(generic, constant_field(generic.grid, 0.0), big)


# --- torsion functionals ---------------------------------------------------------


def test_torsion_functionals_vanish_on_kahler(flat, kahler, potentials):
    for m in (flat, kahler):
        assert abs(fn.func_A(m, potentials(3))) <= 1e-12
        assert abs(fn.func_B(m, potentials(3))) <= 1e-12


def test_a_equals_b_on_generic(generic, potentials):
    phi = potentials(4)
    a, b = fn.func_A(generic, phi), fn.func_B(generic, phi)
    assert abs(a) > 1e-8
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_torsion_vanishes_on_gauduchon_torus(gauduchon, cos_x2, potentials):
    # partial omega only involves d a/d z1 with a independent of z2; integrating by
    # parts in zbar2 kills A for every potential.
    for phi in (cos_x2(0.05), potentials(8)):
        assert abs(fn.func_A(gauduchon, phi)) <= 1e-15
        assert fn.func_A(gauduchon, phi) == pytest.approx(fn.func_B(gauduchon, phi), abs=1e-15)


def test_potentials_must_be_real(generic):
    with pytest.raises(ValueError):
        fn.func_A(generic, constant_field(generic.grid, 1j))


# --- Mabuchi functional ----------------------------------------------------------


def test_flat_closed_form_oracle(flat, cos_x2):
    # phi = a cos(2 pi x2): g22 -> 1 - pi^2 a cos, hence L = -pi^2 a^2 / 4,
    # I = pi^2 a^2 / 2 and J = pi^2 a^2 / 4
    a = 0.04
    phi = cos_x2(a)
    assert fn.mabuchi_closed(flat, phi) == pytest.approx(-PI2 * a**2 / 4, rel=1e-12)
    assert fn.i_ay(flat, phi) == pytest.approx(PI2 * a**2 / 2, rel=1e-12)
    assert fn.j_ay(flat, phi) == pytest.approx(PI2 * a**2 / 4, rel=1e-12)
    assert fn.gap_421(flat, phi)[1] == pytest.approx(PI2 * a**2 / 4, rel=1e-12)


def test_closed_form_matches_path(generic, gauduchon, potentials):
    for m in (generic, gauduchon):
        phi = potentials(21)
        path = fn.mabuchi_path(m, fn.PathSpec.linear(0.0 * phi, phi))
        assert rel(fn.mabuchi_closed(m, phi), path) <= 1e-10


def test_path_independence(generic, potentials):
    phi1, phi2 = potentials(31), potentials(32)
    psi = random_band_limited_field(generic.grid, 3, 0.03, 33)
    lin = fn.mabuchi_pair(generic, phi1, phi2)
    for ramp in ("poly", "trig"):
        assert rel(fn.mabuchi_pair(generic, phi1, phi2, ramp, detour=psi), lin) <= 1e-9


def test_detour_needs_enough_nodes(generic, potentials):
    # a detour integrand is not polynomial in t; a 2-node rule visibly misses
    phi1, phi2 = potentials(31), potentials(32)
    psi = random_band_limited_field(generic.grid, 3, 0.03, 33)
    lin = fn.mabuchi_pair(generic, phi1, phi2)
    coarse = fn.mabuchi_pair(generic, phi1, phi2, "poly", detour=psi, nodes=2)
    assert rel(coarse, lin) > 1e-9


def test_cocycle(generic, potentials):
    p1, p2, p3 = potentials(41), potentials(42), potentials(43)
    L = lambda a, b: fn.mabuchi_pair(generic, a, b, nodes=fn.LINEAR_EXACT_NODES)  # noqa: E731
    assert abs(L(p1, p2) + L(p2, p1)) <= 1e-12
    assert abs(L(p1, p2) + L(p2, p3) + L(p3, p1)) <= 1e-12
    assert L(p1, p1) == 0.0


@pytest.mark.parametrize("C", [-1.0, 0.5, 2.0])
def test_translation(generic, gauduchon, potentials, C):
    p1, p2 = potentials(51), potentials(52)
    V = fn.volume(generic)
    shifted = fn.mabuchi_pair(generic, p1, p2 + C) - fn.mabuchi_pair(generic, p1, p2)
    assert shifted == pytest.approx(C * (1 - fn.err(generic, p2) / V), abs=1e-12)
    assert fn.mabuchi_pair(gauduchon, p2, p2 + C) == pytest.approx(C, abs=1e-12)


def test_path_spec_validation(generic, potentials):
    p = potentials(1)
    with pytest.raises(ValueError):
        fn.PathSpec(p, p, kind="spiral")
    with pytest.raises(ValueError):
        fn.PathSpec(p, p, kind="detour")
    with pytest.raises(ValueError):
        fn.PathSpec.through(p, p, p, ramp="cubic")
    with pytest.raises(ValueError):
        fn.mabuchi_pair(generic, p, p, "spiral")


@pytest.mark.parametrize("ramp", ["poly", "trig"])
def test_detour_endpoints_and_velocity(potentials, ramp):
    p1, p2, psi = potentials(1), potentials(2), potentials(3)
    path = fn.PathSpec.through(p1, p2, psi, ramp=ramp)
    assert path.potential(0.0).allclose(p1, atol=1e-15)
    assert path.potential(1.0).allclose(p2, atol=1e-15)
    # analytic velocity against a central difference
    t, h = 0.37, 1e-6
    fd = (path.potential(t + h).values - path.potential(t - h).values) / (2 * h)
    assert np.allclose(path.velocity(t).values, fd, atol=1e-8)
    for t in (0.0, 1.0):
        assert path.velocity(t).sup_norm() <= 1e-15


def test_gauss_legendre_weights():
    x, w = fn.gauss_legendre_01(24)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all((x > 0) & (x < 1))


# --- Aubin-Yau functionals -------------------------------------------------------


def test_j_bullet_methods_agree(generic, potentials):
    phi = potentials(61)
    assert rel(fn.j_bullet(generic, phi, "closed"), fn.j_bullet(generic, phi, "quadrature")) <= 1e-10
    with pytest.raises(ValueError):
        fn.j_bullet(generic, phi, "magic")


def test_j_routes_agree(generic, potentials):
    phi = potentials(62)
    assert rel(fn.j_ay(generic, phi, "mabuchi"), fn.j_ay(generic, phi, "bullet")) <= 1e-10
    with pytest.raises(ValueError):
        fn.j_ay(generic, phi, "magic")


def test_gradient_identities(generic, gauduchon, potentials):
    for m in (generic, gauduchon):
        phi = potentials(63)
        for gap in (fn.gap_418, fn.gap_421):
            lhs, rhs = gap(m, phi)
            assert rhs > 0
            assert abs(lhs - rhs) <= 1e-9 * max(abs(lhs), abs(rhs))


def test_bullet_identities_without_kahler(generic, potentials):
    phi = potentials(64)
    for gap in (fn.gap_411, fn.gap_412):
        lhs, rhs = gap(generic, phi)
        assert rel(lhs, rhs) <= 1e-9


def test_bullet_rhs_by_hand(flat, cos_x2):
    # -i ddbar phi for phi = a cos(2 pi x2) is i pi^2 a cos dz2 ^ dzbar2, so
    # (1/V) int phi (-i ddbar phi) ^ omega = mean(pi^2 a^2 cos^2) / 2 = pi^2 a^2 / 4
    a = 0.03
    lhs, rhs = fn.gap_412(flat, cos_x2(a))
    assert rhs == pytest.approx(PI2 * a**2 / 4, rel=1e-12)
    assert lhs == pytest.approx(rhs, rel=1e-12)


@settings(max_examples=6, deadline=None)
@given(seed=st.integers(0, 10**6), amp=st.floats(0.005, 0.05))
def test_inequality_chain_property(generic, seed, amp):
    from hermitian_energy.grid import normalize_sup

    phi = normalize_sup(random_band_limited_field(generic.grid, 3, amp, seed))
    I = fn.i_ay(generic, phi)
    J = fn.j_ay(generic, phi, nodes=fn.LINEAR_EXACT_NODES)
    assert I / 3 < J < 2 * I / 3


def test_aubin_yau_constants():
    assert np.allclose(fn.aubin_yau_constants(), 2.0, atol=1e-14)


# --- Kahler two-variable functionals -----------------------------------------------


def test_kahler_pair_relations(kahler, potentials):
    p1, p2 = potentials(71), potentials(72)
    I12, I21 = fn.kahler_pair_I(kahler, p1, p2), fn.kahler_pair_I(kahler, p2, p1)
    J12, J21 = fn.kahler_pair_J(kahler, p1, p2), fn.kahler_pair_J(kahler, p2, p1)
    assert rel(I12, I21) <= 1e-9
    assert rel(J12 + J21, I12) <= 1e-9
    assert fn.kahler_pair_I(kahler, p1, p1) == 0.0
    assert fn.kahler_pair_J(kahler, p1, p1) == 0.0
    z = 0.0 * p1
    assert rel(fn.i_ay(kahler, p1), fn.kahler_pair_I(kahler, z, p1)) <= 1e-10
    assert rel(fn.j_ay(kahler, p1), fn.kahler_pair_J(kahler, z, p1)) <= 1e-10


def test_kahler_pair_rejects_non_kahler(gauduchon, potentials):
    with pytest.raises(ValueError, match="Kahler"):
        fn.kahler_pair_I(gauduchon, potentials(1), potentials(2))


# --- leak accounting -------------------------------------------------------------


def test_evaluate_reports_leak(generic, potentials):
    v = fn.evaluate("mabuchi_closed", generic, potentials(81))
    assert v.value == pytest.approx(fn.mabuchi_closed(generic, potentials(81)))
    assert 0.0 <= v.imag_leak <= 1e-10 * max(1.0, abs(v.value))
    assert float(v) == v.value and v.meta["functional"] == "mabuchi_closed"
    with pytest.raises(ValueError):
        fn.evaluate("nope", generic, potentials(81))


def test_large_imaginary_part_raises():
    with pytest.raises(fn.ImaginaryLeakError):
        fn._real(1.0 + 1e-6j, "probe")
    assert fn._real(1.0 + 1e-12j, "probe") == 1.0
