"""Hermitian metrics on the torus testbed, admissible potentials, metric
conditions, and a numerical solver for the Gauduchon conformal factor.

A metric is stored through its component fields ``g_{j kbar}``; the associated
real (1,1)-form is ``omega = i g_{j kbar} dz^j ^ dzbar^k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse.linalg as spla

from .forms import (
    Form,
    PositivityReport,
    TOP_FORM_VOLUME,
    is_positive_11,
    partial,
    partial_bar,
    wedge,
)
from .grid import (
    Grid,
    ScalarField,
    _complex_multiplier,
    constant_field,
    random_band_limited_field,
)

__all__ = [
    "HermitianMetric",
    "ConditionReport",
    "GauduchonFactor",
    "GauduchonSolveError",
    "flat_kahler_metric",
    "gauduchon_torus_metric",
    "generic_hermitian_metric",
    "kahler_potential_metric",
    "check_conditions",
    "ddbar_potential",
    "omega_phi",
    "is_admissible",
    "gauduchon_operator",
    "gauduchon_residual",
    "solve_gauduchon_factor",
    "PROFILES",
]

MIN_METRIC_DET = 1e-6
DEFAULT_MARGIN = 1e-6


@dataclass(frozen=True, eq=False)
class HermitianMetric:
    """Component fields ``g11``, ``g22`` (real) and ``g12`` (complex); ``g21 = conj(g12)``.

    ``exact_volume`` is an optional high-accuracy reference for ``int omega^2``
    that does not depend on the lattice (used by convergence studies).
    """

    g11: ScalarField
    g12: ScalarField
    g22: ScalarField
    label: str = "metric"
    exact_volume: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.g11.real and self.g22.real):
            raise ValueError("diagonal metric components must be real")
        if not (self.g11.grid == self.g12.grid == self.g22.grid):
            raise ValueError("metric components live on different grids")
        report = is_positive_11(self.omega, 0.0)
        if report.min_det < MIN_METRIC_DET or report.min_h11 <= 0:
            raise ValueError(
                f"metric is not positive definite: min g11 = {report.min_h11:.3e}, "
                f"min det = {report.min_det:.3e}"
            )

    @property
    def grid(self) -> Grid:
        return self.g11.grid

    @property
    def g21(self) -> ScalarField:
        return self.g12.conj()

    @cached_property
    def omega(self) -> Form:
        return Form.from_components(
            self.grid,
            1,
            1,
            {
                ((1,), (1,)): 1j * self.g11,
                ((1,), (2,)): 1j * self.g12,
                ((2,), (1,)): 1j * self.g21,
                ((2,), (2,)): 1j * self.g22,
            },
        )

    @cached_property
    def d_omega(self) -> Form:
        """The (2,1)-form ``partial omega``."""
        return partial(self.omega)

    @cached_property
    def dbar_omega(self) -> Form:
        """The (1,2)-form ``partial_bar omega``."""
        return partial_bar(self.omega)

    @cached_property
    def omega_squared(self) -> Form:
        return wedge(self.omega, self.omega)

    @cached_property
    def det(self) -> ScalarField:
        return (self.g11 * self.g22 - self.g12 * self.g21).as_real()

    def positivity(self, margin: float = 0.0) -> PositivityReport:
        return is_positive_11(self.omega, margin)

    def scaled(self, c: float) -> HermitianMetric:
        if c <= 0:
            raise ValueError("scale factor must be positive")
        vol = None if self.exact_volume is None else c**2 * self.exact_volume
        return HermitianMetric(
            c * self.g11, c * self.g12, c * self.g22, f"{c}*{self.label}", vol, dict(self.params)
        )

    def conformal(self, u: ScalarField, label: str | None = None) -> HermitianMetric:
        """The metric ``u * g`` for a positive real function ``u``."""
        if not u.real:
            raise ValueError("conformal factor must be real")
        return HermitianMetric(
            u * self.g11,
            u * self.g12,
            u * self.g22,
            label or f"u*{self.label}",
            None,
            dict(self.params),
        )


def flat_kahler_metric(grid: Grid) -> HermitianMetric:
    one = constant_field(grid, 1.0)
    return HermitianMetric(
        one, constant_field(grid, 0j), one, "flat", exact_volume=8.0, params={"family": "flat"}
    )


def _sin_profile(x1, y1):
    return np.sin(2 * np.pi * x1) + 0 * y1


def _exp_profile(x1, y1):
    # smooth, not band-limited, sup 1
    return np.exp(2.0 * (np.sin(2 * np.pi * x1) - 1.0)) + 0 * y1


def _twisted_profile(x1, y1):
    return np.cos(2 * np.pi * x1) * np.exp(2j * np.pi * y1)


PROFILES = {"sin": _sin_profile, "exp": _exp_profile, "twisted": _twisted_profile}

_REFERENCE_POINTS = 512


def _profile_function(profile):
    if callable(profile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(
            f"unknown profile {profile!r}; choose from {sorted(PROFILES)} or pass a callable"
        ) from None


def gauduchon_torus_metric(
    grid: Grid, amplitude: float = 0.3, profile="sin"
) -> HermitianMetric:
    """Gauduchon, non-Kahler metric ``g11 = g22 = 1``, ``g12 = amplitude * a(x1, y1)``.

    ``profile`` names a unit-sup function of ``(x1, y1)`` (see ``PROFILES``) or is
    a callable ``a(x1, y1)``.  Since ``g12`` does not depend on ``z^2``,
    ``partial partial_bar omega`` vanishes identically while ``d omega`` does not.
    """
    if not 0 <= amplitude < 1:
        raise ValueError(f"amplitude {amplitude} must lie in [0, 1) to keep positivity")
    func = _profile_function(profile)
    x1, y1, _, _ = grid.coordinates
    a = amplitude * np.broadcast_to(func(x1, y1), (grid.n, grid.n, 1, 1))
    a = np.broadcast_to(a, grid.shape)
    # 2D reference quadrature for int |a|^2, independent of the lattice size
    t = np.arange(_REFERENCE_POINTS) / _REFERENCE_POINTS
    ref = amplitude * func(t[:, None], t[None, :])
    exact = 8.0 * (1.0 - float(np.mean(np.abs(ref) ** 2)))
    one = constant_field(grid, 1.0)
    name = profile if isinstance(profile, str) else getattr(profile, "__name__", "custom")
    return HermitianMetric(
        one,
        ScalarField(grid, a.astype(np.complex128), real=False),
        one,
        f"gauduchon_torus({amplitude}, {name})",
        exact_volume=exact,
        params={"family": "gauduchon_torus", "amplitude": amplitude, "profile": name},
    )


def generic_hermitian_metric(
    grid: Grid, seed: int = 7, amplitude: float = 0.1, band: int = 2
) -> HermitianMetric:
    """``g11 = 1 + e1``, ``g22 = 1 + e2``, ``g12 = e3`` with random band-limited ``e_i``."""
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    band = min(band, grid.nyquist - 1)
    e1 = random_band_limited_field(grid, band, amplitude, 3 * seed + 1)
    e2 = random_band_limited_field(grid, band, amplitude, 3 * seed + 2)
    e3 = random_band_limited_field(grid, band, amplitude, 3 * seed + 3, real_valued=False)
    try:
        m = HermitianMetric(
            1.0 + e1,
            e3,
            1.0 + e2,
            f"generic(seed={seed}, {amplitude})",
            params={"family": "generic", "seed": seed, "amplitude": amplitude, "band": band},
        )
    except ValueError as exc:
        raise ValueError(f"generic metric lost positivity: {exc}") from None
    # band-limited: the lattice sum of det g is exact when 2*band < n
    return HermitianMetric(
        m.g11, m.g12, m.g22, m.label, 8.0 * float(np.mean(m.det.values)), m.params
    )


def ddbar_potential(phi: ScalarField) -> Form:
    """The real (1,1)-form ``i partial partial_bar phi``."""
    if not phi.real:
        raise ValueError("potential must be real")
    return 1j * partial(partial_bar(Form.from_field(phi)))


def kahler_potential_metric(
    grid: Grid, seed: int = 3, amplitude: float = 0.02, band: int = 2
) -> HermitianMetric:
    """Non-flat Kahler metric ``omega_0 + i partial partial_bar psi`` for a random ``psi``."""
    band = min(band, grid.nyquist - 1)
    psi = random_band_limited_field(grid, band, amplitude, seed)
    h = -1j * ddbar_potential(psi).coeffs
    g11 = ScalarField(grid, 1.0 + h[0], real=True)
    g22 = ScalarField(grid, 1.0 + h[3], real=True)
    g12 = ScalarField(grid, h[1], real=False)
    m = HermitianMetric(
        g11, g12, g22, f"kahler_potential(seed={seed}, {amplitude})",
        params={"family": "kahler_potential", "seed": seed, "amplitude": amplitude},
    )
    return HermitianMetric(m.g11, m.g12, m.g22, m.label, 8.0 * float(np.mean(m.det.values)), m.params)


@dataclass(frozen=True)
class ConditionReport:
    """Sup-norm residuals of the defining forms of the metric conditions.

    ``cond11_signed`` is the minimum and ``cond12_signed`` the maximum of the
    density of ``i partial partial_bar omega`` with respect to the Euclidean
    volume; at n = 2 the term ``i partial omega ^ partial_bar omega`` has
    bidegree (3,3) and vanishes, so Condition 1.1 holds iff ``cond11_signed >= 0``
    and Condition 1.2 iff ``cond12_signed <= 0``.
    """

    cond2_residual: float
    cond3_residual: float
    cond4_residual: float
    cond11_signed: float
    cond12_signed: float

    def holds(self, name: str, tol: float = 1e-10) -> bool:
        checks = {
            "1.1": self.cond11_signed >= -tol,
            "1.2": self.cond12_signed <= tol,
            "2": self.cond2_residual <= tol,
            "3": self.cond3_residual <= tol,
            "4": self.cond4_residual <= tol,
        }
        return checks[name]


def check_conditions(m: HermitianMetric) -> ConditionReport:
    ddbar_omega = partial(m.dbar_omega)
    ddbar_omega2 = partial(partial_bar(m.omega_squared))  # (3,3): always zero on a surface
    density = (TOP_FORM_VOLUME * 1j * ddbar_omega.coeffs[0]).real
    return ConditionReport(
        cond2_residual=max(ddbar_omega.sup_norm(), ddbar_omega2.sup_norm()),
        cond3_residual=max(m.d_omega.sup_norm(), m.dbar_omega.sup_norm()),
        cond4_residual=ddbar_omega.sup_norm(),
        cond11_signed=float(density.min()),
        cond12_signed=float(density.max()),
    )


def omega_phi(m: HermitianMetric, phi: ScalarField) -> Form:
    """``omega + i partial partial_bar phi``."""
    if phi.grid != m.grid:
        raise ValueError("grid mismatch between metric and potential")
    return m.omega + ddbar_potential(phi)


def is_admissible(m: HermitianMetric, phi: ScalarField, margin: float = DEFAULT_MARGIN) -> bool:
    return is_positive_11(omega_phi(m, phi), margin).positive


# --- Gauduchon factor -------------------------------------------------------


class GauduchonSolveError(RuntimeError):
    """The Gauduchon factor solve did not converge or produced a non-positive factor."""


@dataclass(frozen=True)
class GauduchonFactor:
    u: ScalarField
    residual: float
    iterations: int
    metric: HermitianMetric


def _mixed_symbol(n: int, k: int, l: int) -> np.ndarray:
    return _complex_multiplier(n, k, False) * _complex_multiplier(n, l, True)


def gauduchon_operator(m: HermitianMetric):
    """Return ``L`` with ``L(u)`` = density of ``i partial partial_bar (u omega)``.

    The density is taken with respect to ``dx1 dy1 dx2 dy2``.  Only the
    ``dz1^dzbar1^dz2^dzbar2`` term survives, giving
    ``4 [D2 D2b (u g11) + D1 D1b (u g22) - D2 D1b (u g12) - D1 D2b (u g21)]``.
    """
    n = m.grid.n
    terms = [
        (m.g11.values, _mixed_symbol(n, 2, 2), 4.0),
        (m.g22.values, _mixed_symbol(n, 1, 1), 4.0),
        (m.g12.values, _mixed_symbol(n, 2, 1), -4.0),
        (m.g21.values, _mixed_symbol(n, 1, 2), -4.0),
    ]

    def apply(u: np.ndarray) -> np.ndarray:
        spec = 0
        for g, symbol, c in terms:
            spec = spec + c * symbol * np.fft.fftn(u * g)
        return np.fft.ifftn(spec).real

    return apply


def gauduchon_residual(m: HermitianMetric, u: ScalarField) -> float:
    """Sup-norm of the density of ``partial partial_bar (u omega)``, via the form calculus."""
    ddbar = partial(partial_bar(m.omega * u))
    return float(np.max(np.abs(TOP_FORM_VOLUME * ddbar.coeffs[0])))


def solve_gauduchon_factor(
    m: HermitianMetric, tol: float = 1e-10, max_iter: int = 20
) -> GauduchonFactor:
    """Find ``u > 0`` with mean 1 such that ``partial partial_bar (u omega) = 0``.

    Writing ``u = 1 + v`` with ``v`` of zero mean, the consistent singular
    system ``L v = -L 1`` is solved by GMRES, preconditioned with the exact
    inverse of the constant-coefficient operator built from the mean metric.
    Modes on which that operator vanishes (every axis at wavenumber 0 or
    Nyquist) are annihilated by ``L`` and excluded.  Outer refinement sweeps
    recompute the true residual until its sup-norm drops below ``tol``.
    """
    grid = m.grid
    n = grid.n
    L = gauduchon_operator(m)

    means = {key: complex(np.mean(g.values)) for key, g in
             (("11", m.g11), ("22", m.g22), ("12", m.g12), ("21", m.g21))}
    symbol = 4.0 * (
        means["11"] * _mixed_symbol(n, 2, 2)
        + means["22"] * _mixed_symbol(n, 1, 1)
        - means["12"] * _mixed_symbol(n, 2, 1)
        - means["21"] * _mixed_symbol(n, 1, 2)
    )
    active = np.abs(symbol) > 1e-12 * np.max(np.abs(symbol))
    inv_symbol = np.zeros(grid.shape, dtype=np.complex128)
    inv_symbol[active] = 1.0 / symbol[active]

    def project(v):
        return v - np.mean(v)

    def precondition(r):
        return np.fft.ifftn(np.fft.fftn(r) * inv_symbol).real

    size = grid.size
    shape = grid.shape
    A = spla.LinearOperator(
        (size, size), matvec=lambda x: L(project(x.reshape(shape))).ravel(), dtype=np.float64
    )
    M = spla.LinearOperator(
        (size, size), matvec=lambda x: precondition(x.reshape(shape)).ravel(), dtype=np.float64
    )

    u = np.ones(shape)
    residual = float(np.max(np.abs(L(u))))
    iterations = 0
    while residual > tol and iterations < max_iter:
        r = L(u)
        delta, info = spla.gmres(A, -r.ravel(), rtol=1e-13, atol=0.0, restart=60, maxiter=20, M=M)
        if info < 0:
            raise GauduchonSolveError(f"GMRES breakdown (info={info})")
        u = u + project(delta.reshape(shape))
        iterations += 1
        residual = float(np.max(np.abs(L(u))))
    if residual > tol:
        raise GauduchonSolveError(
            f"no convergence after {iterations} sweeps: residual {residual:.3e} > tol {tol:.1e}"
        )
    if np.min(u) <= 0:
        raise GauduchonSolveError(f"conformal factor not positive: min u = {np.min(u):.3e}")
    u_field = ScalarField(grid, u, real=True)
    return GauduchonFactor(
        u=u_field,
        residual=gauduchon_residual(m, u_field),
        iterations=iterations,
        metric=m.conformal(u_field, f"gauduchon[{m.label}]"),
    )
