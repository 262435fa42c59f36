"""Energy functionals on a Hermitian surface: volume defect, Mabuchi functional,
and Aubin-Yau functionals with their torsion corrections.

All integrals are spatial lattice integrals of (2,2)-forms.  Every manifestly
real quantity is taken as a real part; the discarded imaginary part is checked
against ``IMAG_LEAK_TOL * max(1, |value|)`` and recorded, so that a sign-
convention slip surfaces as :class:`ImaginaryLeakError` rather than a silently
wrong number.  Use :func:`evaluate` to obtain a value together with its leak.
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .forms import Form, integrate_22, is_positive_11, partial, partial_bar, wedge
from .grid import ScalarField, normalize_sup, random_band_limited_field
from .metrics import (
    DEFAULT_MARGIN,
    HermitianMetric,
    check_conditions,
    ddbar_potential,
    omega_phi,
)

__all__ = [
    "FunctionalValue",
    "ImaginaryLeakError",
    "InadmissiblePotentialError",
    "PathSpec",
    "volume",
    "reference_volume",
    "volume_phi",
    "err",
    "err_by_parts",
    "err_extremes_estimate",
    "func_A",
    "func_B",
    "mabuchi_path",
    "mabuchi_closed",
    "mabuchi_pair",
    "i_bullet",
    "j_bullet",
    "i_ay",
    "j_ay",
    "gap_411",
    "gap_412",
    "gap_418",
    "gap_421",
    "kahler_pair_I",
    "kahler_pair_J",
    "aubin_yau_constants",
    "evaluate",
    "FUNCTIONALS",
]

IMAG_LEAK_TOL = 1e-10
DEFAULT_NODES = 24
# the linear-path integrand is a polynomial of degree <= 2 in t: 2 nodes are exact
LINEAR_EXACT_NODES = 3
KAHLER_TOL = 1e-10


class ImaginaryLeakError(ArithmeticError):
    """A functional that must be real came out with a large imaginary part."""


class InadmissiblePotentialError(ValueError):
    """``omega + i ddbar phi`` failed the positivity test."""


_leaks: contextvars.ContextVar[list | None] = contextvars.ContextVar("_leaks", default=None)


def _real(z: complex, what: str) -> float:
    value, leak = float(np.real(z)), abs(float(np.imag(z)))
    if leak > IMAG_LEAK_TOL * max(1.0, abs(value)):
        raise ImaginaryLeakError(f"{what}: imaginary part {leak:.3e} on value {value:.6e}")
    log = _leaks.get()
    if log is not None:
        log.append(leak)
    return value


@dataclass(frozen=True)
class FunctionalValue:
    value: float
    imag_leak: float
    meta: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


def _require_admissible(m, phi, margin=DEFAULT_MARGIN, where="potential"):
    report = is_positive_11(omega_phi(m, phi), margin)
    if not report.positive:
        raise InadmissiblePotentialError(
            f"{where} is not admissible: min h11 = {report.min_h11:.3e}, "
            f"min det = {report.min_det:.3e} (margin {margin:g})"
        )


def _scalar(phi: ScalarField) -> Form:
    if not phi.real:
        raise ValueError("potentials must be real fields")
    return Form.from_field(phi)


def _top(form: Form, what: str) -> float:
    return _real(integrate_22(form), what)


# --- volume and Err ---------------------------------------------------------


def volume(m: HermitianMetric) -> float:
    """``V = int omega^2``."""
    v = _top(m.omega_squared, "volume")
    if v <= 0:
        raise ArithmeticError(f"non-positive volume {v}: orientation convention broken")
    return v


def reference_volume(m: HermitianMetric) -> float:
    """Lattice-independent volume when the metric carries one, else :func:`volume`."""
    return m.exact_volume if m.exact_volume is not None else volume(m)


def volume_phi(m: HermitianMetric, phi: ScalarField, check: bool = True) -> float:
    """``V(phi) = int omega_phi^2``."""
    if check:
        _require_admissible(m, phi)
    w = omega_phi(m, phi)
    return _top(wedge(w, w), "volume_phi")


def err(m: HermitianMetric, phi: ScalarField) -> float:
    """Volume defect ``V - V(phi)``."""
    return volume(m) - volume_phi(m, phi)


def err_by_parts(m: HermitianMetric, phi: ScalarField) -> float:
    """``-2i int phi ddbar omega``: the volume defect after integrating by parts twice."""
    ddbar_omega = partial(m.dbar_omega)
    return _top(-2j * (ddbar_omega * phi), "err_by_parts")


def err_extremes_estimate(
    m: HermitianMetric,
    samples: int,
    seed: int,
    band: int = 3,
    amplitude: float = 0.05,
) -> tuple[float, float]:
    """Sampled (min, max) of Err over sup-normalized admissible potentials.

    ``phi = 0`` is always part of the sample, so the bracket contains 0.  This
    estimates, and does not compute, the infimum and supremum.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    values = [0.0]
    band = min(band, m.grid.nyquist - 1)
    for k in range(samples):
        phi = normalize_sup(random_band_limited_field(m.grid, band, amplitude, seed + 7919 * k))
        try:
            values.append(err(m, phi))
        except InadmissiblePotentialError:
            continue
    return min(values), max(values)


# --- torsion functionals ------------------------------------------------------


def func_A(m: HermitianMetric, phi: ScalarField) -> float:
    """``(1/2V) int phi (-i) d'omega ^ d''phi``."""
    dbar_phi = partial_bar(_scalar(phi))
    form = -1j * wedge(m.d_omega, dbar_phi) * phi
    return _top(form, "A") / (2.0 * volume(m))


def func_B(m: HermitianMetric, phi: ScalarField) -> float:
    """``(1/2V) int phi i d''omega ^ d'phi``."""
    d_phi = partial(_scalar(phi))
    form = 1j * wedge(m.dbar_omega, d_phi) * phi
    return _top(form, "B") / (2.0 * volume(m))


# --- paths and the Mabuchi functional -----------------------------------------


def _smoothstep(t):
    return 3 * t**2 - 2 * t**3, 6 * t - 6 * t**2


def _bump(t):
    return 16 * t**2 * (1 - t) ** 2, 32 * t * (1 - t) * (1 - 2 * t)


def _trig_step(t):
    return np.sin(0.5 * np.pi * t) ** 2, 0.5 * np.pi * np.sin(np.pi * t)


def _trig_bump(t):
    return np.sin(np.pi * t) ** 2, np.pi * np.sin(2 * np.pi * t)


_RAMPS = {"poly": (_smoothstep, _bump), "trig": (_trig_step, _trig_bump)}


@dataclass(frozen=True, eq=False)
class PathSpec:
    """A smooth path of potentials from ``start`` to ``end``.

    ``kind="linear"``: ``phi_t = (1-t) start + t end``.
    ``kind="detour"``: ``phi_t = (1-s(t)) start + s(t) end + b(t) detour`` with a
    monotone ramp ``s`` (``s(0)=0``, ``s(1)=1``) and a bump ``b``
    (``b(0)=b(1)=0``), both with vanishing endpoint derivatives; ``ramp``
    selects polynomial or trigonometric shapes.  Velocities are exact
    derivatives of the parametrization.
    """

    start: ScalarField
    end: ScalarField
    kind: str = "linear"
    detour: ScalarField | None = None
    ramp: str = "poly"
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if self.kind not in ("linear", "detour"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.kind == "detour" and self.detour is None:
            raise ValueError("detour path needs a detour potential")
        if self.ramp not in _RAMPS:
            raise ValueError(f"unknown ramp {self.ramp!r}; choose from {sorted(_RAMPS)}")
        if self.nodes < 1:
            raise ValueError("need at least one quadrature node")

    @classmethod
    def linear(cls, start, end, nodes=DEFAULT_NODES) -> PathSpec:
        return cls(start, end, "linear", nodes=nodes)

    @classmethod
    def through(cls, start, end, detour, ramp="poly", nodes=DEFAULT_NODES) -> PathSpec:
        return cls(start, end, "detour", detour, ramp, nodes)

    @property
    def fields(self) -> list[ScalarField]:
        if self.kind == "linear":
            return [self.start, self.end]
        return [self.start, self.end, self.detour]

    def coefficients(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Weights of :attr:`fields` in ``phi_t`` and in its t-derivative."""
        if self.kind == "linear":
            return np.array([1 - t, t]), np.array([-1.0, 1.0])
        step, bump = _RAMPS[self.ramp]
        s, ds = step(t)
        b, db = bump(t)
        return np.array([1 - s, s, b]), np.array([-ds, ds, db])

    def potential(self, t: float) -> ScalarField:
        c, _ = self.coefficients(t)
        return sum((ck * f for ck, f in zip(c, self.fields)), 0.0 * self.start)

    def velocity(self, t: float) -> ScalarField:
        _, dc = self.coefficients(t)
        return sum((ck * f for ck, f in zip(dc, self.fields)), 0.0 * self.start)


@lru_cache(maxsize=None)
def gauss_legendre_01(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def _combine(coeffs, stack):
    return np.tensordot(coeffs, stack, axes=1)


def mabuchi_path(m: HermitianMetric, path: PathSpec, margin: float = DEFAULT_MARGIN) -> float:
    """Mabuchi functional along ``path`` by Gauss-Legendre quadrature in t.

    Integrand: ``int dphi omega_t^2 - int i d'omega ^ d''dphi * phi_t
    + int i d''omega ^ d'dphi * phi_t`` with ``omega_t = omega + i ddbar phi_t``.
    """
    grid = m.grid
    fields = path.fields
    for f in fields:
        if f.grid != grid:
            raise ValueError("grid mismatch between metric and path")
    vals = np.stack([f.values for f in fields])
    d = np.stack([partial(_scalar(f)).coeffs for f in fields])
    dbar_forms = [partial_bar(_scalar(f)) for f in fields]
    dbar = np.stack([f.coeffs for f in dbar_forms])
    ddbar = np.stack([(1j * partial(f)).coeffs for f in dbar_forms])
    V = volume(m)
    total = 0.0
    for t, w in zip(*gauss_legendre_01(path.nodes)):
        c, dc = path.coefficients(t)
        phi_t = ScalarField(grid, _combine(c, vals), real=True)
        vel = ScalarField(grid, _combine(dc, vals), real=True)
        w_t = m.omega + Form(grid, 1, 1, _combine(c, ddbar))
        report = is_positive_11(w_t, margin)
        if not report.positive:
            raise InadmissiblePotentialError(
                f"path leaves the admissible set at node t={t:.6f} "
                f"(min det {report.min_det:.3e})"
            )
        d_vel = Form(grid, 1, 0, _combine(dc, d))
        dbar_vel = Form(grid, 0, 1, _combine(dc, dbar))
        integrand = (
            wedge(w_t, w_t) * vel
            - 1j * wedge(m.d_omega, dbar_vel) * phi_t
            + 1j * wedge(m.dbar_omega, d_vel) * phi_t
        )
        total += w * _top(integrand, f"mabuchi integrand at t={t:.4f}")
    return total / V


def mabuchi_closed(m: HermitianMetric, phi: ScalarField) -> float:
    """Closed form of the Mabuchi functional ``L(0, phi)`` along ``t * phi``."""
    _require_admissible(m, phi)
    w = m.omega
    wp = omega_phi(m, phi)
    V = volume(m)
    cubic = _top((m.omega_squared + wedge(w, wp) + wedge(wp, wp)) * phi, "mabuchi cubic part")
    torsion = (func_A(m, phi) + func_B(m, phi))  # already divided by 2V
    return cubic / (3.0 * V) + torsion


def mabuchi_pair(
    m: HermitianMetric,
    phi1: ScalarField,
    phi2: ScalarField,
    path: PathSpec | str = "linear",
    detour: ScalarField | None = None,
    nodes: int = DEFAULT_NODES,
) -> float:
    """``L(phi1, phi2)`` along a linear path, a detour through ``detour``, or ``path``."""
    if isinstance(path, PathSpec):
        if path.start is not phi1 and not path.start.allclose(phi1, rtol=0, atol=0):
            raise ValueError("path does not start at phi1")
        if path.end is not phi2 and not path.end.allclose(phi2, rtol=0, atol=0):
            raise ValueError("path does not end at phi2")
        spec = path
    elif path == "linear":
        spec = PathSpec.linear(phi1, phi2, nodes)
    elif path in ("detour", "poly", "trig"):
        ramp = "poly" if path == "detour" else path
        spec = PathSpec.through(phi1, phi2, detour, ramp=ramp, nodes=nodes)
    else:
        raise ValueError(f"unknown path {path!r}")
    return mabuchi_path(m, spec)


# --- Aubin-Yau functionals ----------------------------------------------------


def i_bullet(m: HermitianMetric, phi: ScalarField) -> float:
    """``(1/V) int phi (omega^2 - omega_phi^2)``."""
    _require_admissible(m, phi)
    wp = omega_phi(m, phi)
    return _top((m.omega_squared - wedge(wp, wp)) * phi, "I_bullet") / volume(m)


def j_bullet(
    m: HermitianMetric, phi: ScalarField, method: str = "closed", nodes: int = DEFAULT_NODES
) -> float:
    """``int_0^1 I_bullet(s phi) / s ds``, by quadrature or in closed form."""
    _require_admissible(m, phi)
    V = volume(m)
    if method == "closed":
        w, wp = m.omega, omega_phi(m, phi)
        form = (2.0 / 3.0) * m.omega_squared - (1.0 / 3.0) * wedge(w, wp) - (1.0 / 3.0) * wedge(wp, wp)
        return _top(form * phi, "J_bullet") / V
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    ddbar = ddbar_potential(phi)
    total = 0.0
    for s, w in zip(*gauss_legendre_01(nodes)):
        ws = m.omega + s * ddbar
        if not is_positive_11(ws, DEFAULT_MARGIN).positive:
            raise InadmissiblePotentialError(f"s*phi is not admissible at s={s:.6f}")
        total += w * _top((m.omega_squared - wedge(ws, ws)) * phi, f"J_bullet at s={s:.4f}")
    return total / V


def i_ay(m: HermitianMetric, phi: ScalarField) -> float:
    """``I_bullet + 2A + 2B``."""
    return i_bullet(m, phi) + 2.0 * func_A(m, phi) + 2.0 * func_B(m, phi)


def j_ay(
    m: HermitianMetric, phi: ScalarField, route: str = "mabuchi", nodes: int = DEFAULT_NODES
) -> float:
    """Aubin-Yau J functional.

    ``route="mabuchi"``: ``-L(phi) + (1/V) int phi omega^2 + 2A + 2B`` with the
    Mabuchi functional integrated along the linear path.
    ``route="bullet"``: ``J_bullet + A + B`` with J_bullet by s-quadrature.
    """
    A, B = func_A(m, phi), func_B(m, phi)
    if route == "mabuchi":
        zero = 0.0 * phi
        lm = mabuchi_path(m, PathSpec.linear(zero, phi, nodes))
        mean_term = _top(m.omega_squared * phi, "int phi omega^2") / volume(m)
        return -lm + mean_term + 2.0 * A + 2.0 * B
    if route == "bullet":
        return j_bullet(m, phi, method="quadrature", nodes=nodes) + A + B
    raise ValueError(f"unknown route {route!r}")


def _gradient_energy(m: HermitianMetric, phi: ScalarField, against: Form) -> float:
    """``int i d'phi ^ d''phi ^ against``."""
    f = _scalar(phi)
    form = 1j * wedge(wedge(partial(f), partial_bar(f)), against)
    return _top(form, "gradient energy")


def gap_418(
    m: HermitianMetric, phi: ScalarField, nodes: int = DEFAULT_NODES
) -> tuple[float, float]:
    """``(2/3 I - J, (1/3V) int i d'phi ^ d''phi ^ omega_phi)``."""
    lhs = (2.0 / 3.0) * i_ay(m, phi) - j_ay(m, phi, nodes=nodes)
    rhs = _gradient_energy(m, phi, omega_phi(m, phi)) / (3.0 * volume(m))
    return lhs, rhs


def gap_421(
    m: HermitianMetric, phi: ScalarField, nodes: int = DEFAULT_NODES
) -> tuple[float, float]:
    """``(3J - I, (1/V) int i d'phi ^ d''phi ^ omega)``."""
    lhs = 3.0 * j_ay(m, phi, nodes=nodes) - i_ay(m, phi)
    rhs = _gradient_energy(m, phi, m.omega) / volume(m)
    return lhs, rhs


def gap_411(
    m: HermitianMetric, phi: ScalarField, nodes: int = DEFAULT_NODES
) -> tuple[float, float]:
    """``(2/3 I_bullet - J_bullet, (1/3V) int phi (-i ddbar phi) ^ omega_phi)``."""
    lhs = (2.0 / 3.0) * i_bullet(m, phi) - j_bullet(m, phi, method="quadrature", nodes=nodes)
    rhs = _top(-1.0 * wedge(ddbar_potential(phi), omega_phi(m, phi)) * phi, "(4.11) rhs")
    return lhs, rhs / (3.0 * volume(m))


def gap_412(
    m: HermitianMetric, phi: ScalarField, nodes: int = DEFAULT_NODES
) -> tuple[float, float]:
    """``(3 J_bullet - I_bullet, (1/V) int phi (-i ddbar phi) ^ omega)``."""
    lhs = 3.0 * j_bullet(m, phi, method="quadrature", nodes=nodes) - i_bullet(m, phi)
    rhs = _top(-1.0 * wedge(ddbar_potential(phi), m.omega) * phi, "(4.12) rhs")
    return lhs, rhs / volume(m)


def _require_kahler(m: HermitianMetric):
    residual = check_conditions(m).cond3_residual
    if residual > KAHLER_TOL:
        raise ValueError(
            f"two-variable Aubin-Yau functionals need a Kahler metric (|d omega| = {residual:.3e})"
        )


def kahler_pair_I(m: HermitianMetric, phi1: ScalarField, phi2: ScalarField) -> float:
    """``(1/V) int (phi2 - phi1)(omega_phi1^2 - omega_phi2^2)`` on a Kahler metric."""
    _require_kahler(m)
    _require_admissible(m, phi1)
    _require_admissible(m, phi2)
    w1, w2 = omega_phi(m, phi1), omega_phi(m, phi2)
    form = (wedge(w1, w1) - wedge(w2, w2)) * (phi2 - phi1)
    return _top(form, "I(phi1, phi2)") / volume(m)


def kahler_pair_J(
    m: HermitianMetric,
    phi1: ScalarField,
    phi2: ScalarField,
    path: PathSpec | str = "linear",
    detour: ScalarField | None = None,
) -> float:
    """``-L(phi1, phi2) + (1/V) int (phi2 - phi1) omega_phi1^2`` on a Kahler metric."""
    _require_kahler(m)
    w1 = omega_phi(m, phi1)
    lm = mabuchi_pair(m, phi1, phi2, path=path, detour=detour)
    return -lm + _top(wedge(w1, w1) * (phi2 - phi1), "J(phi1, phi2)") / volume(m)


def aubin_yau_constants() -> np.ndarray:
    """Solve the linear constraints on the torsion weights ``(a, b, c, d)``.

    Requiring both Aubin-Yau identities to close gives
    ``2a/3 - (c-1) - 1/3 = 0``, ``2b/3 - (d-1) - 1/3 = 0``,
    ``3(c-1) - a - 1 = 0`` and ``3(d-1) - b - 1 = 0``.
    """
    A = np.array(
        [
            [2 / 3, 0, -1, 0],
            [0, 2 / 3, 0, -1],
            [-1, 0, 3, 0],
            [0, -1, 0, 3],
        ]
    )
    rhs = np.array([1 / 3 - 1, 1 / 3 - 1, 1 + 3, 1 + 3])
    return np.linalg.solve(A, rhs)


FUNCTIONALS = {
    "volume": lambda m, phi: volume(m),
    "volume_phi": volume_phi,
    "err": err,
    "func_A": func_A,
    "func_B": func_B,
    "mabuchi_closed": mabuchi_closed,
    "mabuchi_path": lambda m, phi: mabuchi_path(m, PathSpec.linear(0.0 * phi, phi)),
    "i_bullet": i_bullet,
    "j_bullet": j_bullet,
    "i_ay": i_ay,
    "j_ay": j_ay,
}


def evaluate(name: str, m: HermitianMetric, phi: ScalarField) -> FunctionalValue:
    """Evaluate a named functional, reporting the largest discarded imaginary part."""
    try:
        func = FUNCTIONALS[name]
    except KeyError:
        raise ValueError(f"unknown functional {name!r}; choose from {sorted(FUNCTIONALS)}") from None
    log: list[float] = []
    token = _leaks.set(log)
    try:
        value = func(m, phi)
    finally:
        _leaks.reset(token)
    return FunctionalValue(
        value=float(value),
        imag_leak=max(log, default=0.0),
        meta={"functional": name, "V": volume(m), "metric": m.label},
    )
