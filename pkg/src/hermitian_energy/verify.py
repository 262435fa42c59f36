"""Property harness: seeded scenarios, one check per identity, deterministic reports.

A :class:`Scenario` fixes the lattice, a metric family and the potential family;
:func:`run_check` evaluates one named property on it and returns a
:class:`CheckResult` holding both sides, the residual and the tolerance.
Checks never raise: construction failures and numerical aborts become failed
results carrying the reason.

Several checks combine sub-residuals with different tolerances.  Each part is
rescaled to the check tolerance (``part / part_tol * tol``) before taking the
maximum, so ``passed <=> residual <= tol`` still holds and the raw parts are
kept in ``detail``.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import functionals as fn
from .forms import Form, integrate_22, partial, partial_bar, random_form, wedge
from .grid import (
    ScalarField,
    build_grid,
    field_from_function,
    normalize_sup,
    random_band_limited_field,
)
from .metrics import (
    HermitianMetric,
    check_conditions,
    flat_kahler_metric,
    gauduchon_residual,
    gauduchon_torus_metric,
    generic_hermitian_metric,
    is_admissible,
    kahler_potential_metric,
    solve_gauduchon_factor,
)

__all__ = [
    "CHECK_NAMES",
    "COVERAGE",
    "METRIC_FAMILIES",
    "CheckResult",
    "Report",
    "Scenario",
    "applicable",
    "convergence_study",
    "run_check",
    "run_suite",
    "suite_scenarios",
    "worker_count",
]

CHECK_NAMES = (
    "path_independence",
    "closed_vs_path",
    "cocycle_antisym",
    "cocycle_triple",
    "translation",
    "err_gauduchon_zero",
    "err_extremes",
    "identity_418",
    "identity_421",
    "inequality_chain",
    "kahler_reduction",
    "bullet_identities",
    "gauduchon_solver",
    "stokes_parity",
    "condition_table",
)

METRIC_FAMILIES = ("flat", "kahler_potential", "gauduchon_torus", "generic", "generic_gauduchon")
PHI_FAMILIES = ("random", "cosine")
GAUDUCHON_FAMILIES = ("flat", "kahler_potential", "gauduchon_torus", "generic_gauduchon")
KAHLER_FAMILIES = ("flat", "kahler_potential")

# families each check runs on in the default suite
SUITE_FAMILIES = {
    "path_independence": ("flat", "gauduchon_torus", "generic"),
    "closed_vs_path": ("flat", "gauduchon_torus", "generic"),
    "cocycle_antisym": ("flat", "gauduchon_torus", "generic"),
    "cocycle_triple": ("flat", "gauduchon_torus", "generic"),
    "translation": ("flat", "gauduchon_torus", "generic"),
    "err_gauduchon_zero": ("gauduchon_torus", "generic_gauduchon"),
    "err_extremes": ("flat", "gauduchon_torus", "generic"),
    "identity_418": ("flat", "gauduchon_torus", "generic"),
    "identity_421": ("flat", "gauduchon_torus", "generic"),
    "inequality_chain": ("flat", "gauduchon_torus", "generic"),
    "kahler_reduction": ("flat",),
    "bullet_identities": ("gauduchon_torus", "generic"),
    "gauduchon_solver": ("gauduchon_torus", "generic"),
    "stokes_parity": ("flat",),
    "condition_table": ("flat", "kahler_potential", "gauduchon_torus", "generic"),
}

# statement of each property -> check that exercises it, or an out-of-scope note
COVERAGE = {
    "volume defect vanishes at phi = 0": "err_gauduchon_zero",
    "volume defect vanishes on Gauduchon surfaces": "err_gauduchon_zero",
    "sampled inf/sup of the volume defect bracket zero": "err_extremes",
    "signed curvature conditions force a one-sided volume defect": (
        "condition_table (only the Gauduchon case is reachable on a torus: the "
        "density of i ddbar omega integrates to zero)"
    ),
    "every conformal class contains a Gauduchon metric, unique up to scale": "gauduchon_solver",
    "Kahler implies Gauduchon": "condition_table",
    "graded Leibniz and Stokes rules for forms": "stokes_parity",
    "Mabuchi functional is path independent": "path_independence",
    "closed form of the Mabuchi functional along t * phi": "closed_vs_path",
    "Mabuchi functional reduces to the classical one on Kahler metrics": "kahler_reduction",
    "Mabuchi functional is a 1-cocycle": "cocycle_antisym, cocycle_triple",
    "Mabuchi functional under phi -> phi + C": "translation",
    "two-variable Aubin-Yau relations on Kahler metrics": "kahler_reduction",
    "bullet functional identities hold without the Kahler condition": "bullet_identities",
    "J equals J_bullet plus the torsion functionals": "identity_418",
    "2/3 I - J equals a gradient energy against omega_phi": "identity_418",
    "3J - I equals a gradient energy against omega": "identity_421",
    "torsion weights are uniquely a = b = c = d = 2": "run_suite (solved at start-up)",
    "I/3 <= J <= 2I/3 on any compact complex surface": "inequality_chain",
    "general dimension n": "out of scope: surfaces only",
    "non-torus surfaces": "out of scope: periodic lattice only",
    "exact inf/sup of the volume defect": "out of scope: sampled estimate only",
    "minimisation or flows of the functionals": "out of scope",
}

IDENTITY_REL = 1e-9
CLOSED_REL = 1e-10
METHOD_REL = 1e-10
ZERO_ABS = 1e-12
# sup of a curvature form below which a condition counts as satisfied
CONDITION_TOL = 1e-9
FORMS_REL = 1e-12
SIGN_SLACK = 1e-12
CHAIN_SLACK = 1e-10
CHAIN_SEPARATION = 1e-8
POSITIVITY_MARGIN = 1e-6
DETOUR_SCALE = 0.6
SCALE_FACTOR = 2.0
TRANSLATIONS = (-1.0, 0.5, 2.0)


class ScenarioError(ValueError):
    """Invalid scenario parameters."""


@dataclass(frozen=True)
class Scenario:
    """Everything a check needs; fully deterministic given its fields."""

    n: int = 16
    metric_family: str = "generic"
    metric_amplitude: float | None = None
    metric_seed: int = 7
    metric_profile: str = "sin"
    phi_family: str = "random"
    phi_band: int = 3
    phi_amplitude: float = 0.05
    phi_seed: int = 11
    normalize_sup: bool = True
    samples: int = 20
    path_kind: str = "both"
    detour_seed: int = 101
    nodes: int = fn.DEFAULT_NODES
    identity_rel: float = IDENTITY_REL
    positivity_margin: float = POSITIVITY_MARGIN

    def __post_init__(self):
        if self.metric_family not in METRIC_FAMILIES:
            raise ScenarioError(f"unknown metric family {self.metric_family!r}")
        if self.phi_family not in PHI_FAMILIES:
            raise ScenarioError(f"unknown potential family {self.phi_family!r}")
        if self.path_kind not in ("linear", "poly", "trig", "both"):
            raise ScenarioError(f"unknown path kind {self.path_kind!r}")
        if self.samples < 1 or self.nodes < 2:
            raise ScenarioError("samples must be >= 1 and nodes >= 2")

    @property
    def fingerprint(self) -> str:
        amp = self.metric_amplitude
        if amp is None:
            amp = _DEFAULT_AMPLITUDE.get(self.metric_family, 0.0)
        metric = f"{self.metric_family}(amp={amp},seed={self.metric_seed},profile={self.metric_profile})"
        phi = (
            f"{self.phi_family}(band={self.phi_band},amp={self.phi_amplitude},"
            f"seed={self.phi_seed},sup0={int(self.normalize_sup)},k={self.samples})"
        )
        return f"n={self.n};metric={metric};phi={phi};path={self.path_kind}/{self.detour_seed};Q={self.nodes}"

    def metric(self) -> HermitianMetric:
        return _build_metric(self.n, self.metric_family, self.metric_amplitude,
                             self.metric_seed, self.metric_profile)

    def potential(self, k: int = 0) -> ScalarField:
        """The ``k``-th potential of the scenario, checked for admissibility."""
        grid = build_grid(self.n)
        seed = self.phi_seed + k
        if self.phi_family == "random":
            band = min(self.phi_band, grid.nyquist - 1)
            phi = random_band_limited_field(grid, band, self.phi_amplitude, seed)
        else:
            phase = 2 * np.pi * np.random.default_rng(seed).random()
            amp = self.phi_amplitude
            phi = field_from_function(
                grid, lambda x1, y1, x2, y2: amp * np.cos(2 * np.pi * x2 + phase), real=True
            )
        if self.normalize_sup:
            phi = normalize_sup(phi)
        if not is_admissible(self.metric(), phi, self.positivity_margin):
            raise fn.InadmissiblePotentialError(f"potential #{k} (seed {seed}) is not admissible")
        return phi

    def detour(self) -> ScalarField:
        grid = build_grid(self.n)
        band = min(self.phi_band, grid.nyquist - 1)
        return random_band_limited_field(grid, band, DETOUR_SCALE * self.phi_amplitude, self.detour_seed)


_DEFAULT_AMPLITUDE = {"gauduchon_torus": 0.3, "generic": 0.1, "generic_gauduchon": 0.1,
                      "kahler_potential": 0.02}


@lru_cache(maxsize=32)
def _build_metric(n, family, amplitude, seed, profile) -> HermitianMetric:
    grid = build_grid(n)
    amp = _DEFAULT_AMPLITUDE.get(family, 0.0) if amplitude is None else amplitude
    if family == "flat":
        return flat_kahler_metric(grid)
    if family == "kahler_potential":
        return kahler_potential_metric(grid, seed=seed, amplitude=amp)
    if family == "gauduchon_torus":
        return gauduchon_torus_metric(grid, amplitude=amp, profile=profile)
    base = generic_hermitian_metric(grid, seed=seed, amplitude=amp)
    if family == "generic":
        return base
    return solve_gauduchon_factor(base).metric


@dataclass
class CheckResult:
    check: str
    scenario: str
    lhs: float
    rhs: float
    residual: float
    tol: float
    passed: bool
    detail: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def row(self) -> dict:
        """Report entry; wall time is left out so reports are reproducible."""
        return {
            "check": self.check,
            "scenario": self.scenario,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "tol": self.tol,
            "pass": self.passed,
            "detail": self.detail,
        }


@dataclass
class Report:
    results: list[CheckResult]
    constants: list[float]
    timing: dict[str, float]

    @property
    def failures(self) -> int:
        return sum(not r.passed for r in self.results)

    @property
    def ok(self) -> bool:
        return self.failures == 0


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    diff = abs(a - b)
    return diff / scale if scale > 1e-14 else diff


def _combine(parts: dict[str, tuple[float, float]], tol: float) -> tuple[float, dict]:
    """Residual of several ``(value, tolerance)`` parts, expressed on the scale of ``tol``."""
    residual = max(value / part_tol * tol for value, part_tol in parts.values())
    return residual, {name: value for name, (value, _) in parts.items()}


def _result(name, s, lhs, rhs, residual, tol, detail=None) -> CheckResult:
    residual = float(residual)
    return CheckResult(name, s.fingerprint, float(lhs), float(rhs), residual, float(tol),
                       bool(residual <= tol), detail or {})


# --- checks -------------------------------------------------------------------


def _check_path_independence(s: Scenario):
    m = s.metric()
    phi1, phi2, psi = s.potential(0), s.potential(1), s.detour()
    values = {"linear": fn.mabuchi_pair(m, phi1, phi2, nodes=s.nodes)}
    ramps = {"both": ("poly", "trig"), "linear": (), "poly": ("poly",), "trig": ("trig",)}
    for ramp in ramps[s.path_kind]:
        values[ramp] = fn.mabuchi_pair(m, phi1, phi2, ramp, detour=psi, nodes=s.nodes)
    lin = values["linear"]
    worst = max(_rel(lin, v) for v in values.values())
    far = max(values.values(), key=lambda v: abs(v - lin))
    return lin, far, worst, s.identity_rel, values


def _check_closed_vs_path(s: Scenario):
    m = s.metric()
    phi = s.potential(0)
    closed = fn.mabuchi_closed(m, phi)
    path = fn.mabuchi_path(m, fn.PathSpec.linear(0.0 * phi, phi, s.nodes))
    return closed, path, _rel(closed, path), CLOSED_REL, {}


def _triples(s: Scenario):
    for k in range(max(1, s.samples // 2)):
        yield s.potential(3 * k), s.potential(3 * k + 1), s.potential(3 * k + 2)


def _pair(m, a, b):
    return fn.mabuchi_pair(m, a, b, nodes=fn.LINEAR_EXACT_NODES)


def _check_cocycle_antisym(s: Scenario):
    m = s.metric()
    worst, lhs, rhs = 0.0, 0.0, 0.0
    for phi1, phi2, _ in _triples(s):
        fwd, back = _pair(m, phi1, phi2), _pair(m, phi2, phi1)
        res = abs(fwd + back) / max(1.0, abs(fwd), abs(back))
        if res >= worst:
            worst, lhs, rhs = res, fwd, -back
    return lhs, rhs, worst, s.identity_rel, {"triples": max(1, s.samples // 2)}


def _check_cocycle_triple(s: Scenario):
    m = s.metric()
    worst, total_at_worst, scale_at_worst = 0.0, 0.0, 0.0
    for phi1, phi2, phi3 in _triples(s):
        terms = (_pair(m, phi1, phi2), _pair(m, phi2, phi3), _pair(m, phi3, phi1))
        total = sum(terms)
        scale = max(1.0, *(abs(t) for t in terms))
        if abs(total) / scale >= worst:
            worst, total_at_worst, scale_at_worst = abs(total) / scale, total, scale
    return total_at_worst, 0.0, worst, s.identity_rel, {"scale": scale_at_worst}


def _check_translation(s: Scenario):
    m = s.metric()
    phi1, phi2 = s.potential(0), s.potential(1)
    V = fn.volume(m)
    defect = fn.err(m, phi2)
    base = _pair(m, phi1, phi2)
    gauduchon = check_conditions(m).cond4_residual <= CONDITION_TOL
    worst, lhs, rhs = 0.0, 0.0, 0.0
    detail = {}
    for C in TRANSLATIONS:
        shifted = _pair(m, phi1, phi2 + C) - base
        expected = C * (1.0 - defect / V)
        res = abs(shifted - expected)
        if gauduchon:
            own = _pair(m, phi2, phi2 + C)
            res = max(res, abs(own - C))
            detail[f"L(phi,phi+{C:g})"] = own
        detail[f"C={C:g}"] = shifted
        if res >= worst:
            worst, lhs, rhs = res, shifted, expected
    return lhs, rhs, worst, s.identity_rel, detail


def _require_family(s: Scenario, families, what):
    if s.metric_family not in families:
        raise ScenarioError(f"{what} needs a metric family in {families}, got {s.metric_family!r}")


def _check_err_gauduchon_zero(s: Scenario):
    _require_family(s, GAUDUCHON_FAMILIES, "err_gauduchon_zero")
    m = s.metric()
    V = fn.volume(m)
    ref = fn.reference_volume(m)
    worst, worst_err, worst_vol = 0.0, 0.0, V
    for k in range(s.samples):
        phi = s.potential(k)
        vol = fn.volume_phi(m, phi)
        res = max(abs(V - vol) / V, abs(vol - ref) / ref)
        if res >= worst:
            worst, worst_err, worst_vol = res, V - vol, vol
    return worst_vol, ref, worst, s.identity_rel, {"err": worst_err, "V": V, "V_ref": ref}


def _check_err_extremes(s: Scenario):
    m = s.metric()
    V = fn.volume(m)
    lo, hi = fn.err_extremes_estimate(
        m, samples=s.samples, seed=s.phi_seed, band=s.phi_band, amplitude=s.phi_amplitude
    )
    parts = {"bracket": (max(0.0, lo, -hi), s.identity_rel)}
    if s.metric_family in GAUDUCHON_FAMILIES:
        parts["gauduchon_zero"] = (max(abs(lo), abs(hi)) / V, s.identity_rel)
    residual, detail = _combine(parts, s.identity_rel)
    return lo, hi, residual, s.identity_rel, detail


def _identity(s: Scenario, gap):
    m = s.metric()
    worst, lhs_w, rhs_w, detail = 0.0, 0.0, 0.0, {}
    for k in range(min(s.samples, 3)):
        phi = s.potential(k)
        lhs, rhs = gap(m, phi, nodes=fn.LINEAR_EXACT_NODES)
        parts = {
            "identity": (_rel(lhs, rhs), s.identity_rel),
            # the right side is a non-negative energy
            "sign": (max(0.0, -rhs), SIGN_SLACK),
        }
        if gap is fn.gap_418:
            # J computed through the Mabuchi functional and through J_bullet + A + B
            j1 = fn.j_ay(m, phi, "mabuchi", nodes=fn.LINEAR_EXACT_NODES)
            j2 = fn.j_ay(m, phi, "bullet", nodes=fn.LINEAR_EXACT_NODES)
            parts["dual_route_J"] = (_rel(j1, j2), s.identity_rel)
            parts["A_equals_B"] = (abs(fn.func_A(m, phi) - fn.func_B(m, phi)), METHOD_REL)
        res, d = _combine(parts, s.identity_rel)
        if res >= worst:
            worst, lhs_w, rhs_w, detail = res, lhs, rhs, d
    return lhs_w, rhs_w, worst, s.identity_rel, detail


def _check_identity_418(s: Scenario):
    return _identity(s, fn.gap_418)


def _check_identity_421(s: Scenario):
    return _identity(s, fn.gap_421)


def _check_inequality_chain(s: Scenario):
    m = s.metric()
    worst, I_w, J_w = 0.0, 0.0, 0.0
    min_gap = math.inf
    for k in range(s.samples):
        phi = s.potential(k)
        I = fn.i_ay(m, phi)
        J = fn.j_ay(m, phi, nodes=fn.LINEAR_EXACT_NODES)
        lower, upper = J - I / 3.0, 2.0 * I / 3.0 - J
        violation = max(0.0, -lower, -upper)
        nonconstant = float(np.ptp(phi.values)) > 0.0
        if nonconstant:
            violation = max(violation, CHAIN_SEPARATION - min(lower, upper))
            min_gap = min(min_gap, lower, upper)
        if violation >= worst:
            worst, I_w, J_w = violation, I, J
    detail = {"min_separation": None if math.isinf(min_gap) else min_gap}
    return J_w, I_w, worst, CHAIN_SLACK, detail


def _check_kahler_reduction(s: Scenario):
    _require_family(s, KAHLER_FAMILIES, "kahler_reduction")
    m = s.metric()
    V = fn.volume(m)
    phi1, phi2 = s.potential(0), s.potential(1)
    zero = 0.0 * phi1
    A, B = fn.func_A(m, phi1), fn.func_B(m, phi1)
    I12 = fn.kahler_pair_I(m, phi1, phi2)
    I21 = fn.kahler_pair_I(m, phi2, phi1)
    J12 = fn.kahler_pair_J(m, phi1, phi2)
    J21 = fn.kahler_pair_J(m, phi2, phi1)
    # classical closed form: the torsion line is absent
    w, wp = m.omega, fn.omega_phi(m, phi1)
    classical = (
        integrate_22((m.omega_squared + wedge(w, wp) + wedge(wp, wp)) * phi1).real / (3.0 * V)
    )
    parts = {
        "A": (abs(A), ZERO_ABS),
        "B": (abs(B), ZERO_ABS),
        "pair_J_sum_vs_I": (_rel(J12 + J21, I12), s.identity_rel),
        "pair_I_symmetry": (_rel(I12, I21), s.identity_rel),
        "volume_invariance": (_rel(fn.volume_phi(m, phi1), V), CLOSED_REL),
        "mabuchi_classical": (_rel(fn.mabuchi_closed(m, phi1), classical), s.identity_rel),
        "I_one_variable": (_rel(fn.i_ay(m, phi1), fn.kahler_pair_I(m, zero, phi1)), s.identity_rel),
        "J_one_variable": (_rel(fn.j_ay(m, phi1), fn.kahler_pair_J(m, zero, phi1)), s.identity_rel),
    }
    residual, detail = _combine(parts, s.identity_rel)
    return J12 + J21, I12, residual, s.identity_rel, detail


def _check_bullet_identities(s: Scenario):
    m = s.metric()
    worst, lhs_w, rhs_w, detail = 0.0, 0.0, 0.0, {}
    for k in range(min(s.samples, 3)):
        phi = s.potential(k)
        l1, r1 = fn.gap_411(m, phi, nodes=fn.LINEAR_EXACT_NODES)
        l2, r2 = fn.gap_412(m, phi, nodes=fn.LINEAR_EXACT_NODES)
        jq = fn.j_bullet(m, phi, "quadrature", nodes=s.nodes)
        jc = fn.j_bullet(m, phi, "closed")
        parts = {
            "two_thirds_I_minus_J": (_rel(l1, r1), s.identity_rel),
            "three_J_minus_I": (_rel(l2, r2), s.identity_rel),
            "J_bullet_methods": (_rel(jq, jc), METHOD_REL),
        }
        res, d = _combine(parts, s.identity_rel)
        if res >= worst:
            worst, lhs_w, rhs_w, detail = res, l1, r1, d
    return lhs_w, rhs_w, worst, s.identity_rel, detail


def _check_gauduchon_solver(s: Scenario):
    m = s.metric()
    sol = solve_gauduchon_factor(m)
    sol2 = solve_gauduchon_factor(m.scaled(SCALE_FACTOR))
    certified = gauduchon_residual(m, sol.u)
    diff = float(np.max(np.abs(sol.u.values - sol2.u.values)))
    min_u = sol.u.min()
    parts = {
        "residual": (sol.residual, s.identity_rel),
        "certified": (certified, s.identity_rel),
        "scale_uniqueness": (diff, s.identity_rel),
        "positivity": (0.0 if min_u > 0 else 1.0, s.identity_rel),
        "mean_one": (abs(float(np.mean(sol.u.values)) - 1.0), s.identity_rel),
    }
    residual, detail = _combine(parts, s.identity_rel)
    detail.update(min_u=min_u, max_u=sol.u.max(), sweeps=sol.iterations)
    return sol.residual, certified, residual, s.identity_rel, detail


def _scaled(diff: float, *sizes: float) -> float:
    scale = max(sizes)
    return diff / scale if scale > 0 else diff


def forms_oracle_residuals(n: int, seed: int, band: int = 2, amplitude: float = 1.0) -> dict:
    """Relative residuals of the form-calculus identities on random band-limited forms."""
    grid = build_grid(n)
    band = min(band, grid.nyquist - 1)
    out = {}
    rnd = lambda p, q, k: random_form(grid, p, q, band, amplitude, seed * 37 + k)  # noqa: E731
    pairs = [((1, 0), (0, 1)), ((1, 1), (1, 0)), ((0, 1), (1, 1)), ((1, 1), (1, 1))]
    comm, leib, leib_bar = 0.0, 0.0, 0.0
    for k, ((p1, q1), (p2, q2)) in enumerate(pairs):
        a, b = rnd(p1, q1, 2 * k), rnd(p2, q2, 2 * k + 1)
        sign = (-1) ** (a.degree * b.degree)
        ab, ba = wedge(a, b), wedge(b, a)
        comm = max(comm, _scaled((ab - sign * ba).sup_norm(), ab.sup_norm(), ba.sup_norm()))
        for d, name in ((partial, "d"), (partial_bar, "dbar")):
            lhs = d(ab)
            t1 = wedge(d(a), b)
            t2 = wedge(a, d(b)) * (-1) ** a.degree
            r = _scaled((lhs - t1 - t2).sup_norm(), lhs.sup_norm(), t1.sup_norm(), t2.sup_norm())
            if name == "d":
                leib = max(leib, r)
            else:
                leib_bar = max(leib_bar, r)
    out["graded_commutativity"] = comm
    out["leibniz_d"] = leib
    out["leibniz_dbar"] = leib_bar
    sq, sqb, anti = 0.0, 0.0, 0.0
    for k, (p, q) in enumerate(((0, 0), (1, 0), (0, 1), (1, 1))):
        a = rnd(p, q, 20 + k)
        ref = partial(a).sup_norm() + partial_bar(a).sup_norm()
        sq = max(sq, _scaled(partial(partial(a)).sup_norm(), ref))
        sqb = max(sqb, _scaled(partial_bar(partial_bar(a)).sup_norm(), ref))
        x, y = partial(partial_bar(a)), partial_bar(partial(a))
        anti = max(anti, _scaled((x + y).sup_norm(), x.sup_norm()))
    out["d_squared"] = sq
    out["dbar_squared"] = sqb
    out["d_dbar_anticommute"] = anti
    # integration by parts: |alpha| + |beta| = 3 and alpha ^ d beta of type (2,2)
    ibp = {"d_first": 0.0, "d_second": 0.0, "dbar_first": 0.0, "dbar_second": 0.0}
    cases = [((1, 1), (0, 1), partial), ((1, 2), (0, 0), partial), ((0, 1), (1, 1), partial),
             ((1, 1), (1, 0), partial_bar), ((2, 1), (0, 0), partial_bar), ((1, 0), (1, 1), partial_bar)]
    for k, ((p1, q1), (p2, q2), d) in enumerate(cases):
        a, b = rnd(p1, q1, 40 + 2 * k), rnd(p2, q2, 41 + 2 * k)
        lhs = integrate_22(wedge(a, d(b)))
        da_b = integrate_22(wedge(d(a), b))
        scale = max(abs(lhs), abs(da_b), a.sup_norm() * d(b).sup_norm())
        key = "d" if d is partial else "dbar"
        ibp[f"{key}_first"] = max(ibp[f"{key}_first"], abs(lhs - (-1) ** b.degree * da_b) / scale)
        ibp[f"{key}_second"] = max(
            ibp[f"{key}_second"], abs(lhs + (-1) ** a.degree * da_b) / scale
        )
    out.update({f"ibp_{k}": v for k, v in ibp.items()})
    # Stokes: top-degree exact forms integrate to zero
    beta = rnd(1, 2, 60)
    gamma = rnd(2, 1, 61)
    sigma = rnd(1, 1, 62)
    out["stokes"] = max(
        abs(integrate_22(partial(beta))) / partial(beta).sup_norm(),
        abs(integrate_22(partial_bar(gamma))) / partial_bar(gamma).sup_norm(),
        abs(integrate_22(partial(partial_bar(sigma)))) / partial(partial_bar(sigma)).sup_norm(),
    )
    return out


def _check_stokes_parity(s: Scenario):
    res = forms_oracle_residuals(s.n, s.phi_seed)
    worst = max(res.values())
    return worst, 0.0, worst, FORMS_REL, res


def _check_condition_table(s: Scenario):
    m = s.metric()
    rep = check_conditions(m)
    density_mean = abs(
        integrate_22(1j * partial(m.dbar_omega)).real
    )
    kahler = rep.cond3_residual <= CONDITION_TOL
    gauduchon = rep.cond4_residual <= CONDITION_TOL
    parts = {
        # Kahler implies Gauduchon
        "kahler_implies_gauduchon": (rep.cond4_residual if kahler else 0.0, CONDITION_TOL),
        # the density of i ddbar omega integrates to zero, so it changes sign unless it vanishes
        "stokes_mean": (density_mean, ZERO_ABS),
        "sign_change": (
            0.0 if gauduchon else max(0.0, rep.cond11_signed, -rep.cond12_signed),
            ZERO_ABS,
        ),
    }
    expected = {
        "flat": (True, True), "kahler_potential": (True, True),
        "gauduchon_torus": (False, True), "generic_gauduchon": (False, True),
        "generic": (False, False),
    }[s.metric_family]
    observed = (kahler, gauduchon)
    parts["family_expectation"] = (0.0 if observed == expected else 1.0, ZERO_ABS)
    residual, detail = _combine(parts, ZERO_ABS)
    detail.update(asdict(rep))
    return rep.cond3_residual, rep.cond4_residual, residual, ZERO_ABS, detail


_CHECKS = {name: globals()[f"_check_{name}"] for name in CHECK_NAMES}


def applicable(name: str, family: str) -> bool:
    if name == "err_gauduchon_zero":
        return family in GAUDUCHON_FAMILIES
    if name == "kahler_reduction":
        return family in KAHLER_FAMILIES
    return True


def run_check(name: str, s: Scenario) -> CheckResult:
    """Evaluate one named check; failures of any kind come back as data."""
    if name not in _CHECKS:
        raise ScenarioError(f"unknown check {name!r}; choose from {', '.join(CHECK_NAMES)}")
    start = time.perf_counter()
    try:
        lhs, rhs, residual, tol, detail = _CHECKS[name](s)
        result = _result(name, s, lhs, rhs, residual, tol, detail)
    except Exception as exc:  # noqa: BLE001 - reported, never raised
        result = CheckResult(name, s.fingerprint, math.nan, math.nan, math.nan, s.identity_rel,
                             False, {"error": f"{type(exc).__name__}: {exc}"})
    result.wall_time = time.perf_counter() - start
    return result


def worker_count() -> int:
    raw = os.environ.get("HERMITIAN_ENERGY_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ScenarioError(f"HERMITIAN_ENERGY_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ScenarioError("HERMITIAN_ENERGY_THREADS must be >= 0")
    return value or (os.cpu_count() or 1)


def suite_scenarios(base: Scenario, checks=None, family: str = "all") -> list[tuple[str, Scenario]]:
    """The (check, scenario) matrix: each check on each applicable family."""
    checks = CHECK_NAMES if checks is None else tuple(checks)
    jobs = []
    for name in checks:
        if name not in _CHECKS:
            raise ScenarioError(f"unknown check {name!r}")
        families = SUITE_FAMILIES[name] if family == "all" else (family,)
        for fam in families:
            if applicable(name, fam):
                jobs.append((name, replace(base, metric_family=fam)))
    return jobs


def run_suite(base: Scenario, checks=None, family: str = "all", workers: int | None = None) -> Report:
    """Run the check matrix; results are sorted by (check, scenario)."""
    constants = fn.aubin_yau_constants()
    jobs = suite_scenarios(base, checks, family)
    workers = worker_count() if workers is None else max(1, workers)
    start = time.perf_counter()
    if workers == 1 or len(jobs) <= 1:
        results = [run_check(name, s) for name, s in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: run_check(*job), jobs))
    results.sort(key=lambda r: (r.check, r.scenario))
    timing = {f"{r.check}|{r.scenario}": r.wall_time for r in results}
    timing["total"] = time.perf_counter() - start
    if not np.allclose(constants, 2.0, rtol=0, atol=1e-12):
        results.insert(0, CheckResult("constants", "-", float(constants[0]), 2.0,
                                      float(np.max(np.abs(constants - 2.0))), 1e-12, False))
    return Report(results, [float(c) for c in constants], timing)


def convergence_study(name: str, sizes, base: Scenario) -> list[dict]:
    """Residual of ``name`` on ``base`` for each lattice size in ascending ``sizes``."""
    sizes = list(sizes)
    if not sizes:
        raise ScenarioError("need at least one grid size")
    if sizes != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise ScenarioError(f"grid sizes must be strictly ascending, got {sizes}")
    rows = []
    for n in sizes:
        r = run_check(name, replace(base, n=n))
        if "error" in r.detail:
            raise ArithmeticError(f"{name} failed at n={n}: {r.detail['error']}")
        rows.append({"n": n, "residual": r.residual, "lhs": r.lhs, "rhs": r.rhs, "pass": r.passed})
    return rows
