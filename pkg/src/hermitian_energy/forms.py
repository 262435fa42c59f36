"""(p,q)-form algebra on a complex surface discretized as the periodic 4-torus.

A basis element is an ordered wedge of differentials.  Differentials are
encoded as ``(index, bar)`` with ``index`` in {0, 1} (for z^1, z^2) and
``bar`` in {0, 1}.  The canonical ordering puts every ``dz`` before every
``dzbar`` (``dz^I ^ dzbar^J``), with one exception: the single (2,2) basis
element is ``dz1 ^ dzbar1 ^ dz2 ^ dzbar2``, the ordering that pairs with the
orientation convention ``dz ^ dzbar = -2i dx ^ dy``.  Any wedge of
differentials is reduced to canonical form by permutation parity.

Multi-indices in the public API are 1-based, e.g. ``((1,), (2,))`` is the
component of ``dz1 ^ dzbar2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from numbers import Number

import numpy as np

from .grid import (
    Grid,
    ScalarField,
    _complex_multiplier,
    integrate_density,
    random_band_limited_field,
)

__all__ = [
    "Form",
    "basis",
    "canonical_sign",
    "wedge",
    "partial",
    "partial_bar",
    "conjugate",
    "integrate_22",
    "is_real_form",
    "is_positive_11",
    "PositivityReport",
    "random_form",
]

# sup |conj(a) - a| <= REAL_FORM_TOL * sup |a| for forms flagged real
REAL_FORM_TOL = 1e-12
# volume of dz1^dzbar1^dz2^dzbar2 over the unit torus: (-2i)^2
TOP_FORM_VOLUME = -4.0


def _legal(p: int, q: int) -> bool:
    return 0 <= p <= 2 and 0 <= q <= 2


@lru_cache(maxsize=None)
def _basis0(p: int, q: int) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    if not _legal(p, q):
        return ()
    return tuple((I, J) for I in combinations((0, 1), p) for J in combinations((0, 1), q))


def _canonical_tuple(I, J) -> tuple[tuple[int, int], ...]:
    if len(I) == 2 and len(J) == 2:
        return ((0, 0), (0, 1), (1, 0), (1, 1))
    return tuple((i, 0) for i in I) + tuple((j, 1) for j in J)


def _parity(perm: list[int]) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


@lru_cache(maxsize=None)
def canonical_sign(seq: tuple[tuple[int, int], ...]) -> tuple[int, int]:
    """Reduce an ordered wedge of differentials to ``(sign, basis index)``.

    ``sign`` is 0 (and the index -1) when a differential repeats.
    """
    if len(set(seq)) != len(seq):
        return 0, -1
    I = tuple(sorted(i for i, bar in seq if not bar))
    J = tuple(sorted(i for i, bar in seq if bar))
    target = _canonical_tuple(I, J)
    perm = [target.index(d) for d in seq]
    return _parity(perm), _basis0(len(I), len(J)).index((I, J))


def basis(p: int, q: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Canonical basis of (p,q)-forms as 1-based ``(I, J)`` multi-indices."""
    return [
        (tuple(i + 1 for i in I), tuple(j + 1 for j in J)) for I, J in _basis0(p, q)
    ]


@dataclass(frozen=True, eq=False)
class Form:
    """A (p,q)-form: one complex coefficient array per canonical basis element.

    ``coeffs`` has shape ``(C(2,p)*C(2,q),) + grid.shape``.  Illegal bidegrees
    (p or q > 2) carry zero components and act as the zero form.
    """

    grid: Grid
    p: int
    q: int
    coeffs: np.ndarray

    def __post_init__(self):
        ncomp = comb(2, self.p) * comb(2, self.q) if self.p >= 0 and self.q >= 0 else 0
        expected = (ncomp,) + self.grid.shape
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficients of shape {self.coeffs.shape}, expected {expected}")

    @classmethod
    def zero(cls, grid: Grid, p: int, q: int) -> Form:
        ncomp = comb(2, p) * comb(2, q) if _legal(p, q) else 0
        return cls(grid, p, q, np.zeros((ncomp,) + grid.shape, dtype=np.complex128))

    @classmethod
    def from_components(cls, grid: Grid, p: int, q: int, components: dict) -> Form:
        """Build a form from ``{(I, J): ScalarField | number}`` with 1-based indices."""
        out = cls.zero(grid, p, q)
        names = basis(p, q)
        for key, value in components.items():
            key = (tuple(key[0]), tuple(key[1]))
            if key not in names:
                raise KeyError(f"{key} is not a canonical ({p},{q}) basis element")
            if isinstance(value, ScalarField):
                if value.grid != grid:
                    raise ValueError("grid mismatch")
                value = value.values
            out.coeffs[names.index(key)] = value
        return out

    @classmethod
    def from_field(cls, f: ScalarField) -> Form:
        """The (0,0)-form with coefficient ``f``."""
        return cls(f.grid, 0, 0, np.asarray(f.values, dtype=np.complex128)[None].copy())

    @classmethod
    def top(cls, grid: Grid, coefficient) -> Form:
        """(2,2)-form ``coefficient * dz1^dzbar1^dz2^dzbar2``."""
        return cls.from_components(grid, 2, 2, {((1, 2), (1, 2)): coefficient})

    @property
    def degree(self) -> int:
        return self.p + self.q

    @property
    def bidegree(self) -> tuple[int, int]:
        return self.p, self.q

    def component(self, I, J) -> ScalarField:
        idx = basis(self.p, self.q).index((tuple(I), tuple(J)))
        return ScalarField(self.grid, self.coeffs[idx], real=False)

    def sup_norm(self) -> float:
        if self.coeffs.size == 0:
            return 0.0
        return float(np.max(np.abs(self.coeffs)))

    def _compatible(self, other: Form):
        if not isinstance(other, Form):
            raise TypeError(f"expected a Form, got {type(other).__name__}")
        if other.grid != self.grid:
            raise ValueError("grid mismatch between forms")
        if other.bidegree != self.bidegree:
            raise ValueError(f"bidegree mismatch {self.bidegree} vs {other.bidegree}")

    def __add__(self, other: Form) -> Form:
        self._compatible(other)
        return Form(self.grid, self.p, self.q, self.coeffs + other.coeffs)

    def __sub__(self, other: Form) -> Form:
        self._compatible(other)
        return Form(self.grid, self.p, self.q, self.coeffs - other.coeffs)

    def __neg__(self) -> Form:
        return Form(self.grid, self.p, self.q, -self.coeffs)

    def __mul__(self, other) -> Form:
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return Form(self.grid, self.p, self.q, self.coeffs * other.values)
        if isinstance(other, (Number, np.number)):
            return Form(self.grid, self.p, self.q, self.coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def __xor__(self, other: Form) -> Form:
        return wedge(self, other)

    def __repr__(self):
        return f"Form(({self.p},{self.q}), n={self.grid.n}, sup={self.sup_norm():.4g})"


def wedge(alpha: Form, beta: Form) -> Form:
    """Exterior product with canonical-order signs; zero if the bidegree overflows."""
    if alpha.grid != beta.grid:
        raise ValueError("grid mismatch between forms")
    p, q = alpha.p + beta.p, alpha.q + beta.q
    out = Form.zero(alpha.grid, p, q)
    if not _legal(p, q):
        return out
    for a, (Ia, Ja) in enumerate(_basis0(alpha.p, alpha.q)):
        ta = _canonical_tuple(Ia, Ja)
        for b, (Ib, Jb) in enumerate(_basis0(beta.p, beta.q)):
            sign, idx = canonical_sign(ta + _canonical_tuple(Ib, Jb))
            if sign:
                out.coeffs[idx] += sign * (alpha.coeffs[a] * beta.coeffs[b])
    return out


def _differentiate(alpha: Form, bar: bool) -> Form:
    p, q = (alpha.p, alpha.q + 1) if bar else (alpha.p + 1, alpha.q)
    out = Form.zero(alpha.grid, p, q)
    if not _legal(p, q) or alpha.coeffs.shape[0] == 0:
        return out
    n = alpha.grid.n
    spec = np.fft.fftn(alpha.coeffs, axes=(1, 2, 3, 4))
    for axis in (1, 2):
        deriv = np.fft.ifftn(spec * _complex_multiplier(n, axis, bar), axes=(1, 2, 3, 4))
        d = (axis - 1, int(bar))
        for c, (I, J) in enumerate(_basis0(alpha.p, alpha.q)):
            sign, idx = canonical_sign((d,) + _canonical_tuple(I, J))
            if sign:
                out.coeffs[idx] += sign * deriv[c]
    return out


def partial(alpha: Form) -> Form:
    """The operator d' (holomorphic part of d): raises p by one."""
    return _differentiate(alpha, bar=False)


def partial_bar(alpha: Form) -> Form:
    """The operator d'' (antiholomorphic part of d): raises q by one."""
    return _differentiate(alpha, bar=True)


def conjugate(alpha: Form) -> Form:
    """Complex conjugate; maps bidegree (p,q) to (q,p)."""
    out = Form.zero(alpha.grid, alpha.q, alpha.p)
    for c, (I, J) in enumerate(_basis0(alpha.p, alpha.q)):
        flipped = tuple((i, 1 - bar) for i, bar in _canonical_tuple(I, J))
        sign, idx = canonical_sign(flipped)
        out.coeffs[idx] += sign * np.conj(alpha.coeffs[c])
    return out


def integrate_22(alpha: Form) -> complex:
    """Integral of a (2,2)-form over the unit torus."""
    if alpha.bidegree != (2, 2):
        raise ValueError(f"can only integrate (2,2)-forms, got {alpha.bidegree}")
    return TOP_FORM_VOLUME * integrate_density(ScalarField(alpha.grid, alpha.coeffs[0]))


def is_real_form(alpha: Form, tol: float = REAL_FORM_TOL) -> bool:
    if alpha.p != alpha.q:
        return alpha.sup_norm() == 0.0
    scale = alpha.sup_norm()
    return (conjugate(alpha) - alpha).sup_norm() <= tol * scale


@dataclass(frozen=True)
class PositivityReport:
    """Pointwise positivity of a real (1,1)-form ``i h_{j kbar} dz^j ^ dzbar^k``."""

    positive: bool
    min_h11: float
    min_det: float
    min_eigenvalue: float

    def __bool__(self):
        return self.positive


def hermitian_matrix(alpha: Form) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(h11, h12, h22)`` with ``alpha = i h_{j kbar} dz^j ^ dzbar^k``."""
    if alpha.bidegree != (1, 1):
        raise ValueError(f"expected a (1,1)-form, got {alpha.bidegree}")
    h = -1j * alpha.coeffs
    return h[0].real, h[1], h[3].real


def is_positive_11(alpha: Form, margin: float = 0.0) -> PositivityReport:
    """Test ``h11 > margin`` and ``det h > margin**2`` at every lattice point."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    if alpha.bidegree != (1, 1) or not is_real_form(alpha):
        raise ValueError("positivity is only defined for real (1,1)-forms")
    h11, h12, h22 = hermitian_matrix(alpha)
    det = h11 * h22 - np.abs(h12) ** 2
    half_tr = 0.5 * (h11 + h22)
    lam = half_tr - np.sqrt(np.maximum(half_tr**2 - det, 0.0))
    min_h11, min_det = float(h11.min()), float(det.min())
    return PositivityReport(
        positive=min_h11 > margin and min_det > margin**2,
        min_h11=min_h11,
        min_det=min_det,
        min_eigenvalue=float(lam.min()),
    )


def random_form(
    grid: Grid, p: int, q: int, band: int, amplitude: float, seed: int
) -> Form:
    """Form with independent random band-limited complex coefficients."""
    out = Form.zero(grid, p, q)
    for c in range(out.coeffs.shape[0]):
        f = random_band_limited_field(
            grid, band, amplitude, seed * 101 + c, real_valued=False, smoothness=0.0
        )
        out.coeffs[c] = f.values
    return out
