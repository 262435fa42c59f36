"""Periodic lattice on the unit 4-torus and spectral calculus for scalar fields.

The torus is (R/Z)^4 with real coordinates ordered ``(x1, y1, x2, y2)`` along
array axes 0..3 and complex coordinates ``z^j = x^j + i y^j``.  Derivatives are
computed by discrete Fourier multiplication; the Nyquist mode's derivative is
zeroed so that every derivative operator is exactly skew-adjoint for the
lattice sum.

Reductions use ``numpy.sum`` over the C-ordered array (pairwise summation), so
results are bitwise reproducible for a fixed grid size.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from numbers import Number

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "build_grid",
    "derivative_z",
    "derivative_zbar",
    "derivative_real",
    "integrate_density",
    "random_band_limited_field",
    "normalize_sup",
    "constant_field",
    "field_from_function",
]

MIN_POINTS = 4
MAX_POINTS = 64
# max |Im| allowed on a field that claims to be real, relative to max |value|
REAL_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform lattice with ``n`` points along each of the four real axes."""

    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise TypeError(f"grid size must be an integer, got {self.n!r}")
        if self.n % 2:
            raise ValueError(f"odd grid size {self.n}: n must be even")
        if not MIN_POINTS <= self.n <= MAX_POINTS:
            raise ValueError(
                f"grid size {self.n} out of range [{MIN_POINTS}, {MAX_POINTS}]"
            )

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.n,) * 4

    @property
    def size(self) -> int:
        return self.n**4

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays ``(x1, y1, x2, y2)``."""
        t = np.arange(self.n) / self.n
        return tuple(
            t.reshape([self.n if a == axis else 1 for a in range(4)]) for axis in range(4)
        )

    @property
    def nyquist(self) -> int:
        return self.n // 2


def build_grid(n: int) -> Grid:
    return Grid(n)


def _is_real_scalar(c) -> bool:
    return isinstance(c, (Number, np.number)) and np.imag(c) == 0


class ScalarField:
    """A complex- or real-valued function sampled on a :class:`Grid`.

    Fields are immutable values.  A field constructed with ``real=True`` from
    complex samples is checked for a negligible imaginary part (relative to
    ``REAL_TOL``) and stored as float64.
    """

    __slots__ = ("grid", "values", "real")

    def __init__(self, grid: Grid, values, real: bool | None = None):
        values = np.asarray(values)
        if values.shape == ():
            values = np.full(grid.shape, values)
        if values.shape != grid.shape:
            raise ValueError(f"values of shape {values.shape} do not fit grid {grid.shape}")
        if real is None:
            real = not np.iscomplexobj(values)
        if real:
            if np.iscomplexobj(values):
                scale = np.max(np.abs(values))
                leak = np.max(np.abs(values.imag))
                if leak > REAL_TOL * scale:
                    raise ValueError(
                        f"field claimed real has imaginary part {leak:.3e} "
                        f"(relative {leak / scale:.3e})"
                    )
                values = values.real
            values = np.array(values, dtype=np.float64)
        else:
            values = np.array(values, dtype=np.complex128)
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.real = bool(real)

    def __repr__(self):
        kind = "real" if self.real else "complex"
        return f"ScalarField(n={self.grid.n}, {kind}, sup={self.sup_norm():.4g})"

    def _operand(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("grid mismatch between fields")
            return other.values, other.real
        if isinstance(other, (Number, np.number)):
            return other, _is_real_scalar(other)
        return NotImplemented, False

    def _binary(self, other, op):
        vals, real = self._operand(other)
        if vals is NotImplemented:
            return NotImplemented
        return ScalarField(self.grid, op(self.values, vals), self.real and real)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.real)

    def conj(self) -> ScalarField:
        if self.real:
            return self
        return ScalarField(self.grid, np.conj(self.values), False)

    def real_part(self) -> ScalarField:
        return ScalarField(self.grid, self.values.real, True)

    def imag_part(self) -> ScalarField:
        return ScalarField(self.grid, np.imag(self.values), True)

    def as_real(self) -> ScalarField:
        """Return the same field flagged real; raises if it is not real."""
        return ScalarField(self.grid, self.values, True)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def max(self) -> float:
        if not self.real:
            raise ValueError("max is only defined for real fields")
        return float(np.max(self.values))

    def min(self) -> float:
        if not self.real:
            raise ValueError("min is only defined for real fields")
        return float(np.min(self.values))

    def allclose(self, other: ScalarField, atol: float = 0.0, rtol: float = 1e-12) -> bool:
        return bool(np.allclose(self.values, other.values, atol=atol, rtol=rtol))


def constant_field(grid: Grid, value) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, value))


def field_from_function(grid: Grid, func, real: bool | None = None) -> ScalarField:
    """Sample ``func(x1, y1, x2, y2)`` on the lattice (broadcasting arrays)."""
    vals = np.broadcast_to(func(*grid.coordinates), grid.shape)
    return ScalarField(grid, vals, real)


@lru_cache(maxsize=None)
def _wavenumbers(n: int) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0  # Nyquist derivative zeroed
    return k


def _axis_multiplier(n: int, real_axis: int) -> np.ndarray:
    k = _wavenumbers(n)
    return (2j * np.pi * k).reshape([n if a == real_axis else 1 for a in range(4)])


@lru_cache(maxsize=None)
def _complex_multiplier(n: int, axis: int, bar: bool) -> np.ndarray:
    # d/dz = (d/dx - i d/dy)/2,  d/dzbar = (d/dx + i d/dy)/2
    dx = _axis_multiplier(n, 2 * (axis - 1))
    dy = _axis_multiplier(n, 2 * (axis - 1) + 1)
    sign = 1j if bar else -1j
    mult = 0.5 * (dx + sign * dy)
    mult.setflags(write=False)
    return mult


def _check_axis(axis: int):
    if axis not in (1, 2):
        raise ValueError(f"complex axis must be 1 or 2, got {axis!r}")


def _apply_multiplier(f: ScalarField, mult: np.ndarray) -> ScalarField:
    spec = np.fft.fftn(f.values)
    return ScalarField(f.grid, np.fft.ifftn(spec * mult), real=False)


def derivative_z(f: ScalarField, axis: int) -> ScalarField:
    """Spectral derivative d f / d z^axis."""
    _check_axis(axis)
    return _apply_multiplier(f, _complex_multiplier(f.grid.n, axis, False))


def derivative_zbar(f: ScalarField, axis: int) -> ScalarField:
    """Spectral derivative d f / d zbar^axis."""
    _check_axis(axis)
    return _apply_multiplier(f, _complex_multiplier(f.grid.n, axis, True))


def derivative_real(f: ScalarField, real_axis: int) -> ScalarField:
    """Spectral derivative along real axis 0..3 (x1, y1, x2, y2); keeps realness."""
    n = f.grid.n
    out = np.fft.ifftn(np.fft.fftn(f.values) * _axis_multiplier(n, real_axis))
    return ScalarField(f.grid, out.real if f.real else out, f.real)


def integrate_density(f: ScalarField) -> complex:
    """Integral over the unit torus: the lattice mean of the samples."""
    return complex(np.sum(f.values) / f.grid.size)


def _spectral_weight(grid: Grid, band: int, smoothness: float) -> np.ndarray:
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    inside = np.abs(k) <= band
    k2 = sum(
        (k**2).reshape([grid.n if a == ax else 1 for a in range(4)]) for ax in range(4)
    )
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(4):
        mask = mask & inside.reshape([grid.n if a == ax else 1 for a in range(4)])
    return np.where(mask, (1.0 + k2) ** (-smoothness / 2.0), 0.0)


def random_band_limited_field(
    grid: Grid,
    band: int,
    amplitude: float,
    seed: int,
    real_valued: bool = True,
    smoothness: float = 6.0,
) -> ScalarField:
    """Random trigonometric polynomial with modes ``|k_j| <= band`` on every axis.

    Coefficients are complex Gaussians damped by ``(1 + |k|^2)^(-smoothness/2)``;
    the field is rescaled so that its sup-norm equals ``amplitude``.  Real
    fields get a Hermitian-symmetric spectrum.
    """
    if band < 0 or band >= grid.nyquist:
        raise ValueError(f"band {band} must satisfy 0 <= band < n/2 = {grid.nyquist}")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if amplitude == 0:
        return ScalarField(grid, np.zeros(grid.shape), real=real_valued)
    rng = np.random.default_rng(seed)
    weight = _spectral_weight(grid, band, smoothness)
    spec = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * weight
    if real_valued:
        # reflect k -> -k: index i maps to (-i) mod n on every axis
        flipped = np.roll(np.flip(spec, axis=(0, 1, 2, 3)), 1, axis=(0, 1, 2, 3))
        spec = 0.5 * (spec + np.conj(flipped))
    vals = np.fft.ifftn(spec)
    if real_valued:
        vals = vals.real
    vals = vals * (amplitude / np.max(np.abs(vals)))
    return ScalarField(grid, vals, real=real_valued)


def normalize_sup(phi: ScalarField) -> ScalarField:
    """Shift a real potential so that its maximum is exactly 0."""
    if not phi.real:
        raise ValueError("normalize_sup requires a real field")
    return ScalarField(phi.grid, phi.values - np.max(phi.values), real=True)
