"""Periodic Fourier grid, spectral calculus, Sobolev norms and frequency cut-offs.

Fields are real samples on ``x_j = -L + j*dx`` with ``dx = 2L/N``.  Spectra are
stored in ``numpy.fft.rfft`` layout.  Continuum Fourier conventions are
unitary (``fhat(xi) = (2 pi)^{-1/2} int e^{-i xi x} f(x) dx``), so every norm
below is the trapezoid/Plancherel discretisation of the whole-line integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np

from .errors import ParameterError, RejectedInputError

ArrayLike = Union[np.ndarray, float]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)``.

    Parameters
    ----------
    num_points:
        Even number of samples, at least 16.
    half_length:
        Half-width ``L`` of the periodic box.
    """

    num_points: int
    half_length: float

    def __post_init__(self) -> None:
        n = self.num_points
        if int(n) != n or n < 16 or n % 2:
            raise ParameterError(f"num_points must be an even integer >= 16, got {n}")
        if not (self.half_length > 0 and np.isfinite(self.half_length)):
            raise ParameterError(f"half_length must be positive, got {self.half_length}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.num_points

    @property
    def dxi(self) -> float:
        return np.pi / self.half_length

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.num_points)

    @cached_property
    def k(self) -> np.ndarray:
        """Wavenumbers in rfft order (non-negative)."""
        return self.dxi * np.arange(self.num_points // 2 + 1)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """All wavenumbers ``pi k / L`` for ``k = -N/2 .. N/2-1``, ascending."""
        n = self.num_points
        return self.dxi * np.arange(-n // 2, n // 2)

    @property
    def xi_max(self) -> float:
        return self.k[-1]

    @cached_property
    def mode_weight(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full two-sided spectrum."""
        w = np.full(self.k.size, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask in rfft layout."""
        idx = np.arange(self.k.size)
        return idx <= self.num_points // 3

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft(values)

    def from_spectral(self, spectrum: np.ndarray) -> np.ndarray:
        return np.fft.irfft(spectrum, n=self.num_points)

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float))

    def evaluate(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return Field(self, np.asarray(fn(self.x), dtype=float) * np.ones(self.num_points))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.num_points))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.num_points * factor, self.half_length)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples on a :class:`Grid` with a lazily cached rfft spectrum."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.num_points,):
            raise ParameterError(
                f"field has shape {v.shape}, grid expects ({self.grid.num_points},)"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray) -> "Field":
        f = cls(grid, grid.from_spectral(spectrum))
        return f

    @cached_property
    def spectrum(self) -> np.ndarray:
        s = self.grid.to_spectral(self.values)
        s.setflags(write=False)
        return s

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def _coerce(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ParameterError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return Field(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class Multiplier:
    """Fourier multiplier given by a symbol ``m(xi)`` (evaluated at ``|xi|`` for even symbols)."""

    symbol: Callable[[np.ndarray], np.ndarray]

    def on(self, grid: Grid) -> np.ndarray:
        return np.asarray(self.symbol(grid.k)) * np.ones(grid.k.size)

    def apply(self, f: Field) -> Field:
        return Field.from_spectrum(f.grid, self.on(f.grid) * f.spectrum)

    @classmethod
    def identity(cls) -> "Multiplier":
        return cls(lambda xi: np.ones_like(xi))


# --------------------------------------------------------------------------
# array-level kernels (shared with the flow integrators)


def spectral_derivative(spectrum: np.ndarray, grid: Grid, j: int) -> np.ndarray:
    """Multiply an rfft spectrum by ``(i xi)^j``; odd orders drop the Nyquist mode."""
    out = (1j * grid.k) ** j * spectrum
    if j % 2:
        out[-1] = 0.0
    return out


def diff(values: np.ndarray, grid: Grid, j: int = 1) -> np.ndarray:
    return grid.from_spectral(spectral_derivative(np.fft.rfft(values), grid, j))


def weighted_norm_sq(spectrum: np.ndarray, grid: Grid, weight: ArrayLike = 1.0) -> float:
    """Discrete ``int w(xi) |fhat(xi)|^2 dxi`` from an rfft spectrum."""
    c2 = np.abs(spectrum) ** 2 / grid.num_points**2
    return float(2.0 * grid.half_length * np.sum(grid.mode_weight * weight * c2))


# --------------------------------------------------------------------------
# public operations


def derivative(f: Field, j: int) -> Field:
    """Spectral derivative of order ``j`` (``0 <= j <= 8``)."""
    if not (0 <= j <= 8) or int(j) != j:
        raise ParameterError(f"derivative order must be in 0..8, got {j}")
    if not f.is_finite():
        raise RejectedInputError("field contains non-finite samples")
    if j == 0:
        return f
    return Field.from_spectrum(f.grid, spectral_derivative(f.spectrum, f.grid, j))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(np.sum(f.values**2) * f.grid.dx))


def sobolev_norm(f: Field, s: float) -> float:
    """Inhomogeneous ``H^s`` norm with weight ``(1 + xi^2)^s``."""
    return np.sqrt(weighted_norm_sq(f.spectrum, f.grid, (1.0 + f.grid.k**2) ** s))


def hs_kappa_norm(f: Field, s: float, kappa: float) -> float:
    """``||f||_{H^s_kappa}`` with weight ``(xi^2 + 4 kappa^2)^s``."""
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    w = (f.grid.k**2 + 4.0 * kappa**2) ** s
    return np.sqrt(weighted_norm_sq(f.spectrum, f.grid, w))


def dealias(f: Field) -> Field:
    return Field.from_spectrum(f.grid, f.spectrum * f.grid.dealias_mask)


# --------------------------------------------------------------------------
# Littlewood-Paley machinery


def _h(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(xi: ArrayLike) -> np.ndarray:
    """C-infinity cut-off: 1 on ``|xi| <= 1``, 0 on ``|xi| >= 2``."""
    a = np.abs(np.asarray(xi, dtype=float))
    up = _h(2.0 - a)
    return up / (up + _h(a - 1.0))


def lp_piece_sq(xi: ArrayLike, phi: Callable = smooth_step) -> np.ndarray:
    """``psi(xi)^2 = phi(xi) - phi(2 xi)``, clipped at 0 against round-off."""
    return np.maximum(phi(xi) - phi(2.0 * np.asarray(xi, dtype=float)), 0.0)


def lp_piece(xi: ArrayLike, phi: Callable = smooth_step) -> np.ndarray:
    return np.sqrt(lp_piece_sq(xi, phi))


def _dyadic_window(xi: np.ndarray) -> np.ndarray:
    """Exponents ``n`` of every ``2^n`` with ``psi(xi/2^n) != 0`` for some entry of ``xi``."""
    a = np.abs(xi[np.isfinite(xi)])
    a = a[a > 0]
    if a.size == 0:
        return np.arange(0)
    lo = int(np.floor(np.log2(a.min()))) - 2
    hi = int(np.ceil(np.log2(a.max()))) + 2
    return np.arange(lo, hi + 1)


def lp_partition(xi: ArrayLike, phi: Callable = smooth_step) -> np.ndarray | float:
    """``sum_N psi^2(xi/N)`` over the dyadic scales that can contribute.

    Only scales ``N`` with ``|xi|/2 < N < 2|xi|`` carry non-zero terms, so the
    truncated sum equals the full one; the result is 1 for ``xi != 0``.
    """
    arr = np.atleast_1d(np.asarray(xi, dtype=float))
    total = np.zeros_like(arr)
    for n in _dyadic_window(arr):
        total += lp_piece_sq(arr / 2.0**n, phi)
    return total if np.ndim(xi) else float(total[0])


def _check_dyadic(N: float) -> int:
    if not N > 0:
        raise ParameterError(f"dyadic scale must be positive, got {N}")
    n = np.log2(N)
    if abs(n - round(n)) > 1e-12:
        raise ParameterError(f"{N} is not a power of two")
    return int(round(n))


def m_hi(xi: ArrayLike, s: int, phi: Callable = smooth_step) -> np.ndarray | float:
    """Symbol of the gradual high-pass: ``sum_{K<1} K^s psi^2(xi/K) + sum_{K>=1} psi^2(xi/K)``."""
    arr = np.atleast_1d(np.asarray(xi, dtype=float))
    total = np.zeros_like(arr)
    for n in _dyadic_window(arr):
        weight = 2.0 ** (n * s) if n < 0 else 1.0
        total += weight * lp_piece_sq(arr / 2.0**n, phi)
    return total if np.ndim(xi) else float(total[0])


def m_lo(xi: ArrayLike, s: int, phi: Callable = smooth_step) -> np.ndarray | float:
    hi = m_hi(xi, s, phi)
    return np.sqrt(np.clip(1.0 - np.square(hi), 0.0, None))


def project_pi(f: Field, N: float, s: int, which: str = "high", phi: Callable = smooth_step) -> Field:
    """Apply ``Pi_{>=N}`` (``which="high"``) or ``Pi_{<N}`` (``which="low"``)."""
    _check_dyadic(N)
    if int(s) != s or s < 3:
        raise ParameterError(f"s must be an integer >= 3, got {s}")
    scaled = f.grid.k / N
    if which == "high":
        symbol = m_hi(scaled, s, phi)
    elif which == "low":
        symbol = m_lo(scaled, s, phi)
    else:
        raise ParameterError(f"which must be 'high' or 'low', got {which!r}")
    return Field.from_spectrum(f.grid, symbol * f.spectrum)


def littlewood_paley(f: Field, N: float, phi: Callable = smooth_step) -> Field:
    """``P_N f`` with symbol ``psi(xi/N)``."""
    _check_dyadic(N)
    return Field.from_spectrum(f.grid, lp_piece(f.grid.k / N, phi) * f.spectrum)
