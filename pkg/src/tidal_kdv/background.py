"""Step-like background ``W(x) = c1 tanh(x) + c2`` and its periodic surrogate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParameterError
from .spectral_grid import Field, Grid

# d^j/dx^j tanh(x) as a polynomial in t = tanh(x); coefficients low -> high.
_ONE_MINUS_T2 = np.polynomial.Polynomial([1.0, 0.0, -1.0])
_TANH_DERIV_POLYS = [np.polynomial.Polynomial([0.0, 1.0])]
for _ in range(6):
    # d/dx P(t) = P'(t) * (1 - t^2)
    _TANH_DERIV_POLYS.append(_TANH_DERIV_POLYS[-1].deriv() * _ONE_MINUS_T2)
# for j >= 1, P_j = (1 - t^2) Q_j; evaluating Q_j(t) sech^2(x) keeps full
# relative accuracy in the exponentially small tails
_SECH2_COFACTORS = [None] + [(p // _ONE_MINUS_T2) for p in _TANH_DERIV_POLYS[1:]]


def _sech2(x):
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


def tanh_derivative(x, j: int):
    """``j``-th derivative of ``tanh`` evaluated at ``x`` (``0 <= j <= 6``)."""
    if not (0 <= j <= 6) or int(j) != j:
        raise ParameterError(f"closed forms exist for 0 <= j <= 6, got {j}")
    if j == 0:
        return np.tanh(x)
    return _SECH2_COFACTORS[j](np.tanh(x)) * _sech2(x)


@dataclass(frozen=True)
class StepProfile:
    """Background ``W(x) = c1 tanh(x) + c2``; ``c1 > 0`` is an incoming tide."""

    c1: float
    c2: float = 0.0

    @property
    def left(self) -> float:
        return self.c2 - self.c1

    @property
    def right(self) -> float:
        return self.c2 + self.c1

    def momentum_flux(self) -> float:
        """Growth rate ``2 W^3 |_{-inf}^{+inf}`` of the momentum of ``u``."""
        return 2.0 * (self.right**3 - self.left**3)

    def __call__(self, x, j: int = 0):
        return eval_profile(self, x, j)


def eval_profile(p: StepProfile, x, j: int = 0):
    """Analytic ``W^{(j)}(x)``."""
    d = p.c1 * tanh_derivative(x, j)
    return d + p.c2 if j == 0 else d


@dataclass(frozen=True)
class PeriodizedBackground:
    """Double step ``c2 + c1 [tanh(x) - tanh(x - x_R) - 1]`` on a periodic grid.

    Near ``x = 0`` this is ``W`` up to ``O(e^{-2(x_R - |x|)})``; the auxiliary
    down-step at ``x_R`` restores periodicity.
    """

    profile: StepProfile
    return_center: float
    grid: Grid

    def samples(self, j: int = 0) -> np.ndarray:
        x = self.grid.x
        p = self.profile
        val = p.c1 * (tanh_derivative(x, j) - tanh_derivative(x - self.return_center, j))
        if j == 0:
            val = val + p.c2 - p.c1
        return val

    def field(self, j: int = 0) -> Field:
        return Field(self.grid, self.samples(j))

    def __call__(self, x) -> np.ndarray:
        p = self.profile
        return p.c2 + p.c1 * (np.tanh(x) - np.tanh(x - self.return_center) - 1.0)

    @property
    def edge_value(self) -> float:
        """Value of the surrogate at ``x = -L`` (and, periodically, at ``x = L``)."""
        return float(self(-self.grid.half_length))

    @property
    def trusted_half_width(self) -> float:
        """Half-width of the window where the surrogate equals ``W``."""
        return 0.5 * self.return_center


def periodize(p: StepProfile, grid: Grid, x_R: float) -> PeriodizedBackground:
    if x_R < 20.0:
        raise ConfigurationError(f"x_R must be >= 20, got {x_R}")
    if grid.half_length < x_R + 20.0:
        raise ConfigurationError(
            f"half_length {grid.half_length} must be >= x_R + 20 = {x_R + 20.0}"
        )
    return PeriodizedBackground(p, float(x_R), grid)


def default_return_center(grid: Grid) -> float:
    """Largest admissible ``x_R`` for the grid."""
    return grid.half_length - 20.0
