"""Diagonal Green's function of ``-d^2/dx^2 + V + kappa^2`` and related functionals.

Four engines compute ``g(x) = G(x, x)``:

``spectral``
    Solves the integrated Green's-function identity
    ``(g')^2 - 2 g g'' + 4 (V + kappa^2) g^2 = 1`` for ``y = log(2 kappa g)`` by
    a preconditioned fixed point in Fourier space.  Round-off accurate and
    cheap; this is the engine the flows use.
``jost``
    Integrates the Riccati equations for the log-derivatives ``m_pm`` of the
    Jost solutions from Robin data at the box edges (classical RK4 on the grid,
    band-limited sub-step samples) and returns ``1 / (m_- - m_+)``.
``dense_inverse``
    Inverts the Fourier-collocation matrix of the operator.  The free and
    first-order parts of the diagonal, whose kernels have a cusp, are replaced
    by their exact continuum values; the remainder converges like ``xi_max^-5``.
``series``
    Truncated Neumann series in powers of ``V`` with the same two exact leading
    terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import (
    ConvergenceError,
    ParameterError,
    ResolutionError,
    SpectralConditionError,
)
from .spectral_grid import Field, Grid, diff, hs_kappa_norm, sobolev_norm, spectral_derivative

POSITIVITY_MARGIN = 0.1


# --------------------------------------------------------------------------
# free resolvent


def free_resolvent_kernel(x, y, kappa: float):
    """Kernel ``exp(-kappa |x - y|) / (2 kappa)`` of ``(-d^2 + kappa^2)^{-1}``."""
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    return np.exp(-kappa * np.abs(np.subtract(x, y))) / (2.0 * kappa)


def resolvent_symbol(xi, kappa: float):
    """Symbol ``1 / (xi^2 + kappa^2)`` of ``R_0(kappa)``."""
    return 1.0 / (np.square(xi) + kappa**2)


def apply_resolvent(values: np.ndarray, grid: Grid, kappa: float) -> np.ndarray:
    return grid.from_spectral(resolvent_symbol(grid.k, kappa) * np.fft.rfft(values))


def linear_kernel_term(values: np.ndarray, grid: Grid, kappa: float) -> np.ndarray:
    """``<delta_x, R_0 f R_0 delta_x> = R_0(2 kappa) f / kappa``."""
    return apply_resolvent(values, grid, 2.0 * kappa) / kappa


def quadratic_kernel_term(f: np.ndarray, h: np.ndarray, grid: Grid, kappa: float) -> np.ndarray:
    """``<delta_x, R_0 f R_0 h R_0 delta_x>`` assembled from multipliers and products.

    Exact for ``f, h`` band-limited to ``|k| < N/4``; otherwise the products alias.
    """
    k = grid.k
    r2 = resolvent_symbol(k, 2.0 * kappa)
    F, H = np.fft.rfft(f), np.fft.rfft(h)

    def R(spec, j=0):
        return grid.from_spectral(r2 * spectral_derivative(spec, grid, j))

    to = grid.to_spectral
    back = grid.from_spectral
    d2 = -(k**2)
    out = 3.0 * f * h - 3.0 * R(F, 2) * R(H, 2)
    p1 = to(R(F, 1) * R(H, 1))
    out += 4.0 * kappa**2 * back((-5.0 + r2 * d2) * p1)
    p0 = to(R(F) * R(H))
    out += 4.0 * kappa**2 * back((5.0 * d2 + 2.0 * r2 * d2**2) * p0)
    return out / (16.0 * kappa**5)


# --------------------------------------------------------------------------
# problem and result types


@dataclass
class SchrodingerProblem:
    """``-d^2 + V + kappa^2`` with ``V`` sampled on a periodic grid.

    ``asymptotic_left``/``asymptotic_right`` feed the Robin data of the Jost
    engine; by default they are the edge sample of ``V``.
    """

    potential: Field
    kappa: float
    asymptotic_left: Optional[float] = None
    asymptotic_right: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        v = self.potential.values
        if self.asymptotic_left is None:
            self.asymptotic_left = float(v[0])
        if self.asymptotic_right is None:
            self.asymptotic_right = float(v[0])

    @property
    def grid(self) -> Grid:
        return self.potential.grid

    def check_positive(self) -> None:
        vmin = float(np.min(self.potential.values))
        if not self.kappa**2 > -vmin + POSITIVITY_MARGIN:
            raise SpectralConditionError(
                f"kappa^2 = {self.kappa**2:g} does not exceed -min(V) + {POSITIVITY_MARGIN} "
                f"= {-vmin + POSITIVITY_MARGIN:g}"
            )


@dataclass(frozen=True)
class GreensDiagonal:
    """``g(x; kappa, V)`` on the grid together with the engine that produced it.

    ``log_scaled`` holds ``y = log(2 kappa g)`` when the engine computes it
    directly; :meth:`perturbation` then keeps full relative precision.
    """

    values: Field
    method: str
    kappa: float
    order: Optional[int] = None
    log_scaled: Optional[np.ndarray] = field(default=None, repr=False)
    iterations: int = 0

    def perturbation(self) -> np.ndarray:
        """``g - 1/(2 kappa)``."""
        if self.log_scaled is not None:
            return np.expm1(self.log_scaled) / (2.0 * self.kappa)
        return self.values.values - 1.0 / (2.0 * self.kappa)


@dataclass(frozen=True)
class JostPair:
    """Log-derivatives of the Jost solutions and the solutions themselves.

    ``psi_minus`` decays at ``-inf`` (normalised to 1 at ``x = -L``) and
    ``psi_plus`` at ``+inf`` (normalised to 1 at ``x = L``).
    """

    m_plus: np.ndarray
    m_minus: np.ndarray
    grid: Grid
    kappa: float
    log_psi_plus: Optional[np.ndarray] = field(default=None, repr=False)
    log_psi_minus: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def psi_minus(self) -> Field:
        if self.log_psi_minus is not None:
            return Field(self.grid, np.exp(self.log_psi_minus))
        return Field(self.grid, np.exp(_cumulative(self.m_minus, self.grid.dx)))

    @property
    def psi_plus(self) -> Field:
        if self.log_psi_plus is not None:
            return Field(self.grid, np.exp(self.log_psi_plus))
        # integrate m_plus from x to L
        tail = _cumulative(self.m_plus[::-1], self.grid.dx)[::-1]
        edge = self.grid.dx * 0.5 * (self.m_plus[-1] + self.m_plus[0])
        return Field(self.grid, np.exp(-(tail + edge)))

    @property
    def wronskian(self) -> np.ndarray:
        """``psi_+' psi_- - psi_+ psi_-'`` at every node."""
        pp, pm = self.psi_plus.values, self.psi_minus.values
        return pp * pm * (self.m_plus - self.m_minus)


def _cumulative(m: np.ndarray, dx: float) -> np.ndarray:
    out = np.zeros_like(m)
    out[1:] = np.cumsum(0.5 * (m[1:] + m[:-1])) * dx
    return out


# --------------------------------------------------------------------------
# engines


def _solve_log_green(
    V: np.ndarray,
    grid: Grid,
    kappa: float,
    y0: Optional[np.ndarray] = None,
    tol: float = 1e-15,
    maxiter: int = 400,
    history: int = 5,
):
    """Fixed point for ``y = log(2 kappa g)`` with Anderson mixing.

    ``y = y_lin + L^{-1} Q(y)`` with ``L = -2 d^2 + 8 kappa^2``,
    ``y_lin = -4 L^{-1} V`` and ``Q(y) = (y')^2 + 4 kappa^2 (e^{-2y} - 1 + 2y)``.
    """
    k = grid.k
    inv = 1.0 / (2.0 * k**2 + 8.0 * kappa**2)
    y_lin = grid.from_spectral(-4.0 * inv * np.fft.rfft(V))
    ik = 1j * k
    ik[-1] = 0.0
    k2 = 4.0 * kappa**2

    def G(y):
        Y = np.fft.rfft(y)
        yp = grid.from_spectral(ik * Y)
        q = yp * yp + k2 * (np.expm1(-2.0 * y) + 2.0 * y)
        return y_lin + grid.from_spectral(inv * np.fft.rfft(q))

    y = y_lin.copy() if y0 is None else np.array(y0, dtype=float)
    X, F = [], []
    scale = max(float(np.max(np.abs(y_lin))), 1e-300)
    for it in range(1, maxiter + 1):
        gy = G(y)
        r = gy - y
        err = float(np.max(np.abs(r)))
        if not np.isfinite(err):
            break
        if err <= tol * scale:
            return gy, it
        X.append(gy)
        F.append(r)
        if len(F) > history + 1:
            X.pop(0)
            F.pop(0)
        if len(F) > 1:
            dF = np.array([F[i + 1] - F[i] for i in range(len(F) - 1)]).T
            dX = np.array([X[i + 1] - X[i] for i in range(len(X) - 1)]).T
            gamma, *_ = np.linalg.lstsq(dF, r, rcond=None)
            y = gy - dX @ gamma
        else:
            y = gy
    raise ConvergenceError(
        f"Green's function fixed point did not converge in {maxiter} iterations "
        f"(kappa={kappa:g}, max|V|={np.max(np.abs(V)):g})"
    )


def _riccati_sweep(Vfine: np.ndarray, kappa2: float, m0: float, h: float, direction: int):
    """RK4 for ``m' = kappa^2 + V - m^2`` together with ``l' = m`` (``l = log psi``).

    ``Vfine`` holds half-step samples.  Returns ``(m, l)`` at every full step
    (``len(Vfine) // 2 + 1`` values each) in the order of integration, with
    ``l = 0`` at the starting point.
    """
    nsteps = (len(Vfine) - 1) // 2
    out = np.empty(nsteps + 1)
    logs = np.empty(nsteps + 1)
    m = m0
    ell = 0.0
    out[0] = m
    logs[0] = 0.0
    s = h * direction
    vals = (kappa2 + Vfine).tolist()
    for i in range(nsteps):
        a, b, c = vals[2 * i], vals[2 * i + 1], vals[2 * i + 2]
        k1 = a - m * m
        t2 = m + 0.5 * s * k1
        k2 = b - t2 * t2
        t3 = m + 0.5 * s * k2
        k3 = b - t3 * t3
        t4 = m + s * k3
        k4 = c - t4 * t4
        ell = ell + s * (m + 2.0 * t2 + 2.0 * t3 + t4) / 6.0
        m = m + s * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i + 1] = m
        logs[i + 1] = ell
    return out, logs


def jost_pair(prob: SchrodingerProblem, substeps: int = 4) -> JostPair:
    """Riccati log-derivatives ``m_pm = psi_pm'/psi_pm`` and ``log psi_pm`` on the grid."""
    grid = prob.grid
    n = grid.num_points
    kappa2 = prob.kappa**2
    fine = 2 * substeps
    # band-limited samples at spacing dx / (2 substeps), closed periodically
    spec = np.fft.rfft(prob.potential.values)
    padded = np.zeros(n * fine // 2 + 1, dtype=complex)
    padded[: spec.size] = spec
    padded[spec.size - 1] *= 0.5  # split the Nyquist mode
    vf = np.fft.irfft(padded, n=n * fine) * fine
    vf = np.append(vf, vf[0])
    h = grid.dx / substeps

    m_left = np.sqrt(kappa2 + prob.asymptotic_left)
    m_right = -np.sqrt(kappa2 + prob.asymptotic_right)
    fwd, lfwd = _riccati_sweep(vf, kappa2, m_left, h, +1)
    bwd, lbwd = _riccati_sweep(vf[::-1], kappa2, m_right, h, -1)
    bwd, lbwd = bwd[::-1], lbwd[::-1]
    return JostPair(
        m_plus=bwd[::substeps][:n],
        m_minus=fwd[::substeps][:n],
        grid=grid,
        kappa=prob.kappa,
        log_psi_plus=lbwd[::substeps][:n],
        log_psi_minus=lfwd[::substeps][:n],
    )


def _free_diag_matrix(grid: Grid, kappa: float):
    """First column of the periodic collocation matrix of ``R_0(kappa)``."""
    n = grid.num_points
    kfull = 2 * np.pi * np.fft.fftfreq(n, d=grid.dx)
    return np.real(np.fft.ifft(1.0 / (kfull**2 + kappa**2)))


def _collocation_operator(V: np.ndarray, grid: Grid, kappa: float) -> np.ndarray:
    n = grid.num_points
    kfull = 2 * np.pi * np.fft.fftfreq(n, d=grid.dx)
    col = np.real(np.fft.ifft(kfull**2))
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    A = col[idx]
    A[np.diag_indices(n)] += V + kappa**2
    return A


def _exact_leading(V: np.ndarray, grid: Grid, kappa: float) -> np.ndarray:
    return 1.0 / (2.0 * kappa) - linear_kernel_term(V, grid, kappa)


def _discrete_first_order_diag(V: np.ndarray, grid: Grid, kappa: float) -> np.ndarray:
    """``diag(R0 V R0)`` of the collocation matrices (circular correlation)."""
    r = _free_diag_matrix(grid, kappa)
    r2 = r * r  # symmetric circulant: (R0)_{ij}^2 depends on i - j
    return np.real(np.fft.ifft(np.fft.fft(r2) * np.fft.fft(V)))


def _dense_green(V: np.ndarray, grid: Grid, kappa: float) -> np.ndarray:
    A = _collocation_operator(V, grid, kappa)
    inv_diag = np.diag(np.linalg.inv(A))
    r0 = _free_diag_matrix(grid, kappa)[0]
    remainder = inv_diag - r0 + _discrete_first_order_diag(V, grid, kappa)
    return _exact_leading(V, grid, kappa) + remainder / grid.dx


def _series_green(V: np.ndarray, grid: Grid, kappa: float, order: int) -> np.ndarray:
    g = 1.0 / (2.0 * kappa) * np.ones_like(V)
    if order >= 1:
        g = _exact_leading(V, grid, kappa)
    if order < 2:
        return g
    n = grid.num_points
    kfull = 2 * np.pi * np.fft.fftfreq(n, d=grid.dx)
    sym = 1.0 / (kfull**2 + kappa**2)

    def R0_cols(M):
        return np.real(np.fft.ifft(sym[:, None] * np.fft.fft(M, axis=0), axis=0))

    Y = R0_cols(V[:, None] * R0_cols(np.eye(n)))
    prev = None
    for ell in range(2, order + 1):
        Y = R0_cols(V[:, None] * Y)
        term = (-1) ** ell * np.diag(Y) / grid.dx
        size = float(np.max(np.abs(term)))
        if prev is not None and prev > 0 and size >= prev:
            raise ConvergenceError(
                f"Neumann series term ratio {size / prev:.3g} >= 1 at order {ell}"
            )
        prev = size
        g = g + term
    return g


def series_parameter(prob: SchrodingerProblem) -> float:
    """Upper bound for ``||sqrt(R0) V sqrt(R0)||_op``.

    The smaller of ``sup|V| / kappa^2`` and the Hilbert-Schmidt norm
    ``kappa^{-1/2} ||V||_{H^{-1}_kappa}``.
    """

    V = prob.potential
    sup = V.max_abs() / prob.kappa**2
    hs = hs_kappa_norm(V, -1.0, prob.kappa) / np.sqrt(prob.kappa)
    return min(sup, hs)


def diagonal_green(
    prob: SchrodingerProblem,
    method: str = "spectral",
    order: int = 8,
    substeps: int = 4,
    initial_guess: Optional[np.ndarray] = None,
) -> GreensDiagonal:
    """Diagonal Green's function ``g(x; kappa, V)`` by the chosen engine."""
    prob.check_positive()
    grid = prob.grid
    V = prob.potential.values
    kappa = prob.kappa
    if method == "spectral":
        y, its = _solve_log_green(V, grid, kappa, y0=initial_guess)
        g = np.exp(y) / (2.0 * kappa)
        return GreensDiagonal(Field(grid, g), "spectral", kappa, log_scaled=y, iterations=its)
    if method == "jost":
        jp = jost_pair(prob, substeps=substeps)
        diffm = jp.m_minus - jp.m_plus
        if np.any(diffm <= 0):
            raise SpectralConditionError("Jost log-derivatives crossed: bound state at -kappa^2")
        return GreensDiagonal(Field(grid, 1.0 / diffm), "jost", kappa)
    if method == "dense_inverse":
        return GreensDiagonal(Field(grid, _dense_green(V, grid, kappa)), "dense_inverse", kappa)
    if method == "series":
        rho = series_parameter(prob)
        if rho >= 1.0:
            raise ConvergenceError(
                f"series parameter {rho:.3g} >= 1; Neumann series not guaranteed to converge"
            )
        g = _series_green(V, grid, kappa, order)
        return GreensDiagonal(Field(grid, g), "series", kappa, order=order)
    raise ParameterError(f"unknown method {method!r}")


def green_of(V: Field, kappa: float, method: str = "spectral", **kw) -> GreensDiagonal:
    return diagonal_green(SchrodingerProblem(V, kappa), method=method, **kw)


# --------------------------------------------------------------------------
# identity checks


def greens_ode_residual(gd: GreensDiagonal, V: Field) -> float:
    """Normalised max-norm of ``g''' - 2 V g' - 2 (V g)' - 4 kappa^2 g'``."""
    grid = V.grid
    if gd.values.grid != grid:
        raise ParameterError("Green's function and potential live on different grids")
    g = gd.values.values
    G = np.fft.rfft(g)
    g1 = grid.from_spectral(spectral_derivative(G, grid, 1))
    g3 = grid.from_spectral(spectral_derivative(G, grid, 3))
    v = V.values
    res = g3 - 2.0 * v * g1 - 2.0 * diff(v * g, grid, 1) - 4.0 * gd.kappa**2 * g1

    scale = sobolev_norm(Field(grid, g1), 2) + 1.0
    return float(np.max(np.abs(res)) / scale)


def translation_covariance_check(q: Field, kappa: float, h: float, method: str = "spectral") -> float:
    """``max |g(x; q(. + h)) - g(x + h; q)|`` for a grid-aligned shift ``h``."""
    grid = q.grid
    shift = h / grid.dx
    n = int(round(shift))
    if abs(shift - n) > 1e-9:
        raise ParameterError(f"shift {h} is not a multiple of dx = {grid.dx}")
    g = green_of(q, kappa, method).values.values
    shifted_q = Field(grid, np.roll(q.values, -n))
    g_shifted = green_of(shifted_q, kappa, method).values.values
    return float(np.max(np.abs(g_shifted - np.roll(g, -n))))


def _hs_oversample(grid: Grid, kappa: float, rel_tail: float = 1e-11) -> int:
    """Smallest power-of-two refinement making the ``|eta| > xi_max`` tail negligible.

    The lattice sum ``sum_l w_l w_{l+m}`` misses about ``2 / (3 xi_max^3)`` out of
    ``pi / (2 kappa^3)``.
    """
    needed = (4.0 * kappa**3 / (3.0 * np.pi * rel_tail)) ** (1.0 / 3.0)
    factor = 1
    while grid.xi_max * factor < needed and factor < 2**12:
        factor *= 2
    return factor


def _pair_correlation(grid: Grid, kappa: float, oversample: int) -> np.ndarray:
    """``A(m) = sum_l w(eta_l) w(eta_l + xi_m)`` on the refined lattice, ``m = 0..N/2``.

    ``w = 1/(eta^2 + kappa^2)``; uses a linear (zero-padded) correlation.
    """
    M = grid.num_points * oversample
    eta = grid.dxi * np.arange(-(M // 2), M // 2)
    w = resolvent_symbol(eta, kappa)
    size = 2 * M
    Wf = np.fft.rfft(w, n=size)
    corr = np.fft.irfft(np.conj(Wf) * Wf, n=size)
    return corr[: grid.num_points // 2 + 1]


def hilbert_schmidt_check(q: Field, kappa: float, oversample: Optional[int] = None):
    """Both sides of ``||sqrt(R0) q sqrt(R0)||_{I_2}^2 = ||q||^2_{H^{-1}_kappa} / kappa``.

    The left side is the squared Frobenius norm of the sandwiched multiplication
    operator on a refined copy of the grid (``q`` is band-limited, so refinement
    only enlarges the frequency window of the resolvent factors).
    """

    grid = q.grid
    if oversample is None:
        oversample = _hs_oversample(grid, kappa)
    c = q.spectrum / grid.num_points
    c2 = np.abs(c) ** 2
    c2[-1] *= 0.5  # Nyquist coefficient is shared by +/- N/2
    A = _pair_correlation(grid, kappa, oversample)
    lhs = float(np.sum(grid.mode_weight * c2 * A))
    rhs = hs_kappa_norm(q, -1.0, kappa) ** 2 / kappa
    return lhs, rhs


def _kernel_diagonal_symbol(xi: np.ndarray, kappa: float) -> np.ndarray:
    """``(2 pi)^{-1} int d eta / ((eta^2 + kappa^2)((eta + xi)^2 + kappa^2))`` by quadrature."""
    def integrand(theta):
        # eta = kappa tan(theta)
        eta = kappa * np.tan(theta)
        return 1.0 / (kappa * ((eta + xi) ** 2 + kappa**2))

    val, _ = integrate.quad_vec(integrand, -np.pi / 2, np.pi / 2, epsabs=0.0, epsrel=1e-14, limit=2000)
    return val / (2.0 * np.pi)


def verify_linear_identity(f: Field, kappa: float) -> float:
    """Max pairwise gap between the three forms of the linear kernel identity.

    The kernel form is evaluated from its Fourier integral by quadrature, the
    other two as closed-form multipliers.
    """
    if kappa < 1:
        raise ParameterError("identity check requires kappa >= 1")
    grid = f.grid
    k = grid.k
    F = f.spectrum
    kernel = 16 * kappa**5 * grid.from_spectral(_kernel_diagonal_symbol(k, kappa) * F)
    resolvent = 16 * kappa**4 * grid.from_spectral(resolvent_symbol(k, 2 * kappa) * F)
    differential = grid.from_spectral(
        (4 * kappa**2 - k**2 + resolvent_symbol(k, 2 * kappa) * k**4) * F
    )
    norm = np.sqrt(np.sum(f.values**2) * grid.dx)
    if norm == 0:
        return 0.0
    gaps = [
        np.max(np.abs(kernel - resolvent)),
        np.max(np.abs(kernel - differential)),
        np.max(np.abs(resolvent - differential)),
    ]
    return float(max(gaps) / norm)


def quadratic_symbol(xi, eta, kappa: float):
    """Bilinear symbol of ``16 kappa^5 <delta_x, R0 f R0 h R0 delta_x>`` on ``fhat(xi-eta) hhat(eta)``."""
    a = xi - eta
    k2 = 4.0 * kappa**2
    num = 8.0 * kappa**4 * (xi**2 + a**2 + eta**2 + 24.0 * kappa**2)
    return num / ((xi**2 + k2) * (a**2 + k2) * (eta**2 + k2))


def _check_band(f: Field, cutoff: int) -> None:
    F = f.spectrum
    total = float(np.sum(np.abs(F) ** 2))
    high = float(np.sum(np.abs(F[cutoff:]) ** 2))
    if total > 0 and high > 1e-24 * total:
        raise ResolutionError(
            f"field has relative spectral energy {high / total:.2e} above mode {cutoff}"
        )


def quadratic_by_convolution(f: Field, h: Field, kappa: float) -> np.ndarray:
    """Left side of the quadratic identity by direct O(N^2) summation over frequency pairs."""
    grid = f.grid
    n = grid.num_points
    cf = np.fft.fft(f.values) / n
    ch = np.fft.fft(h.values) / n
    idx = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    out = np.zeros(n, dtype=complex)
    # linear convolution of coefficient sequences indexed by integer wavenumber
    kk = idx[:, None]
    jj = idx[None, :]
    diffidx = kk - jj
    valid = np.abs(diffidx) < n // 2
    coef_f = np.where(valid, cf[diffidx % n], 0.0)
    sym = quadratic_symbol(kk * grid.dxi, jj * grid.dxi, kappa)
    out = np.sum(sym * coef_f * ch[None, :], axis=1)
    return np.real(np.fft.ifft(out * n))


def verify_quadratic_identity(f: Field, h: Field, kappa: float) -> float:
    """Relative max gap between convolution and multiplier forms of the quadratic identity.

    Inputs must be band-limited below the 2/3 cut-off; both sides are compared
    after 2/3 truncation, where the pseudo-spectral products are exact.
    """
    if kappa < 1:
        raise ParameterError("identity check requires kappa >= 1")
    grid = f.grid
    cutoff = grid.num_points // 3
    _check_band(f, cutoff // 2 + 1)
    _check_band(h, cutoff // 2 + 1)
    lhs = quadratic_by_convolution(f, h, kappa)
    rhs = 16 * kappa**5 * quadratic_kernel_term(f.values, h.values, grid, kappa)
    mask = grid.dealias_mask
    lhs = grid.from_spectral(np.fft.rfft(lhs) * mask)
    rhs = grid.from_spectral(np.fft.rfft(rhs) * mask)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(lhs - rhs)) / scale)


# --------------------------------------------------------------------------
# perturbation determinant and H_kappa


def compute_alpha(q: Field, kappa: float, method: str = "spectral", substeps: int = 8) -> float:
    """Renormalised log transmission coefficient ``alpha(kappa, q)``.

    With ``a(i kappa) = W(psi_+, psi_-) / (2 kappa)`` the Jost function,
    ``alpha = -log a(i kappa) + (2 kappa)^{-1} int q``.  The Riccati relations
    ``m_pm = (g' -+ 1) / (2 g)`` turn ``log a`` into ``int (1/(2g) - kappa) dx``,
    which is what the spectral engine evaluates.  The ``jost`` engine integrates
    the Riccati log-derivatives directly.
    """
    grid = q.grid
    v = q.values
    prob = SchrodingerProblem(q, kappa, 0.0, 0.0)
    prob.check_positive()
    if method == "spectral":
        gd = diagonal_green(prob, "spectral")
        y = gd.log_scaled
        inv = 1.0 / (2.0 * grid.k**2 + 8.0 * kappa**2)
        y_lin = grid.from_spectral(-4.0 * inv * np.fft.rfft(v))
        z = y - y_lin
        # kappa (1 - e^{-y}) = kappa (y - (e^{-y} - 1 + y)); kappa * int y_lin cancels int q/(2 kappa)
        integrand = -kappa * (np.expm1(-y) + y) + kappa * z
        return float(np.sum(integrand) * grid.dx)
    if method == "jost":
        jp = jost_pair(prob, substeps=substeps)
        mm, mp = jp.m_minus, jp.m_plus
        if np.any(mm - mp <= 0):
            raise SpectralConditionError("Wronskian changed sign: bound state at -kappa^2")
        # log a at x = -L: -int (m_+ + kappa) over the box, plus the local log term
        closed_mp = np.append(mp, -kappa)
        log_a = -np.sum(0.5 * (closed_mp[1:] + closed_mp[:-1]) + kappa) * grid.dx
        log_a += np.log((mm[0] - mp[0]) / (2.0 * kappa))
        return float(-log_a + np.sum(v) * grid.dx / (2.0 * kappa))
    raise ParameterError(f"unknown method {method!r}")


def momentum(q: Field) -> float:
    """``P(q) = 1/2 int q^2``."""
    return 0.5 * float(np.sum(q.values**2) * q.grid.dx)


def kdv_hamiltonian(q: Field) -> float:
    """``H_KdV(q) = int (q'^2 / 2 + q^3)``."""
    qp = diff(q.values, q.grid, 1)
    return float(np.sum(0.5 * qp**2 + q.values**3) * q.grid.dx)


def compute_hkappa_functional(q: Field, kappa: float, method: str = "spectral") -> float:
    """``H_kappa(q) = -16 kappa^5 alpha(kappa, q) + 4 kappa^2 P(q)``."""
    return -16.0 * kappa**5 * compute_alpha(q, kappa, method) + 4.0 * kappa**2 * momentum(q)


# --------------------------------------------------------------------------
# series tail


def greens_tail_remainder(q: Field, W: Field, kappa: float, s: int = 1, method: str = "spectral") -> float:
    """``kappa^5 || (g + lin - quad)^{(s+1)} ||_{L^2}`` for ``V = q + W``.

    ``lin`` and ``quad`` are the first- and second-order kernel terms of the
    resolvent expansion, evaluated through their multiplier forms.
    """
    if int(s) != s or s < 1:
        raise ParameterError(f"s must be an integer >= 1, got {s}")
    grid = q.grid
    V = q.values + W.values
    gd = diagonal_green(SchrodingerProblem(Field(grid, V), kappa), method)
    pert = gd.perturbation()  # constant 1/(2 kappa) is killed by the derivative
    lin = linear_kernel_term(V, grid, kappa)
    quad = quadratic_kernel_term(V, V, grid, kappa)
    rem = pert + lin - quad
    d = diff(rem, grid, s + 1)
    return float(kappa**5 * np.sqrt(np.sum(d**2) * grid.dx))
