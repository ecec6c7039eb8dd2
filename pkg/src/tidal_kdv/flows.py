"""Right-hand sides and pseudo-spectral integrators for KdV and its H_kappa approximations.

Every flow is split as ``q_t = L q + N(q, t)`` where ``L`` is the exact linear
dispersion multiplier (``i xi^3`` for the KdV family, ``4 i kappa^2 xi^3 /
(xi^2 + 4 kappa^2)`` for the H_kappa family).  ``L`` is integrated exactly by an
integrating factor (Lawson RK4) or by ETDRK4; ``N`` is explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .background import PeriodizedBackground
from .errors import DivergenceError, ParameterError, ResolutionError, SpectralConditionError
from .schrodinger import POSITIVITY_MARGIN, _solve_log_green
from .spectral_grid import Field, Grid, Multiplier, sobolev_norm

KINDS = ("kdv", "tidal_kdv", "kdv_with_potential", "hk", "tidal_hk")
BLOWUP_THRESHOLD = 1e6
WRAP_THRESHOLD = 1e-6
RK4_STABILITY = 2.8  # |dt * lambda| on the imaginary axis
ALIASING_TOLERANCE = 1e-8


class PotentialHistory:
    """Time-dependent potential ``V(t)`` from snapshots, cubic spline in time."""

    def __init__(self, grid: Grid, times: Sequence[float], samples: np.ndarray):
        times = np.asarray(times, dtype=float)
        samples = np.asarray(samples, dtype=float)
        if samples.shape != (times.size, grid.num_points):
            raise ParameterError("snapshot array does not match times x grid")
        self.grid = grid
        self.times = times
        self._spline = CubicSpline(times, samples, axis=0)

    def __call__(self, t: float) -> np.ndarray:
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise ParameterError(f"t = {t} outside stored range [{self.times[0]}, {self.times[-1]}]")
        return self._spline(t)

    @classmethod
    def constant(cls, V: Field, t_max: float) -> "PotentialHistory":
        v = V.values
        return cls(V.grid, [0.0, t_max / 2, t_max], np.stack([v, v, v]))


@dataclass
class FlowSpec:
    """Which evolution to run.

    ``kappa`` is required exactly for ``hk``/``tidal_hk``; ``background`` exactly
    for ``tidal_kdv``/``tidal_hk``; ``external_potential`` for ``kdv_with_potential``.
    """

    kind: str
    kappa: Optional[float] = None
    background: Optional[PeriodizedBackground] = None
    external_potential: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ParameterError(f"unknown flow kind {self.kind!r}")
        needs_kappa = self.kind in ("hk", "tidal_hk")
        if needs_kappa != (self.kappa is not None):
            raise ParameterError(f"kappa must be given iff kind is hk/tidal_hk (kind={self.kind})")
        if needs_kappa and not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        needs_bg = self.kind in ("tidal_kdv", "tidal_hk")
        if needs_bg != (self.background is not None):
            raise ParameterError(f"background must be given iff kind is tidal_* (kind={self.kind})")
        if (self.kind == "kdv_with_potential") != (self.external_potential is not None):
            raise ParameterError("external_potential is required iff kind is kdv_with_potential")


@dataclass
class FlowState:
    time: float
    q: Field
    wrap_flag: bool = False


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    scheme: str = "if_rk4"
    dealias: bool = False

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.scheme not in ("if_rk4", "etdrk4"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")


@dataclass
class Trajectory:
    """States recorded by :func:`evolve`; ``wrap_time`` is the first flagged sample time."""

    states: List[FlowState] = field(default_factory=list)
    wrap_time: Optional[float] = None
    steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def array(self) -> np.ndarray:
        return np.stack([s.q.values for s in self.states])


def linear_symbol(spec: FlowSpec) -> Multiplier:
    """Dispersion multiplier treated exactly by the integrators."""
    if spec.kind in ("hk", "tidal_hk"):
        k2 = 4.0 * spec.kappa**2
        return Multiplier(lambda xi: 1j * k2 * xi**3 / (xi**2 + k2))
    return Multiplier(lambda xi: 1j * xi**3)


class _Model:
    """Array-level ``N(qhat, t)`` for one flow on one grid."""

    def __init__(self, spec: FlowSpec, grid: Grid, dealias: bool = False):
        self.spec = spec
        self.grid = grid
        k = grid.k
        self.ik = 1j * k
        self.ik[-1] = 0.0
        self.L = linear_symbol(spec).on(grid)
        self.L[-1] = 0.0
        self.mask = grid.dealias_mask if dealias else None
        self._y = None
        if spec.background is not None:
            if spec.background.grid != grid:
                raise ParameterError("background lives on a different grid")
            self.W = spec.background.samples()
            self.What = np.fft.rfft(self.W)
        else:
            self.W = None
            self.What = None
        if spec.kind in ("hk", "tidal_hk"):
            kappa = spec.kappa
            self.lin_inv = -4.0 / (2.0 * k**2 + 8.0 * kappa**2)
            if spec.kind == "tidal_hk":
                self.LW = self.L * self.What
                self.LW[-1] = 0.0

    def _phys(self, qhat):
        return self.grid.from_spectral(qhat)

    def nonlinear(self, qhat: np.ndarray, t: float) -> np.ndarray:
        kind = self.spec.kind
        if self.mask is not None:
            qhat = qhat * self.mask
        if kind == "kdv":
            q = self._phys(qhat)
            out = 3.0 * self.ik * np.fft.rfft(q * q)
        elif kind == "tidal_kdv":
            uhat = qhat + self.What
            u = self._phys(uhat)
            out = 3.0 * self.ik * np.fft.rfft(u * u) + self.L * self.What
        elif kind == "kdv_with_potential":
            q = self._phys(qhat)
            V = self.spec.external_potential(t)
            out = self.ik * np.fft.rfft(3.0 * q * q + 6.0 * V * q)
        else:
            out = self._hk_nonlinear(qhat)
        if self.mask is not None:
            out = out * self.mask
        return out

    def _hk_nonlinear(self, qhat: np.ndarray) -> np.ndarray:
        kappa = self.spec.kappa
        grid = self.grid
        uhat = qhat if self.What is None else qhat + self.What
        u = self._phys(uhat)
        if kappa**2 <= -float(np.min(u)) + POSITIVITY_MARGIN:
            raise SpectralConditionError(f"kappa={kappa:g} too small for min(u)={np.min(u):g}")
        y, _ = _solve_log_green(u, grid, kappa, y0=self._y)
        self._y = y
        Y = np.fft.rfft(y)
        Zhat = Y - self.lin_inv * uhat
        yp = grid.from_spectral(self.ik * Y)
        # 16 kappa^5 g' + 4 kappa^2 u' - L u = 8 kappa^4 [(e^y - 1) y' + z']
        out = 8.0 * kappa**4 * (np.fft.rfft(np.expm1(y) * yp) + self.ik * Zhat)
        if self.What is not None:
            out = out + self.LW
        return out

    def full_rhs(self, qhat: np.ndarray, t: float) -> np.ndarray:
        return self.L * qhat + self.nonlinear(qhat, t)


def aliasing_fraction(values: np.ndarray, grid: Grid) -> float:
    """Share of the discrete L^2 energy sitting above the 2/3 cutoff."""
    power = grid.mode_weight * np.abs(np.fft.rfft(values)) ** 2
    total = float(np.sum(power))
    return float(np.sum(power[~grid.dealias_mask])) / total if total > 0 else 0.0


def rhs(spec: FlowSpec, state: FlowState, dealias: bool = False) -> Field:
    """Semi-discrete right-hand side ``dq/dt``.

    Without de-aliasing the input must be band-limited: if more than
    ``ALIASING_TOLERANCE`` of the energy of ``u`` lies above the 2/3 cutoff a
    :class:`ResolutionError` is raised.
    """
    grid = state.q.grid
    if spec.background is not None and spec.background.grid != grid:
        raise ParameterError("background lives on a different grid")
    if not dealias:
        u = state.q.values
        if spec.background is not None:
            u = u + spec.background.samples()
        frac = aliasing_fraction(u, grid)
        if frac > ALIASING_TOLERANCE:
            raise ResolutionError(f"energy fraction {frac:.3g} above the 2/3 cutoff; enable dealias")
    model = _Model(spec, grid, dealias)
    qhat = state.q.spectrum.copy()
    return Field.from_spectrum(state.q.grid, model.full_rhs(qhat, state.time))


def advective_speed(spec: FlowSpec, q: Field) -> float:
    """Rough bound on the explicit part's spectral radius: ``6 max|u| xi_max``."""
    u = q.values if spec.background is None else q.values + spec.background.samples()
    vmax = float(np.max(np.abs(u)))
    if spec.kind == "kdv_with_potential":
        vmax += float(np.max(np.abs(spec.external_potential(0.0))))
    return 6.0 * max(vmax, 1e-12) * q.grid.xi_max


def check_stability(spec: FlowSpec, q0: Field, cfg: IntegratorConfig) -> None:
    lam = advective_speed(spec, q0)
    if cfg.dt * lam > RK4_STABILITY:
        raise ParameterError(
            f"dt={cfg.dt:g} too large: dt * 6 max|u| xi_max = {cfg.dt * lam:.3g} > {RK4_STABILITY}"
        )


class _IFRK4:
    def __init__(self, model: _Model, dt: float):
        self.model = model
        self.dt = dt
        self.E = np.exp(0.5 * dt * model.L)
        self.E2 = self.E**2

    def step(self, qhat, t):
        N, dt, E, E2 = self.model.nonlinear, self.dt, self.E, self.E2
        k1 = dt * N(qhat, t)
        k2 = dt * N(E * (qhat + 0.5 * k1), t + 0.5 * dt)
        k3 = dt * N(E * qhat + 0.5 * k2, t + 0.5 * dt)
        k4 = dt * N(E2 * qhat + E * k3, t + dt)
        return E2 * qhat + (E2 * k1 + 2.0 * E * (k2 + k3) + k4) / 6.0


class _ETDRK4:
    """Cox-Matthews ETDRK4 with Kassam-Trefethen contour-averaged coefficients."""

    def __init__(self, model: _Model, dt: float, contour_points: int = 32):
        self.model = model
        self.dt = dt
        Ldt = dt * model.L
        self.E = np.exp(Ldt)
        self.E2 = np.exp(0.5 * Ldt)
        r = np.exp(2j * np.pi * (np.arange(1, contour_points + 1) - 0.5) / contour_points)
        LR = Ldt[:, None] + r[None, :]
        self.Q = dt * np.mean((np.exp(LR / 2) - 1) / LR, axis=1)
        self.f1 = dt * np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR**2)) / LR**3, axis=1)
        self.f2 = dt * np.mean((2 + LR + np.exp(LR) * (-2 + LR)) / LR**3, axis=1)
        self.f3 = dt * np.mean((-4 - 3 * LR - LR**2 + np.exp(LR) * (4 - LR)) / LR**3, axis=1)

    def step(self, qhat, t):
        N, dt = self.model.nonlinear, self.dt
        Nv = N(qhat, t)
        a = self.E2 * qhat + self.Q * Nv
        Na = N(a, t + 0.5 * dt)
        b = self.E2 * qhat + self.Q * Na
        Nb = N(b, t + 0.5 * dt)
        c = self.E2 * a + self.Q * (2 * Nb - Nv)
        Nc = N(c, t + dt)
        return self.E * qhat + Nv * self.f1 + 2 * (Na + Nb) * self.f2 + Nc * self.f3


def _edge_wrapped(q: np.ndarray) -> bool:
    qmax = float(np.max(np.abs(q)))
    if qmax == 0:
        return False
    edges = max(abs(q[0]), abs(q[-1]))
    return edges > WRAP_THRESHOLD * qmax


def evolve(
    spec: FlowSpec,
    q0: Field,
    T: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    callbacks: Sequence[Callable[[FlowState], None]] = (),
    sample_times: Optional[Sequence[float]] = None,
    n_samples: int = 2,
    check: bool = True,
) -> Trajectory:
    """Advance ``q0`` to time ``T`` and record samples.

    Samples are taken at ``sample_times`` (snapped to the step grid) or at
    ``n_samples`` equispaced times including 0 and ``T``.  Each callback
    receives every recorded state.
    """
    if not math.isfinite(T):
        raise ParameterError("final time must be finite")
    if check:
        check_stability(spec, q0, cfg)
    grid = q0.grid
    nsteps = max(1, int(math.ceil(abs(T) / cfg.dt - 1e-9))) if T != 0 else 0
    dt = T / nsteps if nsteps else cfg.dt
    model = _Model(spec, grid, cfg.dealias)
    stepper = (_IFRK4 if cfg.scheme == "if_rk4" else _ETDRK4)(model, dt)

    if sample_times is None:
        sample_times = np.linspace(0.0, T, max(n_samples, 2)) if nsteps else [0.0]
    sample_steps = sorted({int(round(float(ts) / dt)) if nsteps else 0 for ts in sample_times})

    traj = Trajectory()
    qhat = q0.spectrum.copy()
    wrapped = _edge_wrapped(q0.values) and spec.background is not None
    if wrapped:
        traj.wrap_time = 0.0

    def record(step_index, qhat):
        q = q0 if step_index == 0 else Field.from_spectrum(grid, qhat)
        state = FlowState(step_index * dt, q, wrapped)
        traj.states.append(state)
        for cb in callbacks:
            cb(state)

    if 0 in sample_steps:
        record(0, qhat)
    last_valid = FlowState(0.0, q0, wrapped)
    for n in range(1, nsteps + 1):
        qhat = stepper.step(qhat, (n - 1) * dt)
        q = grid.from_spectral(qhat)
        qmax = float(np.max(np.abs(q))) if np.all(np.isfinite(q)) else np.inf
        if qmax > BLOWUP_THRESHOLD:
            raise DivergenceError(
                f"max|q| exceeded {BLOWUP_THRESHOLD:g} at t={n * dt:g}", state=last_valid
            )
        if not wrapped and _edge_wrapped(q):
            wrapped = True
            traj.wrap_time = n * dt
        if n in sample_steps:
            record(n, qhat)
            last_valid = traj.states[-1]
        traj.steps = n
    return traj


def evolve_final(spec: FlowSpec, q0: Field, T: float, cfg: IntegratorConfig, check: bool = True) -> Field:
    return evolve(spec, q0, T, cfg, sample_times=[T], check=check).final.q


def background_history(
    background: PeriodizedBackground, T: float, cfg: IntegratorConfig, n_snapshots: int = 41
) -> PotentialHistory:
    """``V(t)`` solving KdV from ``V(0) = W``: tidal KdV from ``q = 0`` plus the surrogate."""
    spec = FlowSpec("tidal_kdv", background=background)
    grid = background.grid
    traj = evolve(spec, grid.zeros(), T, cfg, n_samples=n_snapshots)
    W = background.samples()
    return PotentialHistory(grid, traj.times, traj.array() + W[None, :])


def h_minus1_norm(f: Field) -> float:
    return sobolev_norm(f, -1)


def commuting_composition(
    q0: Field,
    kappa: float,
    varkappa: float,
    t: float,
    s: float,
    cfg: IntegratorConfig,
    background: Optional[PeriodizedBackground] = None,
) -> float:
    """``|| Phi_varkappa(s) Phi_kappa(t) q0 - Phi_kappa(t) Phi_varkappa(s) q0 ||_{H^-1}``."""
    kind = "hk" if background is None else "tidal_hk"
    A = FlowSpec(kind, kappa=kappa, background=background)
    B = FlowSpec(kind, kappa=varkappa, background=background)
    ab = evolve_final(B, evolve_final(A, q0, t, cfg), s, cfg)
    ba = evolve_final(A, evolve_final(B, q0, s, cfg), t, cfg)
    return h_minus1_norm(ab - ba)


def soliton(grid: Grid, kappa_s: float, x0: float, t: float = 0.0) -> Field:
    """One-soliton ``-2 k^2 sech^2(k (x - x0 - 4 k^2 t))`` of ``u_t = -u''' + 6 u u'``."""
    xi = kappa_s * (grid.x - x0 - 4.0 * kappa_s**2 * t)
    return Field(grid, -2.0 * kappa_s**2 / np.cosh(xi) ** 2)
