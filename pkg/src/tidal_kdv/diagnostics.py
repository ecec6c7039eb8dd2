"""Measured functionals and the headline experiments built on the flows."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .background import PeriodizedBackground
from .errors import ParameterError, TidalKdVError, ValidityError
from .flows import FlowSpec, FlowState, IntegratorConfig, Trajectory, evolve
from .spectral_grid import Field, diff, project_pi, sobolev_norm


def polynomial_energy(q: Field, s: int) -> float:
    """Polynomial conserved quantities of the KdV hierarchy.

    ``s = 0``: ``1/2 int q^2``; ``s = 1``: ``int (q'^2/2 + q^3)``;
    ``s = 2``: ``int (q''^2/2 + 5 q q'^2 + 5 q^4 / 2)``.  The integrand is summed
    with the trapezoid rule, which is spectrally exact for band-limited data.
    """
    v = q.values
    dx = q.grid.dx
    if s == 0:
        integrand = 0.5 * v**2
    elif s == 1:
        qp = diff(v, q.grid, 1)
        integrand = 0.5 * qp**2 + v**3
    elif s == 2:
        qp = diff(v, q.grid, 1)
        qpp = diff(v, q.grid, 2)
        integrand = 0.5 * qpp**2 + 5.0 * v * qp**2 + 2.5 * v**4
    else:
        raise ParameterError(f"polynomial energies are defined for s in {{0, 1, 2}}, got {s}")
    return float(np.sum(integrand) * dx)


def derivative_energy(q: Field, s: int) -> float:
    """``E_s = 1/2 || q^{(s)} ||_{L^2}^2``."""
    d = diff(q.values, q.grid, s) if s else q.values
    return 0.5 * float(np.sum(d**2) * q.grid.dx)


def norm_h_minus2(f: Field) -> float:
    """Sobolev norm with spectral weight ``(1 + xi^2)^{-2}``."""
    return sobolev_norm(f, -2)


@dataclass
class EnergyReport:
    time: float
    e0: float
    e1: float
    e2: float
    p_full: float
    es: Optional[List[float]] = None

    @classmethod
    def from_state(
        cls,
        state: FlowState,
        background: Optional[PeriodizedBackground] = None,
        higher: Sequence[int] = (),
    ) -> "EnergyReport":
        q = state.q
        u = q.values if background is None else q.values + background.samples()
        return cls(
            time=state.time,
            e0=polynomial_energy(q, 0),
            e1=polynomial_energy(q, 1),
            e2=polynomial_energy(q, 2),
            p_full=0.5 * float(np.sum(u**2) * q.grid.dx),
            es=[derivative_energy(q, s) for s in higher] or None,
        )


def relative_drift(values: Sequence[float]) -> float:
    """``max_t |E(t) - E(0)| / max(|E(0)|, 1e-300)``."""
    arr = np.asarray(values, dtype=float)
    return float(np.max(np.abs(arr - arr[0])) / max(abs(arr[0]), 1e-300))


def _box_momentum_slope(states, background, box_fraction):
    grid = background.grid
    box = np.abs(grid.x) <= box_fraction * background.return_center
    W = background.samples()
    u0 = states[0].q.values + W
    base = 0.5 * np.sum(u0[box] ** 2)
    t = np.array([s.time for s in states])
    p = np.array([(0.5 * np.sum((s.q.values + W)[box] ** 2) - base) * grid.dx for s in states])
    slope, _ = np.polyfit(t, p, 1)
    return float(slope)


def momentum_drift_rate(
    trajectory: Trajectory,
    background: PeriodizedBackground,
    window: Optional[Tuple[float, float]] = None,
    box_fraction: float = 0.5,
    inner_fraction: float = 0.75,
    consistency_tol: float = 0.01,
    strict_wrap: bool = False,
) -> float:
    """Least-squares slope of ``t -> int 1/2 [u(t)^2 - u(0)^2]`` over ``|x| <= box_fraction x_R``.

    ``u = q + W_per``.  The measurement is rejected with :class:`ValidityError`
    when the slope over the box and over the box shrunk by ``inner_fraction``
    disagree by more than ``consistency_tol`` (relative to the larger of the
    rate and ``E_0(q)/duration``): signal entering the trusted window from the
    periodisation moves the two integrals differently.  With ``strict_wrap``
    the trajectory's edge-cell ``wrap_time`` inside the window is also fatal.
    """
    times = trajectory.times
    if window is None:
        window = (float(times[0]), float(times[-1]))
    t0, t1 = window
    if not t1 > t0:
        raise ParameterError(f"empty window {window}")
    if strict_wrap and trajectory.wrap_time is not None and trajectory.wrap_time <= t1:
        raise ValidityError(
            f"boundary radiation reached the domain edge at t={trajectory.wrap_time:g} <= {t1:g}"
        )
    sel = [s for s in trajectory.states if t0 - 1e-12 <= s.time <= t1 + 1e-12]
    if len(sel) < 2:
        raise ParameterError("need at least two samples in the window")
    outer = _box_momentum_slope(sel, background, box_fraction)
    inner = _box_momentum_slope(sel, background, inner_fraction * box_fraction)
    scale = max(abs(outer), polynomial_energy(sel[0].q, 0) / (t1 - t0))
    if abs(outer - inner) > consistency_tol * scale:
        raise ValidityError(
            f"momentum slopes over nested boxes disagree ({outer:.6g} vs {inner:.6g}): "
            "the trusted window is contaminated"
        )
    return outer


def equicontinuity_tail(q: Field, N: float, s: int) -> float:
    """``|| Pi_{>=N} q ||_{H^s}``."""
    return sobolev_norm(project_pi(q, N, s, "high"), s)


@dataclass
class TailReport:
    n_list: List[float]
    times: List[float]
    tail_norms: np.ndarray  # shape (len(n_list), len(times))

    def growth(self) -> np.ndarray:
        """Per-N ratio ``max_t tail / tail(t=0)``."""
        return np.max(self.tail_norms, axis=1) / self.tail_norms[:, 0]


def equicontinuity_study(
    q0: Field,
    background: Optional[PeriodizedBackground],
    n_list: Sequence[float],
    T: float,
    cfg: IntegratorConfig,
    s: int = 3,
    kappa_factor: float = 1.0,
    n_samples: int = 21,
) -> TailReport:
    """Tail norms along the ``kappa = kappa_factor * N`` lattice (``kappa >= N``)."""
    if kappa_factor < 1:
        raise ParameterError("the lattice requires kappa >= N")
    kind = "hk" if background is None else "tidal_hk"
    rows = []
    times = None
    for N in n_list:
        spec = FlowSpec(kind, kappa=kappa_factor * float(N), background=background)
        traj = evolve(spec, q0, T, cfg, n_samples=n_samples)
        times = traj.times.tolist()
        rows.append([equicontinuity_tail(st.q, N, s) for st in traj.states])
    return TailReport(list(n_list), times or [], np.array(rows))


@dataclass
class ConvergenceReport:
    """Pairwise sup-in-time distances of the ``q_kappa`` family and the rate to the KdV limit."""

    kappa_list: List[float]
    pairwise_h_minus2: np.ndarray
    strong_hs: np.ndarray
    fitted_rate: float
    reference_sup: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reference_final: np.ndarray = field(default_factory=lambda: np.zeros(0))
    final_rate: float = float("nan")
    times: List[float] = field(default_factory=list)
    failures: Dict[float, str] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.failures

    def rows(self):
        """Long-form ``(kappa_a, kappa_b, sup_h_minus2, sup_hs)`` for ``a < b``."""
        n = len(self.kappa_list)
        for i in range(n):
            for j in range(i + 1, n):
                yield (self.kappa_list[i], self.kappa_list[j], self.pairwise_h_minus2[i, j], self.strong_hs[i, j])


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def kappa_convergence_study(
    q0: Field,
    background: PeriodizedBackground,
    kappa_list: Sequence[float],
    T: float,
    cfg: IntegratorConfig,
    s: int = 3,
    n_samples: int = 21,
    max_workers: int = 1,
) -> ConvergenceReport:
    """Evolve under ``tidal_hk`` for every kappa plus ``tidal_kdv`` as the reference.

    ``fitted_rate`` is the log-log slope of ``sup_t ||q_kappa - q_ref||_{H^-2}``;
    ``final_rate`` the same for the distance at ``t = T``.  A diverging member
    is recorded in ``failures`` and left out of the matrices (NaN rows).
    Member runs are independent and fan out over ``max_workers`` threads.
    """
    if n_samples < 20:
        raise ParameterError("sup over time needs at least 20 samples")
    kappas = sorted(float(k) for k in kappa_list)
    ref = evolve(FlowSpec("tidal_kdv", background=background), q0, T, cfg, n_samples=n_samples)
    runs: Dict[float, Trajectory] = {}
    failures: Dict[float, str] = {}

    def member(kappa):
        spec = FlowSpec("tidal_hk", kappa=kappa, background=background)
        try:
            return kappa, evolve(spec, q0, T, cfg, n_samples=n_samples), None
        except TidalKdVError as exc:
            return kappa, None, f"{type(exc).__name__}: {exc}"

    if max_workers > 1 and len(kappas) > 1:
        with ThreadPoolExecutor(max_workers=min(max_workers, len(kappas))) as pool:
            results = list(pool.map(member, kappas))
    else:
        results = [member(k) for k in kappas]
    for kappa, traj, err in results:
        if err is None:
            runs[kappa] = traj
        else:
            failures[kappa] = err

    n = len(kappas)
    h2 = np.full((n, n), np.nan)
    hs = np.full((n, n), np.nan)
    for i, a in enumerate(kappas):
        for j, b in enumerate(kappas):
            if a in runs and b in runs:
                if i == j:
                    h2[i, j] = hs[i, j] = 0.0
                    continue
                diffs = [sa.q - sb.q for sa, sb in zip(runs[a].states, runs[b].states)]
                h2[i, j] = max(norm_h_minus2(d) for d in diffs)
                hs[i, j] = max(sobolev_norm(d, s) for d in diffs)
    ref_sup = np.full(n, np.nan)
    ref_final = np.full(n, np.nan)
    for i, a in enumerate(kappas):
        if a in runs:
            d = [norm_h_minus2(sa.q - sr.q) for sa, sr in zip(runs[a].states, ref.states)]
            ref_sup[i] = max(d)
            ref_final[i] = d[-1]
    ok = np.isfinite(ref_sup)
    k_ok = np.array(kappas)[ok]
    return ConvergenceReport(
        kappa_list=kappas,
        pairwise_h_minus2=h2,
        strong_hs=hs,
        fitted_rate=loglog_slope(k_ok, ref_sup[ok]),
        reference_sup=ref_sup,
        reference_final=ref_final,
        final_rate=loglog_slope(k_ok, ref_final[ok]),
        times=ref.times.tolist(),
        failures=failures,
    )
