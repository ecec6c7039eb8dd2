"""Experiment configuration, orchestration and persistence.

A run is described by an INI file (``key = value`` sections) and produces CSV
tables, optional binary snapshots and a JSON manifest written last.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import math
import os
import struct
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .background import PeriodizedBackground, StepProfile, default_return_center, periodize
from .diagnostics import (
    ConvergenceReport,
    EnergyReport,
    TailReport,
    equicontinuity_study,
    kappa_convergence_study,
    momentum_drift_rate,
    relative_drift,
)
from .errors import ConfigurationError, DivergenceError
from .flows import (
    BLOWUP_THRESHOLD,
    KINDS,
    FlowSpec,
    FlowState,
    IntegratorConfig,
    Trajectory,
    background_history,
    commuting_composition,
    evolve,
    soliton,
)
from .schrodinger import (
    SchrodingerProblem,
    compute_hkappa_functional,
    diagonal_green,
    greens_ode_residual,
    hilbert_schmidt_check,
    verify_linear_identity,
    verify_quadratic_identity,
)
from .spectral_grid import Field, Grid, l2_norm

log = logging.getLogger(__name__)

EXPERIMENTS = ("simulate", "identities", "greens", "convergence", "equicontinuity", "commute", "momentum")
FAMILIES = ("gaussian", "soliton", "zero")
ENERGY_HEADER = ("t", "e0", "e1", "e2", "p_full")
CONVERGENCE_HEADER = ("kappa_a", "kappa_b", "sup_h_minus2", "sup_hs")
THREADS_ENV = "TIDAL_KDV_THREADS"


# --------------------------------------------------------------------------
# configuration


def _parse_real(text: str) -> float:
    """Float, optionally written as a multiple of ``pi`` (``20*pi``, ``pi``)."""
    t = text.strip().lower().replace(" ", "")
    try:
        if t.endswith("pi"):
            head = t[:-2].rstrip("*")
            return (float(head) if head else 1.0) * math.pi
        return float(t)
    except ValueError:
        raise ConfigurationError(f"cannot parse {text!r} as a real number") from None


def _parse_list(text: str) -> List[float]:
    return [_parse_real(p) for p in text.replace(";", ",").split(",") if p.strip()]


@dataclass
class ExperimentConfig:
    """Validated experiment description; see :meth:`from_file` for the INI layout."""

    experiment: str
    N: int = 1024
    L: float = 20.0
    c1: float = 0.0
    c2: float = 0.0
    x_R: Optional[float] = None
    kind: str = "kdv"
    kappa: Optional[float] = None
    varkappa: Optional[float] = None
    kappa_list: List[float] = field(default_factory=list)
    n_list: List[float] = field(default_factory=list)
    T: float = 1.0
    s_time: Optional[float] = None
    dt: float = 1e-3
    dt_list: List[float] = field(default_factory=list)
    scheme: str = "if_rk4"
    dealias: bool = False
    samples: int = 21
    snapshots: int = 0
    sobolev_s: int = 3
    family: str = "gaussian"
    ic: Dict[str, float] = field(default_factory=dict)
    output: str = "out"
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigurationError(msg)

        need(self.experiment in EXPERIMENTS, f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        need(self.N >= 16 and (self.N & (self.N - 1)) == 0, f"N must be a power of two >= 16, got {self.N}")
        need(self.L > 0, f"L must be positive, got {self.L}")
        need(self.dt > 0, f"dt must be positive, got {self.dt}")
        need(all(d > 0 for d in self.dt_list), "dt_list entries must be positive")
        need(self.scheme in ("if_rk4", "etdrk4"), f"unknown scheme {self.scheme!r}")
        need(self.kind in KINDS, f"unknown flow kind {self.kind!r}")
        need(self.family in FAMILIES, f"unknown initial-condition family {self.family!r}")
        need(math.isfinite(self.T), "T must be finite")
        need(self.samples >= 2, "samples must be >= 2")
        need(self.snapshots >= 0, "snapshots must be >= 0")
        if self.family == "soliton":
            need("kappa_s" in self.ic and "x0" in self.ic, "soliton needs kappa_s and x0")
        exp = self.experiment
        if exp == "simulate":
            need(self.kind != "kdv_with_potential" or self.c1 != 0 or self.c2 != 0,
                 "kdv_with_potential needs a background (c1/c2) to build V(t)")
            if self.kind in ("hk", "tidal_hk"):
                need(self.kappa is not None, f"kind={self.kind} needs kappa")
        if exp in ("identities", "greens"):
            need(self.kappa is not None or self.kappa_list, f"{exp} needs kappa or kappa_list")
        if exp == "convergence":
            need(len(self.kappa_list) >= 1, "convergence needs kappa_list")
            need(self.samples >= 20, "convergence needs samples >= 20")
        if exp == "equicontinuity":
            need(len(self.n_list) >= 1, "equicontinuity needs n_list")
        if exp == "commute":
            need(self.kappa is not None and self.varkappa is not None, "commute needs kappa and varkappa")
        if self.uses_background:
            need(self.c1 != 0 or self.c2 != 0 or exp == "momentum", f"{exp} needs a background step")
            x_R = self.x_R if self.x_R is not None else self.L - 20.0
            need(x_R >= 20.0 and self.L >= x_R + 20.0, f"need x_R >= 20 and L >= x_R + 20 (L={self.L}, x_R={x_R})")

    @property
    def uses_background(self) -> bool:
        if self.experiment in ("convergence", "momentum"):
            return True
        if self.experiment == "equicontinuity":
            return self.c1 != 0 or self.c2 != 0
        if self.experiment == "simulate":
            return self.kind in ("tidal_kdv", "tidal_hk", "kdv_with_potential")
        if self.experiment == "greens":
            return self.c1 != 0 or self.c2 != 0
        return False

    # -- construction -----------------------------------------------------
    @classmethod
    def from_string(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config: {exc}") from None
        return cls.from_parser(cp)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        return cls.from_string(text)

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "ExperimentConfig":
        known = {
            "experiment": {"name", "output", "seed"},
            "grid": {"n", "l"},
            "profile": {"c1", "c2", "x_r"},
            "flow": {"kind", "kappa", "varkappa", "kappa_list", "n_list", "t", "s", "dt", "dt_list",
                     "scheme", "dealias", "samples", "snapshots", "sobolev_s"},
            "initial": {"family", "a", "sigma", "center", "kappa_s", "x0"},
        }
        for sec in cp.sections():
            if sec not in known:
                raise ConfigurationError(f"unknown section [{sec}]")
            extra = set(cp[sec]) - known[sec]
            if extra:
                raise ConfigurationError(f"unknown keys in [{sec}]: {sorted(extra)}")
        if not cp.has_option("experiment", "name"):
            raise ConfigurationError("missing [experiment] name")

        def get(sec, key, conv, default=None):
            if cp.has_option(sec, key):
                raw = cp.get(sec, key)
                try:
                    return conv(raw)
                except ConfigurationError:
                    raise
                except ValueError:
                    raise ConfigurationError(f"[{sec}] {key} = {raw!r} is invalid") from None
            return default

        def as_bool(raw):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)

        ic = {}
        if cp.has_section("initial"):
            for key in ("a", "sigma", "center", "kappa_s", "x0"):
                if cp.has_option("initial", key):
                    ic[key] = _parse_real(cp.get("initial", key))
        return cls(
            experiment=cp.get("experiment", "name").strip(),
            output=get("experiment", "output", str.strip, "out"),
            seed=get("experiment", "seed", int, 0),
            N=get("grid", "n", int, 1024),
            L=get("grid", "l", _parse_real, 20.0),
            c1=get("profile", "c1", _parse_real, 0.0),
            c2=get("profile", "c2", _parse_real, 0.0),
            x_R=get("profile", "x_r", _parse_real, None),
            kind=get("flow", "kind", str.strip, "kdv"),
            kappa=get("flow", "kappa", _parse_real, None),
            varkappa=get("flow", "varkappa", _parse_real, None),
            kappa_list=get("flow", "kappa_list", _parse_list, []),
            n_list=get("flow", "n_list", _parse_list, []),
            T=get("flow", "t", _parse_real, 1.0),
            s_time=get("flow", "s", _parse_real, None),
            dt=get("flow", "dt", _parse_real, 1e-3),
            dt_list=get("flow", "dt_list", _parse_list, []),
            scheme=get("flow", "scheme", str.strip, "if_rk4"),
            dealias=get("flow", "dealias", as_bool, False),
            samples=get("flow", "samples", int, 21),
            snapshots=get("flow", "snapshots", int, 0),
            sobolev_s=get("flow", "sobolev_s", int, 3),
            family=get("initial", "family", str.strip, "gaussian"),
            ic=ic,
        )

    # -- derived objects --------------------------------------------------
    def grid(self) -> Grid:
        return Grid(self.N, self.L)

    def background(self, grid: Grid) -> Optional[PeriodizedBackground]:
        if not self.uses_background:
            return None
        x_R = self.x_R if self.x_R is not None else default_return_center(grid)
        return periodize(StepProfile(self.c1, self.c2), grid, x_R)

    def initial_condition(self, grid: Grid) -> Field:
        if self.family == "zero":
            return grid.zeros()
        if self.family == "soliton":
            return soliton(grid, self.ic["kappa_s"], self.ic["x0"])
        a = self.ic.get("a", 0.3)
        sigma = self.ic.get("sigma", 1.0)
        center = self.ic.get("center", 0.0)
        return Field(grid, a * np.exp(-(((grid.x - center) / sigma) ** 2)))

    def integrator(self, dt: Optional[float] = None) -> IntegratorConfig:
        return IntegratorConfig(self.dt if dt is None else dt, self.scheme, self.dealias)

    def kappas(self) -> List[float]:
        return list(self.kappa_list) if self.kappa_list else [self.kappa]

    def echo(self) -> Dict[str, Any]:
        return asdict(self)


# --------------------------------------------------------------------------
# persistence


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """RFC 4180 CSV (CRLF line ends) with floats in 17-significant-digit form."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def emit_csv(report, path) -> Path:
    """Write an energy series (list of :class:`EnergyReport`) or a :class:`ConvergenceReport`."""
    if isinstance(report, ConvergenceReport):
        return write_table(path, CONVERGENCE_HEADER, report.rows())
    if isinstance(report, EnergyReport):
        report = [report]
    rows = [(r.time, r.e0, r.e1, r.e2, r.p_full) for r in report]
    return write_table(path, ENERGY_HEADER, rows)


class SnapshotStore:
    """Snapshots as ``snap_#####.bin`` files plus an ``index.json`` sidecar.

    Each binary file is a little-endian ``uint64`` sample count followed by that
    many little-endian ``float64`` samples.  The sidecar records the grid and,
    per record, the file name, time and sample count.
    """

    INDEX = "index.json"

    def __init__(self, directory, grid: Grid):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.grid = grid
        self.records: List[Dict[str, Any]] = []

    def append(self, time: float, q: Field) -> Path:
        if q.grid.num_points != self.grid.num_points:
            raise ConfigurationError("snapshot length does not match the grid")
        name = f"snap_{len(self.records):05d}.bin"
        path = self.directory / name
        data = np.ascontiguousarray(q.values, dtype="<f8")
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", data.size))
            fh.write(data.tobytes())
        self.records.append({"file": name, "time": float(time), "n": int(data.size)})
        self._write_index()
        return path

    def _write_index(self) -> None:
        meta = {
            "format": "uint64 LE count + float64 LE samples",
            "grid": {"num_points": self.grid.num_points, "half_length": self.grid.half_length},
            "records": self.records,
        }
        (self.directory / self.INDEX).write_text(json.dumps(meta, indent=2))

    @property
    def files(self) -> List[Path]:
        return [self.directory / r["file"] for r in self.records] + [self.directory / self.INDEX]

    @staticmethod
    def read_file(path) -> np.ndarray:
        raw = Path(path).read_bytes()
        (n,) = struct.unpack_from("<Q", raw, 0)
        if len(raw) != 8 + 8 * n:
            raise ConfigurationError(f"{path}: length prefix {n} does not match file size")
        return np.frombuffer(raw, dtype="<f8", offset=8).astype(float)

    @classmethod
    def load(cls, directory):
        """Return ``(grid, [(time, Field), ...])`` after checking every index entry."""
        directory = Path(directory)
        meta = json.loads((directory / cls.INDEX).read_text())
        grid = Grid(meta["grid"]["num_points"], meta["grid"]["half_length"])
        out = []
        for rec in meta["records"]:
            path = directory / rec["file"]
            if not path.exists():
                raise ConfigurationError(f"index references missing file {rec['file']}")
            values = cls.read_file(path)
            if values.size != grid.num_points or rec["n"] != grid.num_points:
                raise ConfigurationError(f"{rec['file']} has {values.size} samples, grid has {grid.num_points}")
            out.append((rec["time"], Field(grid, values)))
        return grid, out


@dataclass
class Assertion:
    name: str
    value: float
    threshold: float
    passed: bool
    comparison: str = "<="


@dataclass
class RunManifest:
    config: Dict[str, Any]
    code_version: str = __version__
    started: str = ""
    finished: str = ""
    wrap_time: Optional[float] = None
    files: List[Dict[str, Any]] = field(default_factory=list)
    assertions: List[Assertion] = field(default_factory=list)
    status: str = "running"
    error: Optional[str] = None
    settings: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, value: float, threshold: float, comparison: str = "<=") -> Assertion:
        value = float(value)
        ok = {"<=": value <= threshold, ">=": value >= threshold}[comparison] and math.isfinite(value)
        a = Assertion(name, value, float(threshold), bool(ok), comparison)
        self.assertions.append(a)
        return a

    def add_file(self, path, root) -> None:
        path = Path(path)
        self.files.append(
            {"path": str(path.relative_to(root)), "sha256": sha256_of(path), "bytes": path.stat().st_size}
        )

    def to_json(self) -> str:
        d = asdict(self)
        d["passed"] = self.passed
        return json.dumps(d, indent=2, default=_json_default)

    def write(self, root) -> Path:
        path = Path(root) / "manifest.json"
        path.write_text(self.to_json())
        return path

    @staticmethod
    def verify(root) -> bool:
        """Recompute every listed checksum."""
        root = Path(root)
        data = json.loads((root / "manifest.json").read_text())
        return all(sha256_of(root / f["path"]) == f["sha256"] for f in data["files"])


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return max(1, default)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# --------------------------------------------------------------------------
# experiment runners


class _Run:
    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.manifest = RunManifest(config=cfg.echo())
        self.manifest.settings = {
            "blowup_threshold": BLOWUP_THRESHOLD,
            "sup_time_samples": cfg.samples,
            "workers": worker_count(),
        }
        self.grid = cfg.grid()
        self.background = cfg.background(self.grid)
        self.q0 = cfg.initial_condition(self.grid)
        self.emitted: List[Path] = []

    def table(self, name: str, header, rows) -> None:
        self.emitted.append(write_table(self.out / name, header, rows))

    def energy_csv(self, reports: List[EnergyReport], name: str = "energies.csv") -> None:
        self.emitted.append(emit_csv(reports, self.out / name))

    def trajectory(self, spec: FlowSpec, q0: Field, T: float, dt: Optional[float] = None) -> Trajectory:
        cfg = self.cfg
        store = SnapshotStore(self.out / "snapshots", self.grid) if cfg.snapshots > 0 else None
        snap_times = set(np.round(np.linspace(0.0, T, cfg.snapshots), 12)) if store else set()
        reports: List[EnergyReport] = []

        def on_state(state: FlowState) -> None:
            reports.append(EnergyReport.from_state(state, self.background))
            if store is not None and round(state.time, 12) in snap_times:
                store.append(state.time, state.q)

        times = sorted(set(np.linspace(0.0, T, cfg.samples)) | snap_times)
        try:
            traj = evolve(spec, q0, T, cfg.integrator(dt), callbacks=[on_state], sample_times=times)
        finally:
            self.energy_csv(reports)
            if store is not None:
                self.emitted.extend(store.files)
        self.manifest.wrap_time = traj.wrap_time
        return traj

    # -- individual experiments --------------------------------------------
    def simulate(self) -> None:
        cfg = self.cfg
        if cfg.kind == "kdv_with_potential":
            history = background_history(self.background, cfg.T, cfg.integrator(), n_snapshots=max(cfg.samples, 41))
            spec = FlowSpec("kdv_with_potential", external_potential=history)
        else:
            bg = self.background if cfg.kind in ("tidal_kdv", "tidal_hk") else None
            spec = FlowSpec(cfg.kind, kappa=cfg.kappa if cfg.kind in ("hk", "tidal_hk") else None, background=bg)
        traj = self.trajectory(spec, self.q0, cfg.T)
        final = traj.final
        self.manifest.results["final_time"] = final.time
        if cfg.family == "soliton" and cfg.kind == "kdv":
            exact = soliton(self.grid, cfg.ic["kappa_s"], cfg.ic["x0"], final.time)
            self.manifest.check("soliton_l2_error", l2_norm(final.q - exact), 1e-6)
        if cfg.kind in ("kdv", "hk") and abs(cfg.T) > 0:
            e0 = [s_.q for s_ in traj.states]
            drift = relative_drift([0.5 * float(np.sum(q.values**2) * q.grid.dx) for q in e0])
            self.manifest.check("e0_relative_drift_per_unit_time", drift / abs(cfg.T), 1e-6)

    def identities(self) -> None:
        cfg = self.cfg
        f = self.q0
        h = Field(self.grid, np.exp(-((self.grid.x - 0.5) ** 2) / 0.8))
        rows = []
        for kappa in cfg.kappas():
            lin = verify_linear_identity(f, kappa)
            quad = verify_quadratic_identity(f, h, kappa)
            lhs, rhs = hilbert_schmidt_check(f, kappa)
            hs = abs(lhs - rhs) / rhs if rhs else 0.0
            rows.append((kappa, lin, quad, hs))
            self.manifest.check(f"linear_identity[kappa={kappa:g}]", lin, 1e-8)
            self.manifest.check(f"quadratic_identity[kappa={kappa:g}]", quad, 1e-8)
            self.manifest.check(f"hilbert_schmidt[kappa={kappa:g}]", hs, 1e-6)
        self.table("identities.csv", ("kappa", "linear", "quadratic", "hilbert_schmidt"), rows)

    def greens(self) -> None:
        cfg = self.cfg
        V = self.q0 if self.background is None else self.q0 + self.background.field()
        rows = []
        for kappa in cfg.kappas():
            prob = SchrodingerProblem(V, kappa)
            dense = diagonal_green(prob, "dense_inverse").values.values
            for method in ("spectral", "jost"):
                gd = diagonal_green(prob, method)
                gap = float(np.max(np.abs(gd.values.values - dense)))
                res = greens_ode_residual(gd, V)
                rows.append((kappa, method, gap, res))
                self.manifest.check(f"{method}_vs_dense[kappa={kappa:g}]", gap, 1e-7)
                self.manifest.check(f"{method}_ode_residual[kappa={kappa:g}]", res, 1e-6)
        self.table("greens.csv", ("kappa", "method", "max_diff_vs_dense", "ode_residual"), rows)

    def convergence(self) -> None:
        cfg = self.cfg
        report = kappa_convergence_study(
            self.q0, self.background, cfg.kappa_list, cfg.T, cfg.integrator(),
            s=cfg.sobolev_s, n_samples=cfg.samples, max_workers=worker_count(),
        )
        self.emitted.append(emit_csv(report, self.out / "convergence.csv"))
        self.table(
            "convergence_reference.csv",
            ("kappa", "sup_h_minus2_to_kdv", "final_h_minus2_to_kdv"),
            zip(report.kappa_list, report.reference_sup, report.reference_final),
        )
        self.manifest.results.update(fitted_rate=report.fitted_rate, final_rate=report.final_rate,
                                     failures={str(k): v for k, v in report.failures.items()})
        if report.failures:
            raise DivergenceError(f"members diverged: {report.failures}")
        sup = report.reference_sup
        self.manifest.check("strictly_decreasing", float(np.all(np.diff(sup) < 0)), 1.0, ">=")
        if len(sup) > 1:
            self.manifest.check("fitted_rate", report.fitted_rate, -1.5)

    def equicontinuity(self) -> None:
        cfg = self.cfg
        report = equicontinuity_study(self.q0, self.background, cfg.n_list, cfg.T, cfg.integrator(),
                                      s=cfg.sobolev_s, n_samples=cfg.samples)
        rows = [(n, t, report.tail_norms[i, j]) for i, n in enumerate(report.n_list)
                for j, t in enumerate(report.times)]
        self.table("equicontinuity.csv", ("n", "t", "tail"), rows)
        for n, g in zip(report.n_list, report.growth()):
            self.manifest.check(f"tail_growth[N={n:g}]", g, 3.0)

    def commute(self) -> None:
        cfg = self.cfg
        s = cfg.s_time if cfg.s_time is not None else cfg.T
        dts = cfg.dt_list or [cfg.dt]
        rows = []
        for dt in dts:
            r = commuting_composition(self.q0, cfg.kappa, cfg.varkappa, cfg.T, s, cfg.integrator(dt), self.background)
            rows.append((dt, r))
        self.table("commute.csv", ("dt", "residual"), rows)
        self.manifest.check("commutator_h_minus1", min(r for _, r in rows), 1e-6)
        if len(rows) >= 2:
            ordered = sorted(rows, reverse=True)
            orders = [math.log(a[1] / b[1]) / math.log(a[0] / b[0]) for a, b in zip(ordered, ordered[1:])]
            self.manifest.results["observed_orders"] = orders
            self.manifest.check("min_observed_order", min(orders), 4.0, ">=")

    def momentum(self) -> None:
        cfg = self.cfg
        spec = FlowSpec("tidal_kdv", background=self.background)
        traj = self.trajectory(spec, self.q0, cfg.T)
        rate = momentum_drift_rate(traj, self.background)
        predicted = self.background.profile.momentum_flux()
        self.table("momentum.csv", ("drift_rate", "predicted"), [(rate, predicted)])
        rel = abs(rate - predicted) / abs(predicted) if predicted else abs(rate)
        self.manifest.check("drift_rate_relative_error" if predicted else "drift_rate", rel, 0.02 if predicted else 1e-6)


def run(cfg: ExperimentConfig, out: Optional[str] = None) -> RunManifest:
    """Execute ``cfg`` and write outputs plus ``manifest.json`` into the output directory.

    A :class:`DivergenceError` is recorded in the manifest (status ``diverged``)
    and re-raised after the partial outputs and the manifest are written.
    """
    root = Path(out if out is not None else cfg.output)
    root.mkdir(parents=True, exist_ok=True)
    r = _Run(cfg, root)
    r.manifest.started = datetime.now(timezone.utc).isoformat()
    failure = None
    try:
        getattr(r, cfg.experiment)()
        r.manifest.status = "passed" if r.manifest.passed else "failed"
    except DivergenceError as exc:
        r.manifest.status = "diverged"
        r.manifest.error = str(exc)
        failure = exc
    finally:
        r.manifest.finished = datetime.now(timezone.utc).isoformat()
        seen = set()
        for p in r.emitted:
            if p not in seen and Path(p).exists():
                seen.add(p)
                r.manifest.add_file(p, root)
        r.manifest.write(root)
    if failure is not None:
        raise failure
    return r.manifest
