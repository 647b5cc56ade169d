"""Strong-convergence and efficiency experiments on the spectral models.

Every ensemble member owns one fine Brownian path keyed by (seed, member).
All step sizes, and the fine numerical reference when one is used, are
driven by exact block sums of that same path.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import models
from .errors import ConfigError, InsufficientData, InvalidConfig
from .noise import coarsen_increments, ensemble_increments, rng_for
from .phi_functions import ContourConfig
from .schemes import (SchemeId, SchemeOptions, Stepper, integrate_ensemble, scheme_id,
                      select_esspifsrk22_form)

CSV_HEADER = ["scheme", "dt", "rms_error", "rel_error", "n_success", "n_blowup", "cpu_seconds"]
DEFAULT_ENSEMBLE = 16
BLOWUP_FRACTION = 0.5


# -- configuration --------------------------------------------------------------

@dataclass
class ModelConfig:
    equation: str = "kdv"
    coefficients: Optional[dict] = None
    n_x: int = 128
    length: Optional[float] = None
    x0: Optional[float] = None
    basis: dict = field(default_factory=lambda: {"kind": "none"})
    initial: dict = field(default_factory=lambda: {"name": "gaussian"})

    def coeffs(self) -> models.SpdeCoefficients:
        if self.coefficients:
            return models.SpdeCoefficients(**self.coefficients)
        table = {"kdv": models.SpdeCoefficients.kdv, "heat": models.SpdeCoefficients.heat,
                 "ks": models.SpdeCoefficients.ks}
        if self.equation not in table:
            raise ConfigError(f"unknown equation {self.equation!r}")
        return table[self.equation]()

    @property
    def beta(self) -> float:
        return float(self.initial.get("beta", 64.0))

    def grid(self) -> models.SpectralGrid1D:
        length, x0 = self.length, self.x0
        if length is None:
            if self.initial.get("name") == "soliton":
                x0_auto, length = models.soliton_domain(self.beta, self.initial.get("tail", 1e-13))
                x0 = x0_auto if x0 is None else x0
            else:
                length = 1.0
        if x0 is None:
            x0 = -0.5 * length if self.initial.get("name") == "soliton" else 0.0
        return models.SpectralGrid1D(int(self.n_x), float(length), float(x0))

    def basis_spec(self):
        params = {k: v for k, v in self.basis.items() if k != "kind"}
        return models.noise_basis(self.basis.get("kind", "none"), **params)

    def problem(self):
        return models.build_problem(self.grid(), self.coeffs(), self.basis_spec())

    def initial_state(self, grid):
        init = dict(self.initial)
        name = init.pop("name", "gaussian")
        init.pop("tail", None)
        try:
            return models.initial_condition(name, grid, **init)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class ExperimentConfig:
    model: ModelConfig
    schemes: list
    dt_base: float
    dt_levels: list
    t_max: float
    ensemble_size: int = DEFAULT_ENSEMBLE
    seed: int = 0
    reference: dict = field(default_factory=lambda: {"kind": "analytic"})
    error_metric: str = "final"
    spacetime_samples: int = 10
    blowup_threshold: float = 1.0
    options: dict = field(default_factory=dict)
    fit_window: str = "finest:4"
    name: str = ""

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)
        self.schemes = [scheme_id(s).value for s in self.schemes]
        if not self.schemes:
            raise ConfigError("no schemes configured")
        if not self.dt_base > 0 or not self.t_max > 0:
            raise ConfigError("dt_base and t_max must be positive")
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be at least 1")
        if self.error_metric not in ("final", "spacetime"):
            raise ConfigError(f"unknown error metric {self.error_metric!r}")
        kind = self.reference.get("kind")
        if kind not in ("analytic", "fine"):
            raise ConfigError(f"unknown reference kind {kind!r}")
        if kind == "fine":
            if int(self.reference.get("refinement_factor", 0)) < 2:
                raise ConfigError("fine reference needs refinement_factor >= 2")
            scheme_id(self.reference.get("scheme", "setdrk4"))
        if kind == "analytic" and self.model.initial.get("name") != "soliton":
            raise ConfigError("analytic reference needs the soliton initial condition")
        for i in self.levels:
            ratio = self.t_max / (self.dt_base / 2 ** i)
            if abs(ratio - round(ratio)) > 1e-9 * ratio:
                raise ConfigError(f"t_max is not a multiple of dt at level {i}")
        if self.error_metric == "spacetime":
            for dt in self.dts:
                r = (self.t_max / self.spacetime_samples) / dt
                if abs(r - round(r)) > 1e-9 * r:
                    raise ConfigError("spacetime samples must fall on every time grid")

    @property
    def levels(self) -> list:
        lv = self.dt_levels
        if isinstance(lv, dict):
            return list(range(int(lv["start"]), int(lv["stop"])))
        return [int(i) for i in lv]

    @property
    def dts(self) -> list:
        return [self.dt_base / 2 ** i for i in self.levels]

    @property
    def steps(self) -> list:
        return [int(round(self.t_max / dt)) for dt in self.dts]

    @property
    def fine_steps(self) -> int:
        n = max(self.steps)
        if self.reference.get("kind") == "fine":
            n *= int(self.reference["refinement_factor"])
        return n

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    def scheme_options(self) -> SchemeOptions:
        opts = dict(self.options)
        form = opts.get("esspifsrk22_form", "auto")
        if form == "auto":
            form = select_esspifsrk22_form()
        contour = opts.get("contour", {})
        return SchemeOptions(esspifsrk22_form=form,
                             a2_form=opts.get("a2_form", "corrected"),
                             csetdrk1_form=opts.get("csetdrk1_form", "factored"),
                             contour=ContourConfig(**contour))


@dataclass
class ConvergenceRecord:
    scheme: str
    dt: float
    rms_error: float
    rel_error: float
    n_success: int
    n_blowup: int
    cpu_seconds: float = math.nan
    precompute_seconds: float = math.nan

    @property
    def failed(self) -> bool:
        total = self.n_success + self.n_blowup
        return (total == 0 or self.n_blowup > BLOWUP_FRACTION * total
                or not np.isfinite(self.rel_error))


@dataclass
class SlopeFit:
    scheme: str
    slope: float
    intercept: float
    r_squared: float
    levels_used: list

    def to_dict(self):
        return asdict(self)


# -- experiment execution -------------------------------------------------------

class Experiment:
    """Holds the model, the shared fine increments and the reference states."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.grid = cfg.model.grid()
        self.problem = models.build_problem(self.grid, cfg.model.coeffs(), cfg.model.basis_spec())
        self.u0 = cfg.model.initial_state(self.grid)
        self.options = cfg.scheme_options()
        M = self.problem.channels
        self.n_fine = cfg.fine_steps
        self.dt_fine = cfg.t_max / self.n_fine
        self.members = list(range(cfg.ensemble_size))
        self.increments = ensemble_increments(cfg.seed, self.members, M, self.n_fine, self.dt_fine)
        self.sample_every = None
        if cfg.error_metric == "spacetime":
            self.sample_times = [cfg.t_max * (j + 1) / cfg.spacetime_samples
                                 for j in range(cfg.spacetime_samples)]
        else:
            self.sample_times = [cfg.t_max]
        self._reference = None

    # Brownian values at the sample times, shape (M, B, S)
    def brownian_at_samples(self):
        W = np.cumsum(self.increments, axis=-1)
        idx = [int(round(t / self.dt_fine)) - 1 for t in self.sample_times]
        return W[:, :, idx]

    def level_increments(self, dt):
        factor = int(round(dt / self.dt_fine))
        return coarsen_increments(self.increments, factor)

    def aux_normals(self, scheme, n_steps):
        if scheme_id(scheme) is not SchemeId.SETDM01:
            return None
        M, B = self.problem.channels, len(self.members)
        out = np.empty((M, B, n_steps))
        for b, m in enumerate(self.members):
            out[:, b, :] = rng_for(self.cfg.seed, m + (1 << 40)).standard_normal((M, n_steps))
        return out

    def run_level(self, scheme, dt, stepper=None):
        """States at the sample times for every member: (S, B, n_modes), plus blow-ups."""
        inc = self.level_increments(dt)
        n_steps = inc.shape[-1]
        every = int(round((self.cfg.t_max / len(self.sample_times)) / dt))
        res = integrate_ensemble(self.problem, scheme, self.u0[None], 0.0, inc, dt,
                                 options=self.options, snapshot_every=every,
                                 aux_normals=self.aux_normals(scheme, n_steps), stepper=stepper)
        states = np.stack(res.snapshots[1:], axis=0)
        return states, res.blowup_step, res.seconds

    def reference(self):
        if self._reference is not None:
            return self._reference
        cfg = self.cfg
        if cfg.reference["kind"] == "analytic":
            W = self.brownian_at_samples()
            beta = cfg.model.beta
            a = getattr(self.problem.meta["basis"], "a", 0.0)
            ref = np.empty((len(self.sample_times), len(self.members), self.grid.n_modes), complex)
            for s, t in enumerate(self.sample_times):
                for b in range(len(self.members)):
                    w = W[0, b, s] if W.shape[0] else 0.0
                    u = models.travelling_wave_solution(self.grid.x, t, beta, a, w,
                                                        length=self.grid.length)
                    ref[s, b] = self.grid.to_spectral(u)
            self._reference = (ref, np.ones(len(self.members), bool))
        else:
            states, blown, _ = self.run_level(cfg.reference.get("scheme", "setdrk4"), self.dt_fine)
            self._reference = (states, blown < 0)
        return self._reference

    def errors(self, states, blown):
        """Per-member absolute and relative (space-time) L2 errors."""
        ref, ref_ok = self.reference()
        ok = (blown < 0) & ref_ok
        diff = self.grid.l2_norm(states - ref) ** 2
        base = self.grid.l2_norm(ref) ** 2
        with np.errstate(invalid="ignore", over="ignore"):
            abs_err = np.sqrt(diff.sum(axis=0))
            rel_err = np.sqrt(diff.sum(axis=0) / base.sum(axis=0))
        ok &= np.isfinite(rel_err) & (rel_err <= self.cfg.blowup_threshold)
        return abs_err, rel_err, ok

    def record(self, scheme, dt, timed=False, repeats=1):
        stepper = Stepper(self.problem, scheme, dt, options=self.options)
        seconds = []
        for _ in range(repeats):
            states, blown, sec = self.run_level(scheme, dt, stepper=stepper)
            seconds.append(sec)
        abs_err, rel_err, ok = self.errors(states, blown)
        n_ok = int(ok.sum())
        if n_ok:
            rms = float(np.sqrt(np.mean(abs_err[ok] ** 2)))
            rel = float(np.sqrt(np.mean(rel_err[ok] ** 2)))
        else:
            rms = rel = math.nan
        return ConvergenceRecord(
            scheme=scheme_id(scheme).value, dt=float(dt), rms_error=rms, rel_error=rel,
            n_success=n_ok, n_blowup=len(self.members) - n_ok,
            cpu_seconds=float(np.mean(seconds)) if timed else math.nan,
            precompute_seconds=stepper.precompute_seconds if timed else math.nan,
        )


def _workers():
    try:
        return max(1, int(os.environ.get("STOCHETD_THREADS", "1")))
    except ValueError:
        return 1


def _run_cells(exp: Experiment, timed=False, repeats=1):
    cells = [(s, dt) for s in exp.cfg.schemes for dt in exp.cfg.dts]
    exp.reference()
    n = _workers()
    if n == 1 or timed:
        recs = [exp.record(s, dt, timed, repeats) for s, dt in cells]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            recs = list(pool.map(lambda c: exp.record(c[0], c[1], timed, repeats), cells))
    return sorted(recs, key=lambda r: (r.scheme, r.dt))


def run_strong_convergence(cfg: ExperimentConfig, experiment: Experiment = None):
    """Coupled-path mean-square errors for every (scheme, dt) cell."""
    exp = experiment or Experiment(cfg)
    return _run_cells(exp)


def run_efficiency(cfg: ExperimentConfig, repeats: int = 5, experiment: Experiment = None):
    """As run_strong_convergence, timing each sweep ``repeats`` times.

    ``cpu_seconds`` is the mean wall time of the time stepping alone; building
    propagators and coefficient sets is reported as ``precompute_seconds``.
    """
    if repeats < 1:
        raise ConfigError("repeats must be at least 1")
    exp = experiment or Experiment(cfg)
    return _run_cells(exp, timed=True, repeats=repeats)


# -- fitting ------------------------------------------------------------------

def _select(recs, window):
    if window in (None, "all"):
        return recs
    if isinstance(window, str):
        where, _, k = window.partition(":")
        k = int(k) if k else 4
        if where == "finest":
            return sorted(recs, key=lambda r: r.dt)[:k]
        if where == "coarsest":
            return sorted(recs, key=lambda r: -r.dt)[:k]
        raise InvalidConfig(f"unknown window {window!r}")
    wanted = [float(w) for w in window]
    return [r for r in recs if any(abs(r.dt - w) <= 1e-12 * w for w in wanted)]


def fit_order(records, scheme, level_window="finest:4") -> SlopeFit:
    """Least-squares slope of log2(rel_error) against log2(dt)."""
    sid = scheme_id(scheme).value
    recs = [r for r in records if r.scheme == sid and not r.failed and r.rel_error > 0]
    recs = _select(recs, level_window)
    if len(recs) < 3:
        raise InsufficientData(f"{sid}: {len(recs)} usable levels in window {level_window!r}")
    x = np.log2([r.dt for r in recs])
    y = np.log2([r.rel_error for r in recs])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return SlopeFit(sid, float(slope), float(intercept), r2, sorted(r.dt for r in recs))


# -- reporting ------------------------------------------------------------------

def design_flags(cfg: ExperimentConfig = None) -> dict:
    opts = cfg.scheme_options() if cfg else SchemeOptions()
    return {
        "esspifsrk22_form": opts.esspifsrk22_form,
        "setdrk2_a2_form": opts.a2_form,
        "ssp33_final_weights": "1/3, 2/3",
        "srk4_final_weights": "1/6, 1/3, 1/3, 1/6",
        "setdrk4_final_stage": "forced nonlinearity",
        "csetdrk1_form": opts.csetdrk1_form,
        "contour_points": opts.contour.n_points,
        "contour_radius": opts.contour.radius,
        "dealias": "2/3 rule on u^2 and xi_m u",
        "paths_shared_with_reference": True,
        "blowup_fraction_excluded": BLOWUP_FRACTION,
        "blowup_threshold": cfg.blowup_threshold if cfg else 1.0,
        "spectral_layout": "real FFT half spectrum",
    }


def _fmt(x):
    return "%.17g" % x


def emit_report(records, fits, path, cfg: ExperimentConfig = None, extra: dict = None):
    """Write ``<path>.csv`` and ``<path>.json`` (or convergence.* inside a directory)."""
    if not records:
        raise InvalidConfig("no records to report")
    p = Path(path)
    if p.is_dir() or str(path).endswith(os.sep):
        p.mkdir(parents=True, exist_ok=True)
        stem = p / "convergence"
    else:
        p.parent.mkdir(parents=True, exist_ok=True)
        stem = p.with_suffix("")
    csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([r.scheme, _fmt(r.dt), _fmt(r.rms_error), _fmt(r.rel_error),
                        r.n_success, r.n_blowup, _fmt(r.cpu_seconds)])
    side = {
        "fits": [f.to_dict() for f in fits],
        "config": cfg.to_dict() if cfg else None,
        "seed": cfg.seed if cfg else None,
        "flags": design_flags(cfg),
        "precompute_seconds": {f"{r.scheme}@{_fmt(r.dt)}": r.precompute_seconds
                               for r in records if np.isfinite(r.precompute_seconds)},
    }
    if extra:
        side.update(extra)
    with open(json_path, "w") as fh:
        json.dump(side, fh, indent=2, default=str)
    return csv_path, json_path


def read_report_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ConvergenceRecord(row["scheme"], float(row["dt"]), float(row["rms_error"]),
                                         float(row["rel_error"]), int(row["n_success"]),
                                         int(row["n_blowup"]), float(row["cpu_seconds"])))
    return out


def fit_all(records, window="finest:4"):
    fits = []
    for s in sorted({r.scheme for r in records}):
        try:
            fits.append(fit_order(records, s, window))
        except InsufficientData:
            pass
    return fits
