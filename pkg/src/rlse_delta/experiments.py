"""Experiment drivers: convergence sweeps in h, tau and eps, conservation
runs and orbital-stability runs, all written as CSV.

Every driver takes an :class:`ExperimentConfig`. Independent runs inside a
sweep may go to a process pool (``workers > 1``); results are always
assembled in sweep order, so output is identical for any worker count.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .diagnostics import ErrorTriple, error_norms, fmt, observed_orders, write_csv
from .grid import GridSpec, MeshFunction, linf_norm, restrict_to
from .nonlin import ModelParams
from .solutions import GaussonParams, orbital_errors, perturbed_initial, sample_gausson
from .solver import Mode, SolverConfig, StepFailure, run

log = logging.getLogger(__name__)

CONVERGENCE_HEADER = ("param", "eps", "err_l2", "err_h1", "err_linf",
                      "order_l2", "order_h1", "order_linf")
STABILITY_HEADER = ("t", "e_plain", "e_min", "linf", "mass_drift_rel", "energy_drift_rel")


class Experiment(str, enum.Enum):
    SOLVE = "solve"
    CONVERGE_SPACE = "converge-space"
    CONVERGE_TIME = "converge-time"
    CONVERGE_EPS = "converge-eps"
    CONSERVE = "conserve"
    STABILITY = "stability"


class ExperimentError(RuntimeError):
    """A run inside an experiment failed; ``partial`` holds what was computed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class ExperimentConfig:
    experiment: Experiment = Experiment.SOLVE
    # model and standing wave; lam also fixes the profile shift of the Gausson
    lam: float = 1.0
    mu: float = -1.0
    eps: float = 0.0125
    omega: float = 1.0
    # grid and time stepping
    a: float = 12.0
    M: int = 1200
    tau: float = 0.01
    T: float = 1.0
    mode: Mode = Mode.DELTA_WEIGHT
    fp_tol: float = 1e-12
    fp_max_iters: int = 100
    record_every: int = 1
    # sweeps
    sweep: list = field(default_factory=list)
    eps_values: list = field(default_factory=list)
    reference: str = "fine"
    h_ref: float = 1 / 256
    tau_ref: float = 0.1 / 256
    # stability
    eta: float = 0.0
    out: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.experiment = Experiment(self.experiment)
        self.mode = Mode(self.mode)
        if self.reference not in ("fine", "analytic"):
            raise ValueError(f"reference must be 'fine' or 'analytic', got {self.reference!r}")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.a, self.M)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.lam, self.mu, self.eps)

    @property
    def gausson(self) -> GaussonParams:
        return GaussonParams(self.omega, self.lam)

    def solver(self, **overrides) -> SolverConfig:
        kw = dict(tau=self.tau, T=self.T, mode=self.mode, fp_tol=self.fp_tol,
                  fp_max_iters=self.fp_max_iters, record_every=self.record_every)
        kw.update(overrides)
        return SolverConfig(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.value
        d["mode"] = self.mode.value
        return d


# Paper setups scaled to desk size; anything can be overridden.
DEFAULTS = {
    Experiment.SOLVE: {},
    Experiment.CONSERVE: dict(T=10.0),
    Experiment.CONVERGE_SPACE: dict(
        eps=0.0025, sweep=[0.5, 0.25, 0.125, 0.0625], tau=0.1 / 256,
        record_every=10**9),
    Experiment.CONVERGE_TIME: dict(
        eps=0.0125 / 2**7, sweep=[0.05, 0.025, 0.0125, 0.00625], M=12 * 256,
        record_every=10**9),
    Experiment.CONVERGE_EPS: dict(
        sweep=[0.0125, 0.0125 / 2, 0.0125 / 4, 0.0125 / 8], reference="analytic",
        M=12 * 128, tau=0.1 / 128, record_every=10**9),
    Experiment.STABILITY: dict(
        lam=-1.0, eps=0.0125 / 2**7, a=40.0, M=1000, tau=0.01, T=30.0, eta=1e-3,
        record_every=10),
}


def make_config(experiment, **values) -> ExperimentConfig:
    """Defaults for ``experiment`` updated with ``values``."""
    experiment = Experiment(experiment)
    kw = dict(DEFAULTS[experiment])
    kw.update({k: v for k, v in values.items() if v is not None})
    return ExperimentConfig(experiment=experiment, **kw)


# -- config files -----------------------------------------------------------

_ALIASES = {"lambda": "lam", "fp-tol": "fp_tol", "fp-max-iters": "fp_max_iters",
            "record-every": "record_every", "h-ref": "h_ref", "tau-ref": "tau_ref",
            "eps-values": "eps_values"}
_LIST_KEYS = {"sweep", "eps_values"}


def _coerce(key: str, raw: str):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if key in _LIST_KEYS:
        return [float(v) for v in raw.replace(",", " ").split()]
    if key == "h":
        return float(raw)
    kind = types.get(key)
    if kind is None:
        raise KeyError(f"unknown config key {key!r}")
    if kind in ("float",):
        return float(raw)
    if kind in ("int",):
        return int(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment; list values are
    comma or space separated."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key.replace("-", "_"))
        values[key] = _coerce(key, raw)
    return values


def resolve_values(values: dict) -> dict:
    """Turn a grid spacing ``h`` into ``M``."""
    values = dict(values)
    h = values.pop("h", None)
    if h is not None and values.get("M") is None:
        values["M"] = GridSpec.from_h(values.get("a") or 12.0, h).M
    return values


# -- single runs -------------------------------------------------------------

def _initial(grid: GridSpec, cfg: ExperimentConfig) -> MeshFunction:
    gp = cfg.gausson
    if cfg.eta:
        return grid.sample(lambda x: perturbed_initial(x, gp, cfg.eta))
    return sample_gausson(grid, gp)


def _final_state(job):
    """Run one case to T and return the final node values (pool worker)."""
    cfg, M, tau, eps = job
    grid = GridSpec(cfg.a, M)
    params = ModelParams(cfg.lam, cfg.mu, eps)
    solver = cfg.solver(tau=tau, record_every=10**9)
    U, _ = run(_initial(grid, cfg), params, solver)
    return U.values


def _run_all(jobs, workers: int):
    results, failure = [], None
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_final_state, job) for job in jobs]
            for i, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except StepFailure as exc:
                    failure = (i, exc)
                    break
    else:
        for i, job in enumerate(jobs):
            try:
                results.append(_final_state(job))
            except StepFailure as exc:
                failure = (i, exc)
                break
    return results, failure


# -- convergence tables -----------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    param: float
    eps: float
    errors: ErrorTriple
    orders: ErrorTriple | None


@dataclass
class ConvergenceTable:
    kind: str
    rows: list[ConvergenceRow] = field(default_factory=list)
    complete: bool = True
    failure: str | None = None

    def for_eps(self, eps: float) -> list[ConvergenceRow]:
        return [r for r in self.rows if r.eps == eps]

    def orders(self, norm: str, eps: float | None = None) -> list[float]:
        rows = self.rows if eps is None else self.for_eps(eps)
        return [getattr(r.orders, norm) for r in rows if r.orders is not None]

    def errors(self, norm: str, eps: float | None = None) -> list[float]:
        rows = self.rows if eps is None else self.for_eps(eps)
        return [getattr(r.errors, norm) for r in rows]

    def csv_rows(self):
        for r in self.rows:
            orders = [""] * 3 if r.orders is None else [fmt(o) for o in r.orders]
            yield [fmt(r.param), fmt(r.eps), *(fmt(e) for e in r.errors), *orders]

    def to_csv(self, path=None) -> str:
        text = write_csv(CONVERGENCE_HEADER, self.csv_rows())
        if path is not None:
            Path(path).write_text(text)
        return text


def _append_block(table: ConvergenceTable, params, eps, errs):
    pairs = list(zip(params, errs))
    for (p, e), o in zip(pairs, observed_orders(pairs)):
        table.rows.append(ConvergenceRow(p, eps, e, o))


def _eps_rows(cfg: ExperimentConfig) -> list[float]:
    return list(cfg.eps_values) or [cfg.eps]


def _check_halving(sweep):
    if len(sweep) == 0:
        raise ValueError("empty sweep")
    for a, b in zip(sweep, sweep[1:]):
        if not math.isclose(b, a / 2, rel_tol=1e-9):
            raise ValueError(f"sweep values must halve: {a} -> {b}")


def _fail(table: ConvergenceTable, what: str, exc: StepFailure):
    table.complete = False
    table.failure = f"{what}: {exc}"
    raise ExperimentError(table.failure, table) from exc


def converge_space(cfg: ExperimentConfig) -> ConvergenceTable:
    """Spatial errors at T over the h values in ``cfg.sweep``.

    Each run uses time step ``cfg.tau``. The reference is either a
    fine-grid run (``h_ref``, ``tau_ref``) restricted to each sweep grid or
    the analytic soliton.
    """
    sweep = list(cfg.sweep)
    _check_halving(sweep)
    grids = [GridSpec.from_h(cfg.a, h) for h in sweep]
    table = ConvergenceTable("space")
    for eps in _eps_rows(cfg):
        jobs = [(cfg, g.M, cfg.tau, eps) for g in grids]
        ref_grid = None
        if cfg.reference == "fine":
            ref_grid = GridSpec.from_h(cfg.a, cfg.h_ref)
            for g in grids:
                if ref_grid.M % g.M:
                    raise ValueError(f"reference grid h={cfg.h_ref} does not nest h={g.h}")
            jobs.append((cfg, ref_grid.M, cfg.tau_ref, eps))
        results, failure = _run_all(jobs, cfg.workers)
        if failure is not None:
            i, exc = failure
            what = "reference run" if i == len(grids) else f"h={sweep[i]}"
            _fail(table, f"eps={eps} {what}", exc)
        errs = []
        for g, values in zip(grids, results):
            U = MeshFunction(values, g)
            if ref_grid is None:
                ref = sample_gausson(g, cfg.gausson, cfg.T)
            else:
                ref = restrict_to(MeshFunction(results[-1], ref_grid), g)
            errs.append(error_norms(U, ref))
        _append_block(table, sweep, eps, errs)
    return table


def converge_time(cfg: ExperimentConfig) -> ConvergenceTable:
    """Temporal errors at T over the tau values in ``cfg.sweep`` on the
    fixed grid ``(a, M)``; one block of rows per eps in ``eps_values``."""
    sweep = list(cfg.sweep)
    _check_halving(sweep)
    grid = cfg.grid
    table = ConvergenceTable("time")
    for eps in _eps_rows(cfg):
        jobs = [(cfg, grid.M, tau, eps) for tau in sweep]
        if cfg.reference == "fine":
            jobs.append((cfg, grid.M, cfg.tau_ref, eps))
        results, failure = _run_all(jobs, cfg.workers)
        if failure is not None:
            i, exc = failure
            what = "reference run" if i == len(sweep) else f"tau={sweep[i]}"
            _fail(table, f"eps={eps} {what}", exc)
        if cfg.reference == "fine":
            ref = MeshFunction(results[-1], grid)
        else:
            ref = sample_gausson(grid, cfg.gausson, cfg.T)
        errs = [error_norms(MeshFunction(v, grid), ref) for v in results[: len(sweep)]]
        _append_block(table, sweep, eps, errs)
    return table


def converge_eps(cfg: ExperimentConfig) -> ConvergenceTable:
    """Distance at T between the regularized solution and the analytic
    soliton of the unregularized equation, over the eps values in
    ``cfg.sweep``, on the fixed discretization ``(a, M, tau)``."""
    sweep = list(cfg.sweep)
    _check_halving(sweep)
    grid = cfg.grid
    jobs = [(cfg, grid.M, cfg.tau, eps) for eps in sweep]
    table = ConvergenceTable("eps")
    results, failure = _run_all(jobs, cfg.workers)
    if failure is not None:
        i, exc = failure
        _fail(table, f"eps={sweep[i]}", exc)
    exact = sample_gausson(grid, cfg.gausson, cfg.T)
    errs = [error_norms(MeshFunction(v, grid), exact) for v in results]
    pairs = list(zip(sweep, errs))
    for (eps, e), o in zip(pairs, observed_orders(pairs)):
        table.rows.append(ConvergenceRow(eps, eps, e, o))
    return table


# -- time series --------------------------------------------------------------

def solve(cfg: ExperimentConfig):
    """Single run from the (possibly perturbed) Gausson; returns
    ``(U_final, DiagnosticsSeries)``."""
    return run(_initial(cfg.grid, cfg), cfg.params, cfg.solver())


def run_series(cfg: ExperimentConfig):
    """Single run returning ``(U_final, series, summary)``.

    A failing step does not raise: ``U_final`` is the last good state and
    ``summary["blow_up"]`` describes the failure.
    """
    try:
        U, series = solve(cfg)
        blow_up = None
    except StepFailure as exc:
        U, series = exc.state, exc.series
        blow_up = {"step": exc.step, "t": exc.t, "reason": str(exc)}
    summary = series.summary()
    summary["blow_up"] = blow_up
    return U, series, summary


def conserve_run(cfg: ExperimentConfig):
    """Diagnostics series and drift summary (max relative and absolute
    mass/energy drift) of one run."""
    _, series, summary = run_series(cfg)
    return series, summary


@dataclass
class StabilitySeries:
    t: list = field(default_factory=list)
    e_plain: list = field(default_factory=list)
    e_min: list = field(default_factory=list)
    linf: list = field(default_factory=list)
    blow_up_t: float | None = None
    blow_up_reason: str | None = None
    diagnostics: object = None

    def rows(self):
        md = self.diagnostics.mass_drift()
        ed = self.diagnostics.energy_drift()
        for i, t in enumerate(self.t):
            yield (t, self.e_plain[i], self.e_min[i], self.linf[i], md[i], ed[i])

    def to_csv(self, path=None) -> str:
        text = write_csv(STABILITY_HEADER, self.rows())
        if path is not None:
            Path(path).write_text(text)
        return text


def stability_run(cfg: ExperimentConfig) -> StabilitySeries:
    """Orbital errors of the perturbed Gausson along a run.

    A failing step (blow-up) ends the series and is recorded with its time.
    """
    out = StabilitySeries()
    gp = cfg.gausson

    def observe(t, U):
        e_plain, e_min = orbital_errors(U, gp, t)
        out.t.append(t)
        out.e_plain.append(e_plain)
        out.e_min.append(e_min)
        out.linf.append(linf_norm(U))

    try:
        _, out.diagnostics = run(_initial(cfg.grid, cfg), cfg.params, cfg.solver(),
                                 callback=observe)
    except StepFailure as exc:
        out.diagnostics = exc.series
        out.blow_up_t = exc.t
        out.blow_up_reason = str(exc)
        log.warning("stability run stopped: %s", exc)
    return out


def write_metadata(path, cfg: ExperimentConfig, **extra):
    meta = {"config": cfg.to_dict(), **extra}
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class TrendFit:
    slope: float
    stderr: float
    lag1: float


def trend_fit(t, y) -> TrendFit:
    """Least-squares slope of ``y(t)`` with an autocorrelation-aware standard error.

    Densely sampled orbital errors oscillate, so neighbouring residuals are far
    from independent. The standard error uses the AR(1) effective sample size
    ``n (1 - r1) / (1 + r1)``, r1 being the lag-1 residual autocorrelation.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(t)
    if n < 4:
        raise ValueError("need at least 4 samples for a trend fit")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    r1 = 0.0
    if np.any(resid):
        r1 = float(np.corrcoef(resid[:-1], resid[1:])[0, 1])
    r1 = max(r1, 0.0)
    n_eff = max(n * (1 - r1) / (1 + r1), 3.0)
    stderr = math.sqrt(np.sum(resid**2) / (n_eff - 2)) / math.sqrt(np.sum((t - t.mean()) ** 2))
    return TrendFit(float(slope), stderr, r1)
