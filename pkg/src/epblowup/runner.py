"""Scenario execution: criteria, simulation, detection, monitors, artifacts."""

from __future__ import annotations

import csv
import dataclasses
import io
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .characteristics import (
    BOUND_RTOL,
    CharState,
    System,
    TrajectoryRecord,
    Termination,
    estimate_blowup_time,
    integrate_characteristic,
    integrate_riccati,
    monitor_inequalities,
)
from .config import ExperimentConfig
from .criteria import (
    CriterionReport,
    PointData,
    check,
    extract_point_data,
    point_data_tolerance,
    seed_of_min_divergence,
)
from .errors import EPBlowupError, FitRejectedError, InsufficientDataError, ScenarioError
from .report import RunSummary, SeedResult, emit_report
from .solver import FlowState, SimulationResult, cross_validate, polytropic_estimate_monitor, run_simulation

# The polytropic bound is the exact singular time of the Riccati reduction,
# so the check allows the detection accuracy instead of round-off.
BOUND_RTOL_BY_CRITERION = {"s1": BOUND_RTOL, "s2": BOUND_RTOL, "s3": 0.05}
ORACLE_MAX_STEP = 1e-3
XVAL_TAIL_FRACTION = 0.05
PDE_MONITOR_NOISE = 1e-6


def _write_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class _Artifacts:
    """Collects files in memory, then writes them under one directory."""

    def __init__(self):
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def names(self) -> list[str]:
        return sorted(self.files)

    def write(self, root: Path):
        root.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            path = root / name
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="\n") as fh:
                fh.write(text)


def _staged(stage: str, fn, *args, seed: float | None = None, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ScenarioError:
        raise
    except EPBlowupError as exc:
        raise ScenarioError(stage, exc, seed) from exc


def _detect(series: np.ndarray, mode: str) -> tuple[float | None, str | None]:
    try:
        est = estimate_blowup_time(series, mode)
    except (FitRejectedError, InsufficientDataError):
        return None, None
    return est.t_detect, est.method


# ------------------------------------------------------------ characteristic


def _char_system(cfg: ExperimentConfig) -> System:
    return System.background if cfg.params.rho_bar > 0 else System.pressureless


def _run_characteristic(cfg: ExperimentConfig, files: _Artifacts, simulate: bool) -> list[SeedResult]:
    spec = cfg.characteristic
    point = PointData(rho0=spec.rho0, div_v0=spec.d0, lambda_min=spec.d0)
    report = _staged("criterion", check, cfg.criterion, point, cfg.params)
    rtol = BOUND_RTOL_BY_CRITERION[cfg.criterion]
    result = SeedResult(seed=0.0, criterion=report, t_star=report.t_star, bound_rtol=rtol)
    if not simulate:
        return [result]

    record, est = _staged(
        "characteristic",
        integrate_characteristic,
        _char_system(cfg),
        CharState(spec.rho0, spec.d0),
        cfg.params,
        cfg.integrator,
        spec.t_end,
        0.0,
        report.t_star,
    )
    files.add("trajectory.csv", record.to_csv())
    violations = None
    if report.member and cfg.criterion in ("s1", "s2") and len(record) >= 3:
        violations = len(_staged("monitor", monitor_inequalities, record, cfg.params, cfg.criterion))
    extras = {"t_final": float(record.t[-1]), "rho_final": float(record.rho[-1])}
    return [
        SeedResult(
            seed=0.0,
            criterion=report,
            t_star=report.t_star,
            t_detect=None if est is None else est.t_detect,
            detect_method=None if est is None else est.method,
            bound_rtol=rtol,
            violations=violations,
            extras=extras,
        )
    ]


def _run_riccati(cfg: ExperimentConfig, files: _Artifacts, simulate: bool) -> list[SeedResult]:
    lam0, t_end = cfg.riccati.lambda0, cfg.riccati.t_end
    point = PointData(rho0=0.0, div_v0=lam0, lambda_min=lam0)
    report = _staged("criterion", check, cfg.criterion, point, cfg.params)
    rtol = BOUND_RTOL_BY_CRITERION[cfg.criterion]
    if not simulate:
        return [SeedResult(seed=0.0, criterion=report, t_star=report.t_star, bound_rtol=rtol)]
    t, lam = _staged("riccati", integrate_riccati, lam0, t_end, cfg.integrator)
    exact = lam0 / (1.0 + lam0 * t)
    files.add("riccati.csv", _write_csv(["t", "lambda", "closed_form"], zip(t, lam, exact)))
    t_detect = method = None
    if lam0 < 0:
        t_detect, method = _detect(np.column_stack([t, -lam]), "inverse_fit")
    extras = {"max_abs_error": float(np.max(np.abs(lam - exact))), "t_final": float(t[-1])}
    return [
        SeedResult(
            seed=0.0,
            criterion=report,
            t_star=report.t_star,
            t_detect=t_detect,
            detect_method=method,
            bound_rtol=rtol,
            extras=extras,
        )
    ]


# ----------------------------------------------------------------------- pde


def initial_state(cfg: ExperimentConfig) -> FlowState:
    fields = {name: spec.evaluate(cfg.grid, cfg.random_seed) for name, spec in cfg.initial.items()}
    seeds = cfg.seeds if cfg.seeds is not None else (seed_of_min_divergence(fields["v"]),)
    return FlowState.with_tracers(fields["rho"], fields["v"], fields.get("S"), seeds=seeds)


_TRACER_COLUMNS = ["t", "x", "rho", "v", "vx", "rho_x", "rho_xx", "S", "S_x", "S_xx", "p_xx"]


def _tracer_csv(history) -> str:
    return _write_csv(_TRACER_COLUMNS, ([getattr(s, c) for c in _TRACER_COLUMNS] for s in history))


def _tracer_record(history, seed: float, cfg: ExperimentConfig, t_cut: float) -> TrajectoryRecord:
    t = np.array([s.t for s in history])
    keep = t <= t_cut
    background = cfg.params.rho_bar > 0
    return TrajectoryRecord(
        seed=seed,
        t=t[keep],
        rho=np.array([s.rho for s in history])[keep],
        d=np.array([s.vx for s in history])[keep],
        terminated=Termination.reached_t_end,
        system=System.background if background else System.pressureless,
        rho_bar=cfg.params.rho_bar,
    )


def _pde_seed(
    cfg: ExperimentConfig,
    run: SimulationResult,
    index: int,
    seed: float,
    report: CriterionReport,
    files: _Artifacts,
) -> SeedResult:
    history = run.tracer_history[index]
    files.add(f"tracer_{index:03d}.csv", _tracer_csv(history))
    polytropic = cfg.system == "polytropic"
    rtol = BOUND_RTOL_BY_CRITERION[cfg.criterion]
    extras: dict[str, float] = {}

    t_detect = method = None
    if run.terminated == "blow_up" and len(history) >= 4:
        t = np.array([s.t for s in history])
        series = np.array([-s.vx if polytropic else s.rho for s in history])
        t_detect, method = _detect(np.column_stack([t, series]), "inverse_fit")

    t_end_hist = history[-1].t
    t_cut = t_end_hist
    if t_detect is not None:
        t_cut = history[0].t + (1.0 - XVAL_TAIL_FRACTION) * (t_detect - history[0].t)

    violations = None
    if report.member:
        if polytropic:
            mon = _staged("monitor", polytropic_estimate_monitor, history, cfg.params, seed=seed)
            violations = len(mon.violations)
        elif cfg.criterion in ("s1", "s2"):
            rec = _tracer_record(history, seed, cfg, t_cut)
            if len(rec) >= 3:
                found = _staged(
                    "monitor",
                    monitor_inequalities,
                    rec,
                    cfg.params,
                    cfg.criterion,
                    rel_noise=PDE_MONITOR_NOISE,
                    seed=seed,
                )
                violations = len(found)

    if cfg.cross_validate and not polytropic:
        first = history[0]
        oracle_cfg = dataclasses.replace(
            cfg.integrator, max_step=min(cfg.integrator.max_step, ORACLE_MAX_STEP)
        )
        system = System.background if cfg.params.rho_bar > 0 else System.pressureless
        oracle, oracle_est = _staged(
            "oracle",
            integrate_characteristic,
            system,
            CharState(first.rho, first.vx),
            cfg.params,
            oracle_cfg,
            max(2.0 * t_end_hist, t_end_hist + 1.0),
            seed,
            seed=seed,
        )
        files.add(f"oracle_{index:03d}.csv", oracle.to_csv())
        xv = _staged("cross-validation", cross_validate, run, oracle, index, XVAL_TAIL_FRACTION, seed=seed)
        extras.update(
            {
                "xval_max_rel_rho": xv.max_rel_rho,
                "xval_max_rel_d": xv.max_rel_d,
                "xval_t_to": xv.t_to,
            }
        )
        if oracle_est is not None:
            extras["oracle_t_detect"] = oracle_est.t_detect

    return SeedResult(
        seed=seed,
        criterion=report,
        t_star=report.t_star,
        t_detect=t_detect,
        detect_method=method,
        bound_rtol=rtol,
        violations=violations,
        extras=extras,
    )


def _run_pde(cfg: ExperimentConfig, files: _Artifacts, simulate: bool) -> tuple[list[SeedResult], dict]:
    state = _staged("initial data", initial_state, cfg)
    reports = []
    tol = point_data_tolerance(state)
    for seed in state.seeds:
        point = _staged("point data", extract_point_data, state, cfg.grid, float(seed), seed=float(seed))
        reports.append(
            _staged("criterion", check, cfg.criterion, point, cfg.params, tol, seed=float(seed))
        )
    rtol = BOUND_RTOL_BY_CRITERION[cfg.criterion]
    if not simulate:
        results = [
            SeedResult(seed=float(a), criterion=r, t_star=r.t_star, bound_rtol=rtol)
            for a, r in zip(state.seeds, reports)
        ]
        return results, {}

    stars = [r.t_star for r in reports if r.t_star is not None]
    run = _staged(
        "simulation",
        run_simulation,
        state,
        cfg.params,
        cfg.solver,
        cfg.system,
        min(stars) if stars else None,
        rtol,
    )
    files.add("stats.csv", run.stats_csv())
    for j, snap in enumerate(run.snapshots):
        files.add(f"snapshots/snapshot_{j:04d}.csv", snap.to_csv())
    results = [
        _pde_seed(cfg, run, i, float(a), r, files) for i, (a, r) in enumerate(zip(state.seeds, reports))
    ]
    extras = {
        "terminated": run.terminated,
        "reason": run.reason,
        "t_final": run.t_final,
        "steps": len(run.stats),
    }
    if run.blowup is not None:
        extras["run_t_detect"] = run.blowup.t_detect
    return results, extras


# --------------------------------------------------------------------- sweep

SWEEP_MARGINS = {
    "s1": ["vorticity", "density-positive", "divergence-threshold"],
    "s2": ["vorticity", "divergence-sign", "density-floor", "divergence-threshold"],
}


def _sweep_point(args) -> list:
    cfg, rho0, d0 = args
    point = PointData(rho0=rho0, div_v0=d0, lambda_min=d0)
    report = check(cfg.criterion, point, cfg.params)
    t_detect = verdict = None
    if cfg.sweep.integrate:
        _, est = integrate_characteristic(
            _char_system(cfg), CharState(rho0, d0), cfg.params, cfg.integrator, cfg.sweep.t_end
        )
        if est is not None:
            t_detect = est.t_detect
            if report.t_star is not None:
                verdict = t_detect <= report.t_star * (1.0 + BOUND_RTOL)
    margins = [report.margins[m] for m in SWEEP_MARGINS[cfg.criterion]]
    return [rho0, d0, report.member, report.t_star, report.window, t_detect, verdict, *margins]


def _run_sweep(cfg: ExperimentConfig, files: _Artifacts, jobs: int) -> dict:
    if cfg.criterion not in SWEEP_MARGINS:
        raise ScenarioError("sweep", ValueError("sweeps cover the s1 and s2 criteria"))
    tasks = [(cfg, r, d) for r, d in cfg.sweep.points()]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(_sweep_point, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
        else:
            rows = [_sweep_point(t) for t in tasks]
    except EPBlowupError as exc:
        raise ScenarioError("sweep", exc) from exc
    header = ["rho0", "d0", "member", "t_star", "window", "t_detect", "bound_satisfied"]
    header += [f"margin_{m}" for m in SWEEP_MARGINS[cfg.criterion]]
    files.add("phase_map.csv", _write_csv(header, rows))
    members = [r for r in rows if r[2]]
    return {
        "points": len(rows),
        "members": len(members),
        "blowups": sum(1 for r in rows if r[5] is not None),
        "bound_violations": sum(1 for r in members if r[6] is False),
    }


# ------------------------------------------------------------------ pipeline


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_scenario(
    cfg: ExperimentConfig, simulate: bool = True, sweep: bool = False, jobs: int = 1, write: bool = True
) -> RunSummary:
    """Run the configured pipeline and write its artifacts to ``cfg.output.dir``.

    ``simulate=False`` stops after the criterion checks. ``sweep=True`` runs
    the configured (rho0, d0) grid instead of the single scenario.
    """
    files = _Artifacts()
    files.add("config.toml", cfg.to_toml())
    extras: dict = {}
    if sweep:
        if cfg.sweep is None:
            raise ScenarioError("sweep", ValueError("the configuration has no [sweep] table"))
        seeds: list[SeedResult] = []
        extras = _run_sweep(cfg, files, jobs)
    elif cfg.system == "characteristic":
        if cfg.characteristic is None:
            raise ScenarioError("characteristic", ValueError("no [characteristic] table"))
        seeds = _run_characteristic(cfg, files, simulate)
    elif cfg.system == "riccati":
        seeds = _run_riccati(cfg, files, simulate)
    else:
        seeds, extras = _run_pde(cfg, files, simulate)

    report_names = {"text": "report.txt", "json": "summary.json"}
    summary = RunSummary(
        system=cfg.system,
        config=cfg.to_document(),
        seeds=seeds,
        status="ok",
        extras=extras,
        generated=_timestamp() if cfg.output.timestamp else None,
    )
    for fmt in cfg.output.formats:
        files.add(report_names[fmt], "")
    summary.files = files.names()
    for fmt in cfg.output.formats:
        files.add(report_names[fmt], emit_report(summary, fmt))
    if write:
        files.write(Path(cfg.output.dir))
    return summary

