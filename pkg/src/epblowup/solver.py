"""Eulerian 1D solvers with Lagrangian tracers.

Pressureless Euler-Poisson (with or without background density):

    rho_t + (rho v)_x = 0,    v_t + v v_x = -k phi_x,    phi_xx = rho - rho_bar

Mass uses a conservative finite-volume update with the local
Lax-Friedrichs (Rusanov) flux; velocity uses a collocated centered
convective update; both are advanced with the three-stage SSP Runge-Kutta
scheme. On periodic grids the Poisson source is always mean-removed, so
``rho_bar`` is effectively ``mean(rho)``.

Polytropic Euler (pseudospectral method of lines, classical RK4):

    rho_t + (rho v)_x = 0,    v_t + v v_x = -p_x,    S_t + v S_x = 0,
    p = exp(S) rho^gamma

The momentum equation is used as written above by default;
``physical_momentum=True`` switches to ``-p_x / rho``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .characteristics import BOUND_RTOL, BlowupEstimate, TrajectoryRecord, estimate_blowup_time
from .criteria import PhysParams
from .errors import (
    BlowupDetected,
    DomainRangeError,
    FitRejectedError,
    InsufficientDataError,
    InvalidInputError,
)
from .fields import (
    Grid1D,
    ScalarField,
    fd_diff,
    poisson_freespace,
    poisson_periodic,
    sample_values,
    spectral_diff,
)
from .kinematics import decompose_gradient

SYSTEMS = ("ep", "ep_background", "polytropic")


@dataclass(frozen=True)
class FlowState:
    rho: ScalarField
    v: ScalarField
    S: ScalarField | None = None
    t: float = 0.0
    seeds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.v.grid != self.rho.grid or (self.S is not None and self.S.grid != self.rho.grid):
            raise InvalidInputError("all fields must share one grid")
        seeds = np.atleast_1d(np.asarray(self.seeds, dtype=float))
        pos = np.atleast_1d(np.asarray(self.positions, dtype=float))
        if seeds.shape != pos.shape:
            raise InvalidInputError("seeds and positions must have equal length")
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "positions", pos)

    @property
    def grid(self) -> Grid1D:
        return self.rho.grid

    @property
    def tracers(self) -> list[tuple[float, float]]:
        return list(zip(self.seeds.tolist(), self.positions.tolist()))

    @classmethod
    def with_tracers(cls, rho, v, S=None, seeds=(), t=0.0) -> "FlowState":
        seeds = np.asarray(seeds, dtype=float)
        return cls(rho, v, S, t, seeds, seeds.copy())


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.4
    t_end: float = 1.0
    gradient_cap: float = 50.0
    dealias: bool = True
    snapshot_every: int = 0
    physical_momentum: bool = False
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise InvalidInputError("cfl must lie in (0, 1]")
        if not self.t_end > 0:
            raise InvalidInputError("t_end must be positive")
        if not self.gradient_cap > 0:
            raise InvalidInputError("gradient_cap must be positive")
        if self.snapshot_every < 0:
            raise InvalidInputError("snapshot_every must be nonnegative")


@dataclass(frozen=True)
class StepStats:
    t: float
    dt: float
    total_mass: float
    max_rho: float
    max_abs_vx: float
    max_hessian_p: float = 0.0

    def row(self) -> list[str]:
        return [repr(float(x)) for x in (self.t, self.dt, self.total_mass, self.max_rho,
                                         self.max_abs_vx, self.max_hessian_p)]


STATS_HEADER = ["t", "dt", "total_mass", "max_rho", "max_abs_vx", "max_hessian_p"]


# ---------------------------------------------------------------- helpers


def _ddx(values: np.ndarray, grid: Grid1D, order: int = 1) -> np.ndarray:
    if grid.periodic:
        return spectral_diff(values, grid, order)
    return fd_diff(values, grid, order)


def _total_mass(rho: np.ndarray, grid: Grid1D) -> float:
    return float(grid.h * np.sum(rho))


def _force(rho: np.ndarray, grid: Grid1D, params: PhysParams, background: bool) -> np.ndarray:
    """-k phi_x for the current density."""
    if params.k == 0:
        return np.zeros_like(rho)
    if grid.periodic:
        grad = poisson_periodic(ScalarField(rho, grid)).grad_phi.values
    else:
        source = rho - params.rho_bar if background else rho
        grad = poisson_freespace(ScalarField(source, grid)).grad_phi.values
    return -params.k * grad


def _neighbours(a: np.ndarray, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """(a_{i-1}, a_{i+1}) with periodic wrap or constant extrapolation."""
    if grid.periodic:
        return np.roll(a, 1), np.roll(a, -1)
    return np.concatenate([a[:1], a[:-1]]), np.concatenate([a[1:], a[-1:]])


def _llf_divergence(rho: np.ndarray, v: np.ndarray, grid: Grid1D) -> np.ndarray:
    """(F_{i+1/2} - F_{i-1/2}) / h for f = rho v with the Rusanov flux.

    Interface states come from an unlimited central-slope linear
    reconstruction of rho and v, which keeps the scheme second order in the
    smooth pre-blow-up regime this solver targets.
    """
    rho_m, rho_p = _neighbours(rho, grid)
    v_m, v_p = _neighbours(v, grid)
    s_rho = 0.25 * (rho_p - rho_m)  # half cell slope
    s_v = 0.25 * (v_p - v_m)
    rho_l, v_l = rho + s_rho, v + s_v  # left state at i+1/2
    _, rho_r = _neighbours(rho - s_rho, grid)
    _, v_r = _neighbours(v - s_v, grid)
    alpha = np.maximum(np.abs(v_l), np.abs(v_r))
    flux = 0.5 * (rho_l * v_l + rho_r * v_r) - 0.5 * alpha * (rho_r - rho_l)
    if grid.periodic:
        flux_in = np.roll(flux, 1)
    else:
        # zero-gradient ghost cells at both ends
        flux[-1] = rho[-1] * v[-1]
        flux_in = np.concatenate([[rho[0] * v[0]], flux[:-1]])
    return (flux - flux_in) / grid.h


def _centered_dx(v: np.ndarray, grid: Grid1D) -> np.ndarray:
    return fd_diff(v, grid, 1)


def _ep_rhs(rho, v, grid, params, background):
    drho = -_llf_divergence(rho, v, grid)
    dv = -v * _centered_dx(v, grid) + _force(rho, grid, params, background)
    return drho, dv


def _move_tracers(positions, v_old, v_new, grid, dt):
    if positions.size == 0:
        return positions
    half = positions + 0.5 * dt * sample_values(v_old, grid, positions)
    half = grid.wrap(half)
    v_mid = 0.5 * (sample_values(v_old, grid, half) + sample_values(v_new, grid, half))
    new = grid.wrap(positions + dt * v_mid)
    if not np.all(grid.contains(new)):
        raise DomainRangeError("tracer left the computational domain")
    return new


def _dt_ep(rho, v, grid, params, cfl):
    vx = _centered_dx(v, grid)
    denom = (
        np.max(np.abs(v))
        + grid.h * np.max(np.abs(vx))
        + grid.h * math.sqrt(params.k * max(np.max(rho), 0.0))
        + 1e-300
    )
    if not math.isfinite(denom):
        return math.nan
    return cfl * grid.h / denom


# ---------------------------------------------------------------- EP step


def ep_step(
    state: FlowState,
    params: PhysParams,
    cfg: SolverConfig,
    background: bool = False,
    dt: float | None = None,
) -> tuple[FlowState, StepStats]:
    """Advance the pressureless Euler-Poisson system by one SSP-RK3 step.

    ``dt`` defaults to ``cfl * h / (max|v| + h max|v_x| + h sqrt(k max rho))``
    and is clipped so the step does not pass ``cfg.t_end``.
    Raises BlowupDetected when the state is no longer finite.
    """
    grid = state.grid
    rho0, v0 = state.rho.values, state.v.values
    if dt is None:
        dt = _dt_ep(rho0, v0, grid, params, cfg.cfl)
        if not math.isfinite(dt):
            raise BlowupDetected("non-finite CFL denominator", state.t)
        dt = min(dt, max(cfg.t_end - state.t, 0.0) or dt)

    with np.errstate(all="ignore"):
        r1, w1 = _ep_rhs(rho0, v0, grid, params, background)
        rho1, v1 = rho0 + dt * r1, v0 + dt * w1
        r2, w2 = _ep_rhs(rho1, v1, grid, params, background)
        rho2 = 0.75 * rho0 + 0.25 * (rho1 + dt * r2)
        v2 = 0.75 * v0 + 0.25 * (v1 + dt * w2)
        r3, w3 = _ep_rhs(rho2, v2, grid, params, background)
        rho_new = rho0 / 3.0 + 2.0 / 3.0 * (rho2 + dt * r3)
        v_new = v0 / 3.0 + 2.0 / 3.0 * (v2 + dt * w3)

    if not (np.all(np.isfinite(rho_new)) and np.all(np.isfinite(v_new))):
        raise BlowupDetected("non-finite field", state.t + dt)
    rho_new = np.where(rho_new < 0.0, 0.0, rho_new)
    positions = _move_tracers(state.positions, v0, v_new, grid, dt)
    new_state = FlowState(
        ScalarField(rho_new, grid),
        ScalarField(v_new, grid),
        None,
        state.t + dt,
        state.seeds,
        positions,
    )
    vx = _ddx(v_new, grid)
    stats = StepStats(
        t=new_state.t,
        dt=dt,
        total_mass=_total_mass(rho_new, grid),
        max_rho=float(np.max(rho_new)),
        max_abs_vx=float(np.max(np.abs(vx))),
    )
    return new_state, stats


# ---------------------------------------------------------------- polytropic step


def _dealias_filter(grid: Grid1D) -> np.ndarray:
    m = np.arange(grid.n_cells // 2 + 1)
    return (m <= grid.n_cells // 3).astype(float)


def _filtered(values: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    if mask is None:
        return values
    return np.fft.irfft(np.fft.rfft(values) * mask, n=values.size)


def pressure(rho: np.ndarray, S: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(S) * np.maximum(rho, 0.0) ** gamma


def _poly_rhs(rho, v, S, grid, params, physical, mask):
    p = pressure(rho, S, params.gamma)
    drho = -spectral_diff(rho * v, grid, 1)
    px = spectral_diff(p, grid, 1)
    if physical:
        px = px / np.maximum(rho, 1e-12)
    dv = -v * spectral_diff(v, grid, 1) - px
    dS = -v * spectral_diff(S, grid, 1)
    if mask is not None:
        drho, dv, dS = (_filtered(a, mask) for a in (drho, dv, dS))
    return drho, dv, dS


def _dt_poly(rho, v, S, grid, params, cfg):
    p = pressure(rho, S, params.gamma)
    if cfg.physical_momentum:
        cs = np.sqrt(params.gamma * p / np.maximum(rho, 1e-12))
    else:
        cs = np.sqrt(params.gamma * p)
    vx = spectral_diff(v, grid, 1)
    denom = np.max(np.abs(v) + cs) + grid.h * np.max(np.abs(vx)) + 1e-300
    if not math.isfinite(denom):
        return math.nan
    return cfg.cfl * grid.h / denom


def polytropic_step(
    state: FlowState, params: PhysParams, cfg: SolverConfig, dt: float | None = None
) -> tuple[FlowState, StepStats]:
    """Advance the polytropic system by one classical RK4 step."""
    grid = state.grid
    if not grid.periodic:
        raise InvalidInputError("the polytropic solver needs a periodic grid")
    if state.S is None:
        raise InvalidInputError("the polytropic solver needs an entropy field")
    mask = _dealias_filter(grid) if cfg.dealias else None
    y0 = [state.rho.values, state.v.values, state.S.values]
    if dt is None:
        dt = _dt_poly(*y0, grid, params, cfg)
        if not math.isfinite(dt):
            raise BlowupDetected("non-finite CFL denominator", state.t)
        dt = min(dt, max(cfg.t_end - state.t, 0.0) or dt)

    def rhs(y):
        return _poly_rhs(*y, grid, params, cfg.physical_momentum, mask)

    with np.errstate(all="ignore"):
        k1 = rhs(y0)
        k2 = rhs([a + 0.5 * dt * b for a, b in zip(y0, k1)])
        k3 = rhs([a + 0.5 * dt * b for a, b in zip(y0, k2)])
        k4 = rhs([a + dt * b for a, b in zip(y0, k3)])
        y1 = [
            a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(y0, k1, k2, k3, k4)
        ]
    if not all(np.all(np.isfinite(a)) for a in y1):
        raise BlowupDetected("non-finite field", state.t + dt)
    # no clipping of rho here: spectral mass conservation would be lost
    positions = _move_tracers(state.positions, y0[1], y1[1], grid, dt)
    new_state = FlowState(
        ScalarField(y1[0], grid),
        ScalarField(y1[1], grid),
        ScalarField(y1[2], grid),
        state.t + dt,
        state.seeds,
        positions,
    )
    vx = spectral_diff(y1[1], grid, 1)
    p_xx = spectral_diff(pressure(y1[0], y1[2], params.gamma), grid, 2)
    stats = StepStats(
        t=new_state.t,
        dt=dt,
        total_mass=_total_mass(y1[0], grid),
        max_rho=float(np.max(y1[0])),
        max_abs_vx=float(np.max(np.abs(vx))),
        max_hessian_p=float(np.max(np.abs(p_xx))),
    )
    return new_state, stats


# ---------------------------------------------------------------- runs


@dataclass(frozen=True)
class TracerSample:
    """Fields and derivative magnitudes at one tracer at one time."""

    t: float
    x: float
    rho: float
    v: float
    vx: float
    rho_x: float = 0.0
    rho_xx: float = 0.0
    v_xx: float = 0.0
    v_xxx: float = 0.0
    S: float = 0.0
    S_x: float = 0.0
    S_xx: float = 0.0
    p_xx: float = 0.0
    # resolution floors: estimated pointwise error of value + |d/dx| + |d2/dx2|
    rho_res: float = 0.0
    S_res: float = 0.0
    p_res: float = 0.0


@dataclass(frozen=True)
class Snapshot:
    t: float
    x: np.ndarray
    rho: np.ndarray
    v: np.ndarray
    S: np.ndarray | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# t={self.t!r}\n")
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["x", "rho", "v"] + (["S"] if self.S is not None else [])
        writer.writerow(cols)
        arrays = [self.x, self.rho, self.v] + ([self.S] if self.S is not None else [])
        for row in zip(*arrays):
            writer.writerow([repr(float(a)) for a in row])
        return buf.getvalue()


@dataclass
class SimulationResult:
    system: str
    terminated: str  # "reached_t_end" | "blow_up"
    reason: str
    final: FlowState
    stats: list[StepStats]
    tracer_history: list[list[TracerSample]]  # [tracer][sample]
    snapshots: list[Snapshot]
    blowup: BlowupEstimate | None = None

    @property
    def t_final(self) -> float:
        return self.final.t

    def stats_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(STATS_HEADER)
        for s in self.stats:
            writer.writerow(s.row())
        return buf.getvalue()


def resolution_floor(values: np.ndarray, grid: Grid1D, dealias: bool) -> float:
    """Pointwise error estimate for f + |f_x| + |f_xx| of a Fourier field.

    Uses the amplitudes in the upper half of the retained band (modes up to
    n/3 with dealiasing, n/2 without) as a proxy for the truncated tail,
    weighted by (1 + |k| + k^2). Zero on non-periodic grids.
    """
    if not grid.periodic:
        return 0.0
    n = grid.n_cells
    top = n // 3 if dealias else n // 2
    c = np.abs(np.fft.rfft(values)) * (2.0 / n)
    k = grid.wavenumbers
    m = np.arange(c.size)
    tail = (m > top // 2) & (m <= top)
    return float(np.sum(c[tail] * (1.0 + k[tail] + k[tail] ** 2)))


def _tracer_samples(
    state: FlowState, params: PhysParams, polytropic: bool, dealias: bool = True
) -> list[TracerSample]:
    if state.positions.size == 0:
        return []
    grid = state.grid
    x = state.positions
    rho, v = state.rho.values, state.v.values

    def at(values):
        return sample_values(values, grid, x)

    vx = at(_ddx(v, grid, 1))
    for g in vx:
        # 1D gradients are 1x1 matrices: vorticity vanishes by construction
        assert not decompose_gradient([[g]]).Omega.any()
    cols = dict(rho=at(rho), v=at(v), vx=vx)
    if polytropic:
        S = state.S.values
        p = pressure(rho, S, params.gamma)
        n_tr = x.size
        cols.update(
            rho_x=at(_ddx(rho, grid, 1)),
            rho_xx=at(_ddx(rho, grid, 2)),
            v_xx=at(_ddx(v, grid, 2)),
            v_xxx=at(_ddx(v, grid, 3)),
            S=at(S),
            S_x=at(_ddx(S, grid, 1)),
            S_xx=at(_ddx(S, grid, 2)),
            p_xx=at(_ddx(p, grid, 2)),
            rho_res=np.full(n_tr, resolution_floor(rho, grid, dealias)),
            S_res=np.full(n_tr, resolution_floor(S, grid, dealias)),
            p_res=np.full(n_tr, resolution_floor(p, grid, dealias)),
        )
    return [
        TracerSample(t=state.t, x=float(x[i]), **{k: float(c[i]) for k, c in cols.items()})
        for i in range(x.size)
    ]


def _snapshot(state: FlowState) -> Snapshot:
    return Snapshot(
        state.t,
        state.grid.x.copy(),
        state.rho.values.copy(),
        state.v.values.copy(),
        None if state.S is None else state.S.values.copy(),
    )


def run_simulation(
    initial: FlowState,
    params: PhysParams,
    cfg: SolverConfig,
    system: str,
    t_star: float | None = None,
    bound_rtol: float = BOUND_RTOL,
) -> SimulationResult:
    """Time loop with snapshots, tracer diagnostics and blow-up detection.

    A run ends at ``cfg.t_end`` or when ``max|v_x|`` exceeds
    ``cfg.gradient_cap`` (or a field stops being finite). On blow-up the
    singular time is extrapolated from the tracer-sampled maximum density
    (pressureless systems) or from ``-min v_x`` (polytropic) by a
    ``1/value`` fit, and compared to ``t_star`` if given.
    """
    if system not in SYSTEMS:
        raise InvalidInputError(f"unknown system {system!r}")
    polytropic = system == "polytropic"
    if polytropic != (initial.S is not None):
        raise InvalidInputError("an entropy field is required iff the system is polytropic")
    if system == "ep_background" and not initial.grid.periodic and params.rho_bar > 0:
        raise InvalidInputError("background density needs a periodic grid")

    state = initial
    n_tr = state.positions.size
    history: list[list[TracerSample]] = [[] for _ in range(n_tr)]
    stats: list[StepStats] = []
    snapshots: list[Snapshot] = []
    blowup_series: list[tuple[float, float]] = []

    def record(st: FlowState):
        samples = _tracer_samples(st, params, polytropic, cfg.dealias)
        for i, s in enumerate(samples):
            history[i].append(s)
        if polytropic:
            vx = spectral_diff(st.v.values, st.grid, 1)
            blowup_series.append((st.t, -float(np.min(vx))))
        elif samples:
            blowup_series.append((st.t, max(s.rho for s in samples)))
        else:
            blowup_series.append((st.t, float(np.max(st.rho.values))))

    record(state)
    if cfg.snapshot_every:
        snapshots.append(_snapshot(state))

    terminated, reason = "reached_t_end", "t_end"
    step = 0
    while state.t < cfg.t_end * (1 - 1e-14):
        if step >= cfg.max_steps:
            raise InvalidInputError("max_steps exhausted before t_end")
        try:
            if polytropic:
                state, st = polytropic_step(state, params, cfg)
            else:
                state, st = ep_step(state, params, cfg, background=system == "ep_background")
        except BlowupDetected as signal:
            terminated, reason = "blow_up", signal.reason
            break
        step += 1
        stats.append(st)
        record(state)
        if cfg.snapshot_every and step % cfg.snapshot_every == 0:
            snapshots.append(_snapshot(state))
        if st.max_abs_vx > cfg.gradient_cap:
            terminated, reason = "blow_up", "gradient_cap"
            break

    if cfg.snapshot_every and (not snapshots or snapshots[-1].t != state.t):
        snapshots.append(_snapshot(state))

    estimate = None
    if terminated == "blow_up":
        # 1D Lagrangian dynamics give simple poles: rho = 1/q with q(t*) = 0
        # simple, and v_x ~ -1/(t* - t)
        mode = "inverse_fit"
        try:
            estimate = estimate_blowup_time(blowup_series, mode)
        except (FitRejectedError, InsufficientDataError):
            estimate = BlowupEstimate(state.t, "threshold")
        estimate = estimate.with_bound(t_star, bound_rtol)
    return SimulationResult(system, terminated, reason, state, stats, history, snapshots, estimate)


# ---------------------------------------------------------------- monitors


@dataclass(frozen=True)
class MonitorViolation:
    t: float
    label: str
    lhs: float
    rhs: float


@dataclass
class MonitorReport:
    t: np.ndarray
    slack: dict[str, np.ndarray]  # rhs - lhs per sample, >= -tolerance when satisfied
    violations: list[MonitorViolation]

    @property
    def ok(self) -> bool:
        return not self.violations


def pressure_hessian_bound(
    rho: float, R: float, E: float, S: float, gamma: float
) -> float:
    """Explicit bound on |p_xx| from p = exp(S) rho^gamma.

    With R = rho + |rho_x| + |rho_xx| and E = |S_x| + |S_xx|, expanding p_xx
    by the product and chain rules and bounding every factor by R or E gives

        |p_xx| <= exp(S) R [gamma (gamma-1) rho^(gamma-2) R
                            + rho^(gamma-1) (gamma (1 + 2E) + E + E^2)]

    The bound vanishes with R; rho^(gamma-2) stays bounded as rho -> 0 iff
    gamma >= 2.
    """
    rho = max(rho, 0.0)
    if rho > 0:
        low = rho ** (gamma - 2.0)
    else:
        low = 1.0 if gamma == 2.0 else (0.0 if gamma > 2.0 else math.inf)
    return math.exp(S) * R * (
        gamma * (gamma - 1.0) * low * R
        + rho ** (gamma - 1.0) * (gamma * (1.0 + 2.0 * E) + E + E * E)
    )


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def _growth(initial: float, rate: float, integral: np.ndarray) -> np.ndarray:
    if initial == 0.0:
        return np.zeros_like(integral)
    with np.errstate(over="ignore"):
        return initial * np.exp(rate * integral)


def polytropic_estimate_monitor(
    history: Sequence[TracerSample],
    params: PhysParams,
    rel_slack: float = 1e-6,
    density_rate: float = 3.0,
    entropy_rate: float = 2.0,
) -> MonitorReport:
    """Check the derivative transport envelopes and the pressure bound.

    Along the tracer path, with I_k(t) = int_0^t (|v_x| + ... + |d^k v|):

      density:  R(t) <= R(0) exp(density_rate * I_3(t))
      entropy:  E(t) <= E(0) exp(entropy_rate * I_2(t))
      pressure: |p_xx| <= pressure_hessian_bound(rho, R, E, S)

    In 1D, differentiating the transport equations gives rate constant 3
    for R and 2 for E. Sampled quantities carry resolution floors (see
    ``resolution_floor``); every right-hand side is evaluated at the
    floor-inflated inputs and the left-hand side may exceed it by its own
    floor plus a relative slack.
    """
    if len(history) < 2:
        raise InsufficientDataError("need at least 2 tracer samples")
    t = np.array([s.t for s in history])
    vx = np.abs([s.vx for s in history])
    vxx = np.abs([s.v_xx for s in history])
    vxxx = np.abs([s.v_xxx for s in history])
    R = np.array([max(s.rho, 0.0) + abs(s.rho_x) + abs(s.rho_xx) for s in history])
    E = np.array([abs(s.S_x) + abs(s.S_xx) for s in history])
    P = np.abs([s.p_xx for s in history])
    R_res = np.array([s.rho_res for s in history])
    E_res = np.array([s.S_res for s in history])
    P_res = np.array([s.p_res for s in history])

    env_R = _growth(R[0] + R_res[0], density_rate, _cumtrapz(vx + vxx + vxxx, t))
    env_E = _growth(E[0] + E_res[0], entropy_rate, _cumtrapz(vx + vxx, t))
    bound_P = np.array(
        [
            pressure_hessian_bound(s.rho + s.rho_res, r + s.rho_res, e + s.S_res, s.S, params.gamma)
            for s, r, e in zip(history, R, E)
        ]
    )

    checks = {
        "density-derivatives": (R, env_R, R_res),
        "entropy-derivatives": (E, env_E, E_res),
        "pressure-hessian": (P, bound_P, P_res),
    }
    slack = {}
    violations = []
    for label, (lhs, rhs, res) in checks.items():
        slack[label] = rhs + res - lhs
        with np.errstate(invalid="ignore"):
            bad = ~(lhs <= rhs * (1.0 + rel_slack) + res)
        for i in np.flatnonzero(bad):
            violations.append(MonitorViolation(float(t[i]), label, float(lhs[i]), float(rhs[i])))
    violations.sort(key=lambda v: (v.t, v.label))
    return MonitorReport(t, slack, violations)


# ---------------------------------------------------------------- cross-validation


@dataclass(frozen=True)
class CrossValidation:
    max_rel_rho: float
    max_rel_d: float
    t_from: float
    t_to: float
    n_compared: int


def cross_validate(
    run: SimulationResult,
    oracle: TrajectoryRecord,
    tracer_index: int = 0,
    tail_fraction: float = 0.05,
) -> CrossValidation:
    """Compare tracer-sampled (rho, v_x) with a characteristic oracle.

    The oracle is interpolated with cubic splines. Samples in the final
    ``tail_fraction`` of the interval before the detected blow-up time are
    excluded.
    """
    hist = run.tracer_history[tracer_index]
    t = np.array([s.t for s in hist])
    rho = np.array([s.rho for s in hist])
    vx = np.array([s.vx for s in hist])
    lo = max(t[0], oracle.t[0])
    hi = min(t[-1], oracle.t[-1])
    if run.blowup is not None and tail_fraction > 0:
        hi = min(hi, t[0] + (1.0 - tail_fraction) * (run.blowup.t_detect - t[0]))
    if not hi > lo:
        raise DomainRangeError("run and oracle time ranges do not overlap")
    sel = (t >= lo) & (t <= hi)
    rho_o = CubicSpline(oracle.t, oracle.rho)(t[sel])
    d_o = CubicSpline(oracle.t, oracle.d)(t[sel])
    dev_rho = np.abs(rho[sel] - rho_o) / np.maximum(np.abs(rho_o), 1e-300)
    dev_d = np.abs(vx[sel] - d_o) / np.maximum(np.abs(d_o), 1.0)
    return CrossValidation(
        max_rel_rho=float(np.max(dev_rho)),
        max_rel_d=float(np.max(dev_d)),
        t_from=float(lo),
        t_to=float(hi),
        n_compared=int(np.count_nonzero(sel)),
    )
