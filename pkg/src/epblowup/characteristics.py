"""Closed Lagrangian ODE systems along 1D particle paths.

In one dimension |D|^2 = (div v)^2, so density ``rho`` and divergence
``d`` along a particle path form a closed system:

    pressureless:  rho' = -rho d,   d' = -d^2 - k rho
    background:    rho' = -rho d,   d' = -d^2 - k (rho - rho_bar)

This module integrates them adaptively, evaluates the closed-form lower
envelopes and the eigenvalue Riccati solution, extrapolates blow-up
times, and re-checks the differential inequalities of the blow-up
argument sample by sample.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
import numpy as np

from .criteria import PhysParams
from .errors import (
    FitRejectedError,
    InsufficientDataError,
    InvalidInputError,
    SingularityError,
)
from .integrators import IntegratorConfig, dopri5

BOUND_RTOL = 1e-6


class System(str, Enum):
    pressureless = "pressureless"
    background = "background"


class Termination(str, Enum):
    reached_t_end = "reached_t_end"
    blow_up = "blow_up"
    step_underflow = "step_underflow"


@dataclass(frozen=True)
class CharState:
    rho: float
    d: float
    t: float = 0.0

    def __post_init__(self):
        if not self.rho >= 0:
            raise InvalidInputError("density along a trajectory must be nonnegative")


@dataclass
class TrajectoryRecord:
    seed: float
    t: np.ndarray
    rho: np.ndarray
    d: np.ndarray
    terminated: Termination
    system: System = System.pressureless
    rho_bar: float = 0.0

    @property
    def samples(self) -> list[CharState]:
        return [CharState(float(r), float(d), float(t)) for t, r, d in zip(self.t, self.rho, self.d)]

    @property
    def theta(self) -> np.ndarray:
        return self.rho - 0.5 * self.rho_bar

    def __len__(self):
        return self.t.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "rho", "d", "theta"])
        background = self.system == System.background
        for t, r, d in zip(self.t, self.rho, self.d):
            theta = repr(float(r - 0.5 * self.rho_bar)) if background else ""
            writer.writerow([repr(float(t)), repr(float(r)), repr(float(d)), theta])
        return buf.getvalue()


@dataclass
class BlowupEstimate:
    t_detect: float
    method: str  # "threshold" | "inverse_sqrt_fit" | "inverse_fit"
    t_star_bound: float | None = None
    bound_satisfied: bool | None = None

    def with_bound(self, t_star: float | None, rtol: float = BOUND_RTOL) -> "BlowupEstimate":
        if t_star is None:
            return BlowupEstimate(self.t_detect, self.method)
        ok = self.t_detect <= t_star * (1.0 + rtol)
        return BlowupEstimate(self.t_detect, self.method, t_star, ok)


@dataclass(frozen=True)
class Violation:
    t: float
    label: str
    lhs: float
    rhs: float


def pressureless_rhs(s: CharState, params: PhysParams) -> tuple[float, float]:
    return -s.rho * s.d, -s.d * s.d - params.k * s.rho


def background_rhs(s: CharState, params: PhysParams) -> tuple[float, float]:
    return -s.rho * s.d, -s.d * s.d - params.k * (s.rho - params.rho_bar)


def _vector_rhs(system: System, params: PhysParams):
    k = params.k
    shift = params.rho_bar if system == System.background else 0.0

    def rhs(t, y):
        rho, d = y
        return np.array([-rho * d, -d * d - k * (rho - shift)])

    return rhs


def integrate_characteristic(
    system: System | str,
    init: CharState,
    params: PhysParams,
    cfg: IntegratorConfig | None = None,
    t_end: float = 10.0,
    seed: float = 0.0,
    t_star_bound: float | None = None,
) -> tuple[TrajectoryRecord, BlowupEstimate | None]:
    """Integrate (rho, d) along one particle path.

    Stops at ``t_end``, when ``rho >= cfg.rho_cap`` (blow-up) or when the
    step controller underflows. In the last two cases the blow-up time is
    extrapolated from the density tail; if the tail cannot be fitted the
    last sample time is reported (``method="threshold"``).
    """
    system = System(system)
    cfg = cfg or IntegratorConfig()
    if not t_end > init.t:
        raise InvalidInputError("t_end must exceed the initial time")

    sol = dopri5(
        _vector_rhs(system, params),
        init.t,
        [init.rho, init.d],
        t_end,
        cfg,
        stop=lambda t, y: y[0] >= cfg.rho_cap,
        admissible=lambda y: y[0] >= 0.0,
    )
    status = {
        "reached_t_end": Termination.reached_t_end,
        "stopped": Termination.blow_up,
        "step_underflow": Termination.step_underflow,
        "max_steps": Termination.step_underflow,
    }[sol.status]
    record = TrajectoryRecord(
        seed=seed,
        t=sol.t,
        rho=sol.y[:, 0],
        d=sol.y[:, 1],
        terminated=status,
        system=system,
        rho_bar=params.rho_bar if system == System.background else 0.0,
    )
    if status == Termination.reached_t_end:
        return record, None
    try:
        est = estimate_blowup_time(np.column_stack([record.t, record.rho]), "inverse_sqrt_fit")
    except (FitRejectedError, InsufficientDataError):
        est = BlowupEstimate(float(record.t[-1]), "threshold")
    return record, est.with_bound(t_star_bound)


def integrate_riccati(
    lambda0: float, t_end: float, cfg: IntegratorConfig | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate lambda' = -lambda^2 with the adaptive integrator."""
    cfg = cfg or IntegratorConfig()
    sol = dopri5(lambda t, y: -y * y, 0.0, [lambda0], t_end, cfg)
    if sol.status != "reached_t_end":
        raise SingularityError(f"Riccati integration stopped early ({sol.status})")
    return sol.t, sol.y[:, 0]


def riccati_closed_form(lambda0: float, t: float) -> float:
    denom = 1.0 + lambda0 * t
    if abs(denom) <= 1e-14:
        raise SingularityError(f"Riccati pole at t={t!r} for lambda0={lambda0!r}")
    return lambda0 / denom


def _inverse_square_envelope(q0: float, k: float, t: float) -> float:
    if not q0 > 0 or not k > 0:
        raise InvalidInputError("envelope needs positive initial value and k")
    factor = 1.0 - math.sqrt(k * q0 / 12.0) * t
    if factor <= 1e-14:
        raise SingularityError(
            f"t={t!r} at or beyond the envelope pole {math.sqrt(12.0 / (k * q0))!r}"
        )
    return q0 / factor**2


def density_envelope(rho0: float, k: float, t: float) -> float:
    """Lower bound rho0 / (1 - sqrt(k rho0 / 12) t)^2 for S1 trajectories."""
    return _inverse_square_envelope(rho0, k, t)


def theta_envelope(theta0: float, k: float, t: float) -> float:
    """Lower bound for theta = rho - rho_bar/2 along S2 trajectories."""
    return _inverse_square_envelope(theta0, k, t)


def estimate_blowup_time(samples, mode: str = "inverse_sqrt_fit", window: int = 20) -> BlowupEstimate:
    """Extrapolate the pole of a blowing-up sample sequence.

    ``inverse_sqrt_fit`` assumes ``value ~ (t* - t)^-2`` and fits
    ``value^-1/2`` linearly in ``t``; ``inverse_fit`` assumes a simple pole
    and fits ``1/value``. Only the trailing ``window`` samples are used.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError("samples must be a sequence of (t, value) pairs")
    if arr.shape[0] < 4:
        raise InsufficientDataError("at least 4 samples are needed for a fit")
    tail = arr[-window:]
    t, val = tail[:, 0], tail[:, 1]
    if np.any(np.diff(t) <= 0):
        raise FitRejectedError("sample times must be strictly increasing")
    if np.any(np.diff(val) <= 0) or np.any(val <= 0):
        raise FitRejectedError("tail values must be positive and strictly increasing")
    if mode == "inverse_sqrt_fit":
        y = val**-0.5
    elif mode == "inverse_fit":
        y = 1.0 / val
    else:
        raise InvalidInputError(f"unknown fit mode {mode!r}")
    # shift time for conditioning; tail spans can be tiny near a pole
    t_ref = t[-1]
    slope, intercept = np.polyfit(t - t_ref, y, 1)
    if not slope < 0:
        raise FitRejectedError("fitted line does not decrease")
    t_detect = t_ref - intercept / slope
    if not t_detect > t[-1]:
        # the fit crosses zero inside the data: the singularity is already
        # resolved to sample precision
        t_detect = float(np.nextafter(t[-1], np.inf))
    return BlowupEstimate(float(t_detect), mode)


def _second_differences(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Three-point second divided difference at interior samples."""
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    return 2.0 * ((f[2:] - f[1:-1]) / h2 - (f[1:-1] - f[:-2]) / h1) / (h1 + h2)


def _stencil_noise(t: np.ndarray, f: np.ndarray, rel_noise: float) -> np.ndarray:
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    mag = np.maximum(np.maximum(np.abs(f[:-2]), np.abs(f[1:-1])), np.abs(f[2:]))
    return 8.0 * (rel_noise + np.finfo(float).eps) * mag / (h1 * h2)


def monitor_inequalities(
    traj: TrajectoryRecord,
    params: PhysParams,
    regime: str,
    rel_slack: float = BOUND_RTOL,
    rel_noise: float = 1e-9,
) -> list[Violation]:
    """Re-check the blow-up argument's inequalities along a trajectory.

    Pointwise checks use the sampled state (``D rho/Dt = -rho d`` exactly).
    The second-derivative checks compare the three-point divided difference
    of the sampled density, which equals the second derivative somewhere
    inside the stencil, against the right-hand side minimized over the
    stencil. Their tolerance adds the divided-difference amplification of
    per-sample noise (``rel_noise`` relative, plus round-off).

    regime "s1": rate sign, squared-rate chain, second derivative, envelope.
    regime "s2": the same for theta = rho - rho_bar/2, restricted to the
    time window where the argument applies.
    """
    if len(traj) < 3:
        raise InsufficientDataError("need at least 3 samples")
    if regime not in ("s1", "s2"):
        raise InvalidInputError(f"unknown regime {regime!r}")
    k = params.k
    t, rho, d = traj.t, traj.rho, traj.d
    out: list[Violation] = []

    def flag(mask, label, lhs, rhs, times=t):
        for i in np.flatnonzero(mask):
            out.append(Violation(float(times[i]), label, float(lhs[i]), float(rhs[i])))

    def below(lhs, rhs, extra=0.0):
        tol = rel_slack * np.maximum(np.abs(lhs), np.abs(rhs)) + extra
        return lhs < rhs - tol

    rate = -rho * d
    t0 = t[0]
    if regime == "s1":
        q, c, label = rho, 0.0, "rho"
        active = np.ones_like(t, dtype=bool)
    else:
        rb = params.rho_bar
        q, c, label = rho - 0.5 * rb, k * rb * rb / 4.0, "theta"
        window = -4.0 * rho[0] * d[0] / (k * rb * rb) if k > 0 and rb > 0 else math.inf
        active = (t - t0) <= window

    zero = np.zeros_like(rate)
    if regime == "s1":
        flag(below(rate, zero), "drho-nonneg", rate, zero)
    else:
        flag(active & (rate <= 0), "dtheta-positive", rate, zero)

    sq_lhs = rate * rate
    sq_rhs = (k / 3.0) * np.sign(q) * np.abs(q) ** 3
    flag(active & below(sq_lhs, sq_rhs), f"d{label}-squared", sq_lhs, sq_rhs)

    t_star = math.sqrt(12.0 / (k * q[0])) if k > 0 and q[0] > 0 else math.inf
    env_ok = active & ((t - t0) < t_star * (1.0 - 1e-9))
    env = np.full_like(q, -np.inf)
    if k > 0 and q[0] > 0:
        env[env_ok] = q[0] / (1.0 - np.sqrt(k * q[0] / 12.0) * (t[env_ok] - t0)) ** 2
    flag(env_ok & (q < env * (1.0 - rel_slack)), f"{label}-envelope", q, env)

    dd = _second_differences(t, q)
    q_sq_min = np.minimum(np.minimum(q[:-2] ** 2, q[1:-1] ** 2), q[2:] ** 2)
    dd_rhs = k * q_sq_min - c
    noise = _stencil_noise(t, q, rel_noise)
    mid_active = active[:-2] & active[1:-1] & active[2:]
    flag(mid_active & below(dd, dd_rhs, noise), f"d2{label}", dd, dd_rhs, times=t[1:-1])

    out.sort(key=lambda v: (v.t, v.label))
    return out

