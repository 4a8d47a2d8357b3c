"""Adaptive Dormand-Prince 5(4) integrator with step-size control.

The fifth-order solution is propagated (local extrapolation); the
embedded fourth-order solution supplies the error estimate. Steps are
accepted when every component satisfies

    |err_i| <= abs_tol + rel_tol * max(|y_i|, |y_new_i|)

Integration stops at ``t_end``, when a user ``stop`` predicate fires on an
accepted state, or when the controller asks for a step below ``dt_min``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError

# Dormand & Prince (1980), RK5(4)7M
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step limits for adaptive integration.

    ``rho_cap`` is the density at which a characteristic run is declared
    to have blown up. ``max_step`` caps accepted steps (useful when a
    trajectory is later interpolated).
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    dt_init: float = 1e-3
    dt_min: float = 1e-14
    rho_cap: float = 1e8
    max_step: float = math.inf
    max_steps: int = 1_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "dt_init", "dt_min", "rho_cap", "max_step"):
            value = getattr(self, name)
            if not (value > 0) or math.isnan(value):
                raise InvalidInputError(f"{name} must be positive, got {value!r}")
        if not self.dt_min < self.dt_init:
            raise InvalidInputError("dt_min must be smaller than dt_init")
        if self.max_steps < 1:
            raise InvalidInputError("max_steps must be at least 1")


@dataclass
class OdeSolution:
    t: np.ndarray
    y: np.ndarray  # shape (n_samples, n_components)
    status: str  # "reached_t_end" | "stopped" | "step_underflow" | "max_steps"
    n_rejected: int = 0


def dopri5(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    cfg: IntegratorConfig,
    stop: Callable[[float, np.ndarray], bool] | None = None,
    admissible: Callable[[np.ndarray], bool] | None = None,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> OdeSolution:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end``.

    ``admissible`` may veto a trial state (e.g. negative density); a vetoed
    step is treated like an error-test failure. ``project`` maps each
    accepted state back onto a constraint manifold before it is stored.
    Every accepted state is recorded, so the returned samples are the
    accepted step endpoints.
    """
    if not t_end > t0:
        raise InvalidInputError("t_end must exceed the initial time")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("initial state must be finite")

    ts = [float(t0)]
    ys = [y.copy()]
    t = float(t0)
    h = min(cfg.dt_init, cfg.max_step, t_end - t0)
    k = np.empty((7, y.size))
    k[0] = rhs(t, y)
    n_rejected = 0
    status = "reached_t_end"

    for _ in range(cfg.max_steps):
        if t >= t_end:
            break
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True

        for s in range(1, 7):
            ys_stage = y + h * (np.asarray(_A[s]) @ k[:s])
            k[s] = rhs(t + _C[s] * h, ys_stage)
        y_new = ys_stage  # stage 7 abscissa equals the 5th-order solution (FSAL)
        err_vec = h * (_E @ k)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore", over="ignore"):
            err = float(np.max(np.abs(err_vec) / scale))

        ok = math.isfinite(err) and np.all(np.isfinite(y_new))
        if ok and admissible is not None and not admissible(y_new):
            ok = False
            err = 4.0

        if ok and err <= 1.0:
            t = t_end if last else t + h
            if project is None:
                y = y_new
                k[0] = k[6]
            else:
                y = project(y_new)
                k[0] = rhs(t, y)
            ts.append(t)
            ys.append(y.copy())
            if stop is not None and stop(t, y):
                status = "stopped"
                break
            fac = _FAC_MAX if err == 0.0 else min(_FAC_MAX, max(_FAC_MIN, _SAFETY * err ** -0.2))
            h = min(h * fac, cfg.max_step)
            if not last and h < cfg.dt_min:
                status = "step_underflow"
                break
        else:
            n_rejected += 1
            fac = _FAC_MIN if not math.isfinite(err) else max(_FAC_MIN, _SAFETY * err ** -0.2)
            h = h * fac
            if h < cfg.dt_min:
                status = "step_underflow"
                break
    else:
        if t < t_end:
            status = "max_steps"

    return OdeSolution(np.array(ts), np.array(ys), status, n_rejected)
