"""Membership tests for the three blow-up sets and their time bounds.

* S1 (pressureless, no background): zero vorticity and
  ``-div v0 >= sqrt(2 k rho0 / 3) > 0``; blow-up no later than
  ``sqrt(12 / (k rho0))``.
* S2 (background density ``rho_bar``): zero vorticity, ``div v0 < 0``,
  ``rho0 >= (1/2 + sqrt(3/2)) rho_bar`` and ``(div v0)^2`` above the larger
  of two thresholds; blow-up no later than ``sqrt(12 / (k theta0))`` with
  ``theta0 = rho0 - rho_bar/2``. The lower-bound argument is only valid on
  ``t <= -4 rho0 div v0 / (k rho_bar^2)`` (the "window"), which the
  thresholds guarantee exceeds the blow-up bound.
* S3 (polytropic, ``gamma >= 2``): zero vorticity, vacuum to second order
  in density and flat entropy to second order, and a negative eigenvalue
  of the deformation tensor; ``lambda`` reaches ``-inf`` at ``-1/lambda0``.

Slack values in ``margins`` are ``lhs - rhs`` of each inequality, so a
condition holds iff its margin is >= 0 (> 0 for the strict ones).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import InvalidParametersError
from .fields import Grid1D, ScalarField, sample_field, spectral_derivative

if TYPE_CHECKING:
    from .solver import FlowState

DEFAULT_TOL = 1e-12
DENSITY_FLOOR_FACTOR = 0.5 + math.sqrt(1.5)


@dataclass(frozen=True)
class PhysParams:
    """Coupling ``k``, background density ``rho_bar`` and exponent ``gamma``.

    ``k = 0`` is accepted as a validation mode for the ODE integrators; the
    criterion checks require ``k > 0``.
    """

    k: float = 1.0
    rho_bar: float = 0.0
    gamma: float = 2.0

    def __post_init__(self):
        if not (self.k >= 0) or not math.isfinite(self.k):
            raise InvalidParametersError("k must be nonnegative and finite")
        if not (self.rho_bar >= 0) or not math.isfinite(self.rho_bar):
            raise InvalidParametersError("rho_bar must be nonnegative and finite")
        if not self.gamma > 1:
            raise InvalidParametersError("gamma must exceed 1")

    def require_attractive(self):
        if not self.k > 0:
            raise InvalidParametersError("k must be positive")


@dataclass(frozen=True)
class PointData:
    rho0: float
    div_v0: float
    omega0_norm: float = 0.0
    drho0_norm: float = 0.0
    d2rho0_norm: float = 0.0
    ds0_norm: float = 0.0
    d2s0_norm: float = 0.0
    lambda_min: float = 0.0

    def __post_init__(self):
        for name in ("rho0", "omega0_norm", "drho0_norm", "d2rho0_norm", "ds0_norm", "d2s0_norm"):
            if getattr(self, name) < 0:
                raise InvalidParametersError(f"{name} must be nonnegative")


@dataclass
class CriterionReport:
    theorem: str
    member: bool
    t_star: float | None
    margins: dict[str, float] = field(default_factory=dict)
    failed: list[str] = field(default_factory=list)
    window: float | None = None

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "member": self.member,
            "t_star": self.t_star,
            "margins": dict(self.margins),
            "failed": list(self.failed),
            "window": self.window,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriterionReport":
        return cls(
            theorem=d["theorem"],
            member=d["member"],
            t_star=d["t_star"],
            margins=dict(d["margins"]),
            failed=list(d["failed"]),
            window=d.get("window"),
        )


def _report(theorem: str, margins: dict[str, float], strict: set[str]) -> tuple[bool, list[str]]:
    failed = []
    for label, slack in margins.items():
        ok = slack > 0 if label in strict else slack >= 0
        if not ok:
            failed.append(label)
    return not failed, failed


def s1_check(p: PointData, params: PhysParams, tol: float = DEFAULT_TOL) -> CriterionReport:
    params.require_attractive()
    k, rho0 = params.k, p.rho0
    margins = {
        "vorticity": tol - p.omega0_norm,
        "density-positive": rho0,
        "divergence-threshold": -p.div_v0 - math.sqrt(2.0 * k * rho0 / 3.0),
    }
    member, failed = _report("S1", margins, strict={"density-positive"})
    t_star = math.sqrt(12.0 / (k * rho0)) if member else None
    return CriterionReport("S1", member, t_star, margins, failed)


def s2_thresholds(rho0: float, rho_bar: float, k: float) -> tuple[float, float]:
    """The two lower bounds on ``(div v0)^2`` for membership in S2.

    Returns ``inf`` for a bound that is undefined (``rho0 <= rho_bar/2``).
    """
    theta0 = rho0 - 0.5 * rho_bar
    if rho0 <= 0 or theta0 <= 0:
        return math.inf, math.inf
    cubic = k * theta0 * (4.0 * theta0**2 - 3.0 * rho_bar**2) / (6.0 * rho0**2)
    window = 3.0 * k * rho_bar**4 / (4.0 * rho0**2 * theta0)
    return cubic, window


def s2_check(p: PointData, params: PhysParams, tol: float = DEFAULT_TOL) -> CriterionReport:
    params.require_attractive()
    if not params.rho_bar > 0:
        raise InvalidParametersError("s2_check needs rho_bar > 0; use s1_check instead")
    k, rb, rho0, d0 = params.k, params.rho_bar, p.rho0, p.div_v0
    threshold = max(s2_thresholds(rho0, rb, k))
    margins = {
        "vorticity": tol - p.omega0_norm,
        "divergence-sign": -d0,
        "density-floor": rho0 - DENSITY_FLOOR_FACTOR * rb,
        "divergence-threshold": d0 * d0 - threshold,
    }
    member, failed = _report(
        "S2", margins, strict={"divergence-sign", "divergence-threshold"}
    )
    if not member:
        return CriterionReport("S2", False, None, margins, failed)
    theta0 = rho0 - 0.5 * rb
    t_star = math.sqrt(12.0 / (k * theta0))
    window = -4.0 * rho0 * d0 / (k * rb * rb)
    assert window > t_star, "S2 member with window <= t_star"
    return CriterionReport("S2", True, t_star, margins, failed, window=window)


def s3_check(p: PointData, params: PhysParams, tol: float = DEFAULT_TOL) -> CriterionReport:
    if params.gamma < 2:
        raise InvalidParametersError("the polytropic criterion requires gamma >= 2")
    margins = {
        "vorticity": tol - p.omega0_norm,
        "vacuum": tol - p.rho0,
        "density-gradient": tol - p.drho0_norm,
        "density-hessian": tol - p.d2rho0_norm,
        "entropy-gradient": tol - p.ds0_norm,
        "entropy-hessian": tol - p.d2s0_norm,
        "negative-eigenvalue": -p.lambda_min,
    }
    member, failed = _report("S3", margins, strict={"negative-eigenvalue"})
    t_star = -1.0 / p.lambda_min if member else None
    return CriterionReport("S3", member, t_star, margins, failed)


def check(theorem: str, p: PointData, params: PhysParams, tol: float = DEFAULT_TOL) -> CriterionReport:
    checkers = {"s1": s1_check, "s2": s2_check, "s3": s3_check}
    try:
        fn = checkers[theorem.lower()]
    except KeyError:
        raise InvalidParametersError(f"unknown criterion {theorem!r}") from None
    return fn(p, params, tol)


def _derivative_at(f: ScalarField, order: int, a: float) -> float:
    return sample_field(spectral_derivative(f, order), a)


def extract_point_data(state: "FlowState", grid: Grid1D, a: float) -> PointData:
    """Evaluate the seed-point data of a 1D state at position ``a``.

    In one dimension the vorticity vanishes identically and the only
    deformation eigenvalue is ``v_x``.
    """
    rho, v, S = state.rho, state.v, state.S
    if rho.grid != grid:
        raise InvalidParametersError("state lives on a different grid")
    rho0 = sample_field(rho, a)
    div_v0 = _derivative_at(v, 1, a)
    drho = abs(_derivative_at(rho, 1, a))
    d2rho = abs(_derivative_at(rho, 2, a))
    if S is not None:
        ds = abs(_derivative_at(S, 1, a))
        d2s = abs(_derivative_at(S, 2, a))
    else:
        ds = d2s = 0.0
    return PointData(
        rho0=abs(rho0),  # tiny negative values are round-off around vacuum
        div_v0=div_v0,
        omega0_norm=0.0,
        drho0_norm=drho,
        d2rho0_norm=d2rho,
        ds0_norm=ds,
        d2s0_norm=d2s,
        lambda_min=div_v0,
    )


def point_data_tolerance(state: "FlowState") -> float:
    """Criterion tolerance for point data taken from gridded fields.

    Round-off in a second derivative of grid data is about
    ``eps * max|f| * k_max^2`` (spectral) or ``eps * max|f| / h^2`` (finite
    differences); the tolerance is a fixed multiple of that, never below
    ``DEFAULT_TOL``.
    """
    grid = state.grid
    scale = max(1.0, float(np.max(np.abs(state.rho.values))))
    if state.S is not None:
        scale = max(scale, float(np.max(np.abs(state.S.values))))
    k_max = math.pi / grid.h
    return max(DEFAULT_TOL, 16.0 * np.finfo(float).eps * scale * k_max**2)


def seed_of_min_divergence(v: ScalarField) -> float:
    """Node position where ``v_x`` is most negative."""
    vx = spectral_derivative(v, 1).values
    return float(v.grid.x[int(np.argmin(vx))])
