"""Finite-time blow-up laboratory for 1D Euler-Poisson and polytropic Euler flows."""

from .characteristics import (
    BlowupEstimate,
    CharState,
    System,
    TrajectoryRecord,
    density_envelope,
    estimate_blowup_time,
    integrate_characteristic,
    integrate_riccati,
    monitor_inequalities,
    riccati_closed_form,
    theta_envelope,
)
from .config import ExperimentConfig, parse_config
from .criteria import CriterionReport, PhysParams, PointData, check, extract_point_data
from .fields import Grid1D, ScalarField, poisson_freespace, poisson_periodic, sample_field
from .integrators import IntegratorConfig
from .kinematics import (
    GradientDecomposition,
    MatrixPath,
    decompose_gradient,
    deformation_eigenpairs,
    gronwall_vorticity_envelope,
    integrate_vorticity_ode,
)
from .report import RunSummary, emit_report
from .runner import run_scenario
from .solver import FlowState, SolverConfig, cross_validate, ep_step, polytropic_step, run_simulation

__all__ = [
    "BlowupEstimate", "CharState", "CriterionReport", "ExperimentConfig", "FlowState",
    "GradientDecomposition", "Grid1D", "IntegratorConfig", "MatrixPath", "PhysParams",
    "PointData", "RunSummary", "ScalarField", "SolverConfig", "System", "TrajectoryRecord",
    "check", "cross_validate", "decompose_gradient", "deformation_eigenpairs",
    "density_envelope", "emit_report", "ep_step", "estimate_blowup_time",
    "extract_point_data", "gronwall_vorticity_envelope", "integrate_characteristic",
    "integrate_riccati", "integrate_vorticity_ode", "monitor_inequalities", "parse_config",
    "poisson_freespace", "poisson_periodic", "polytropic_step", "riccati_closed_form",
    "run_scenario", "run_simulation", "sample_field", "theta_envelope",
]
