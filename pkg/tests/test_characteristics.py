import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epblowup.characteristics import (
    BlowupEstimate,
    CharState,
    System,
    Termination,
    TrajectoryRecord,
    background_rhs,
    density_envelope,
    estimate_blowup_time,
    integrate_characteristic,
    integrate_riccati,
    monitor_inequalities,
    pressureless_rhs,
    riccati_closed_form,
    theta_envelope,
)
from epblowup.criteria import PhysParams, PointData, s1_check, s2_check
from epblowup.errors import (
    FitRejectedError,
    InsufficientDataError,
    InvalidInputError,
    SingularityError,
)

K1 = PhysParams(k=1.0)
BG = PhysParams(k=1.0, rho_bar=1.0)


def rk4_blowup_time(rho0, d0, k, rho_bar=0.0, dt=1e-6, cap=1e6):
    """Independent fixed-step RK4 for (rho, d); first time rho exceeds cap."""

    def f(r, d):
        return -r * d, -d * d - k * (r - rho_bar)

    r, d, t = rho0, d0, 0.0
    while r < cap:
        a1, b1 = f(r, d)
        a2, b2 = f(r + 0.5 * dt * a1, d + 0.5 * dt * b1)
        a3, b3 = f(r + 0.5 * dt * a2, d + 0.5 * dt * b2)
        a4, b4 = f(r + dt * a3, d + dt * b3)
        r += dt * (a1 + 2 * a2 + 2 * a3 + a4) / 6
        d += dt * (b1 + 2 * b2 + 2 * b3 + b4) / 6
        t += dt
    return t


def pressureless_pole(rho0, d0, k):
    # 1/rho = 1/rho0 + (d0/rho0) t - k t^2 / 2
    a, b, c = -k / 2, d0 / rho0, 1 / rho0
    return (-b - math.sqrt(b * b - 4 * a * c)) / (2 * a)


class TestRhs:
    def test_pressureless(self):
        assert pressureless_rhs(CharState(3.0, -2.0), K1) == (6.0, -7.0)
        assert pressureless_rhs(CharState(0.0, 0.0), K1) == (0.0, 0.0)
        assert pressureless_rhs(CharState(2.0, 0.0), PhysParams(k=0.0)) == (0.0, 0.0)
        assert pressureless_rhs(CharState(2.0, 0.0), K1) == (0.0, -2.0)

    def test_background(self):
        assert background_rhs(CharState(1.0, 0.0), BG) == (0.0, 0.0)
        assert background_rhs(CharState(2.0, -1.0), BG) == (2.0, -2.0)
        assert background_rhs(CharState(0.0, 0.0), BG) == (0.0, 1.0)

    def test_state_rejects_negative_density(self):
        with pytest.raises(InvalidInputError):
            CharState(-1.0, 0.0)


class TestIntegrateCharacteristic:
    def test_k_zero_exact(self):
        rec, est = integrate_characteristic("pressureless", CharState(1.0, -1.0), PhysParams(k=0.0), t_end=0.9)
        assert est is None and rec.terminated == Termination.reached_t_end
        exact = 1 / (1 - rec.t)
        assert np.max(np.abs(rec.rho / exact - 1)) <= 1e-8
        assert np.max(np.abs(rec.d / -exact - 1)) <= 1e-8

    def test_s1_example_against_oracles(self):
        rec, est = integrate_characteristic(
            "pressureless", CharState(3.0, -2.0), K1, t_end=5.0, t_star_bound=2.0
        )
        assert rec.terminated == Termination.blow_up
        assert est.method == "inverse_sqrt_fit"
        assert est.t_detect <= 2.0 and est.bound_satisfied
        assert est.t_detect == pytest.approx(pressureless_pole(3.0, -2.0, 1.0), abs=1e-6)
        assert est.t_detect == pytest.approx(rk4_blowup_time(3.0, -2.0, 1.0), abs=1e-4)

    def test_s2_example_against_closed_form(self):
        # q = 1/rho solves q'' = k rho_bar q - k: q = 1 - e^t / 2
        rec, est = integrate_characteristic("background", CharState(2.0, -1.0), BG, t_end=5.0)
        assert est.t_detect == pytest.approx(math.log(2.0), abs=1e-6)
        q = 1 - 0.5 * np.exp(rec.t)
        mask = rec.rho < 1e3  # nearer the pole a tiny time shift dominates
        assert np.max(np.abs(rec.rho[mask] * q[mask] - 1)) <= 1e-7

    def test_vacuum_rest(self):
        rec, est = integrate_characteristic("pressureless", CharState(0.0, 0.0), K1, t_end=3.0)
        assert est is None and rec.terminated == Termination.reached_t_end
        assert not rec.rho.any() and not rec.d.any()

    def test_expanding_branch_without_blowup(self):
        # rarefying start: the trajectory stays bounded over the horizon
        rec, est = integrate_characteristic("pressureless", CharState(0.01, 5.0), K1, t_end=2.0)
        assert est is None
        assert rec.rho[-1] < rec.rho[0]

    def test_bad_interval(self):
        with pytest.raises(InvalidInputError):
            integrate_characteristic("pressureless", CharState(1.0, 0.0, t=1.0), K1, t_end=1.0)

    def test_record_csv(self):
        rec, _ = integrate_characteristic("background", CharState(1.0, 0.0), BG, t_end=0.1)
        lines = rec.to_csv().splitlines()
        assert lines[0] == "t,rho,d,theta"
        assert lines[1].split(",")[3] == "0.5"
        rec0, _ = integrate_characteristic("pressureless", CharState(1.0, 0.0), K1, t_end=0.1)
        assert rec0.to_csv().splitlines()[1].endswith(",")

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.2, 5.0), st.floats(0.0, 3.0))
    def test_s1_envelope_and_bound(self, rho0, extra):
        params = K1
        d0 = -math.sqrt(2 * rho0 / 3) - extra
        rep = s1_check(PointData(rho0=rho0, div_v0=d0), params)
        assert rep.member
        rec, est = integrate_characteristic("pressureless", CharState(rho0, d0), params, t_end=20.0)
        assert est.t_detect <= rep.t_star * (1 + 1e-4)
        env = np.array([density_envelope(rho0, 1.0, t) for t in rec.t])
        assert np.all(rec.rho >= env * (1 - 1e-6))
        assert np.all(rec.d <= 0)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(1.8, 5.0), st.floats(0.0, 3.0))
    def test_s2_envelope_and_bound(self, rho0, extra):
        rb = 1.0
        th = rho0 - rb / 2
        thr = max(th * (4 * th * th - 3) / (6 * rho0**2), 3 / (4 * rho0**2 * th))
        d0 = -math.sqrt(thr) * 1.001 - extra
        rep = s2_check(PointData(rho0=rho0, div_v0=d0), BG)
        assert rep.member
        rec, est = integrate_characteristic("background", CharState(rho0, d0), BG, t_end=20.0)
        assert est.t_detect <= rep.t_star * (1 + 1e-4)
        assert est.t_detect < rep.window
        env = np.array([theta_envelope(th, 1.0, t) for t in rec.t])
        assert np.all(rec.theta >= env * (1 - 1e-6))


class TestRiccati:
    def test_closed_form_values(self):
        assert riccati_closed_form(0.0, 3.0) == 0.0
        assert riccati_closed_form(-0.5, 1.0) == -1.0
        assert riccati_closed_form(1.0, 1.0) == 0.5
        with pytest.raises(SingularityError):
            riccati_closed_form(-1.0, 1.0)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-3.0, -0.05))
    def test_integrator_consistency(self, lam0):
        t_end = 0.9 * (-1 / lam0)
        t, lam = integrate_riccati(lam0, t_end)
        exact = lam0 / (1 + lam0 * t)
        assert np.max(np.abs(lam - exact)) <= 1e-8 * max(1.0, np.max(np.abs(exact)))


class TestEnvelopes:
    def test_density(self):
        assert density_envelope(3.0, 1.0, 0.0) == 3.0
        assert density_envelope(3.0, 1.0, 1.0) == pytest.approx(12.0)
        with pytest.raises(SingularityError):
            density_envelope(3.0, 1.0, 2.0)

    def test_theta(self):
        assert theta_envelope(1.5, 1.0, 0.0) == 1.5
        assert theta_envelope(12.0, 1.0, 0.5) == pytest.approx(48.0)
        with pytest.raises(SingularityError):
            theta_envelope(1.5, 1.0, math.sqrt(8))


class TestEstimateBlowupTime:
    def test_inverse_sqrt(self):
        t = np.linspace(1.0, 1.9, 40)
        est = estimate_blowup_time(np.column_stack([t, 3 / (1 - t / 2) ** 2]), "inverse_sqrt_fit")
        assert est.t_detect == pytest.approx(2.0, abs=1e-3)
        assert est.t_detect > t[-1]

    def test_inverse(self):
        t = np.linspace(0.0, 0.95, 40)
        est = estimate_blowup_time(np.column_stack([t, 1 / (1 - t)]), "inverse_fit")
        assert est.t_detect == pytest.approx(1.0, abs=1e-3)

    def test_constant_rejected(self):
        t = np.linspace(0, 1, 30)
        with pytest.raises(FitRejectedError):
            estimate_blowup_time(np.column_stack([t, np.ones_like(t)]))

    def test_too_few(self):
        with pytest.raises(InsufficientDataError):
            estimate_blowup_time([[0, 1], [1, 2], [2, 3]])

    @given(st.floats(0.5, 5.0), st.floats(0.1, 10.0))
    def test_synthetic_poles(self, t_star, amp):
        t = np.linspace(0, 0.98 * t_star, 60)
        est = estimate_blowup_time(np.column_stack([t, amp / (t_star - t) ** 2]))
        assert est.t_detect == pytest.approx(t_star, rel=1e-6)

    def test_bound_invariant(self):
        est = BlowupEstimate(2.0 * (1 + 5e-7), "inverse_sqrt_fit").with_bound(2.0)
        assert est.bound_satisfied and est.t_star_bound == 2.0
        assert not BlowupEstimate(2.01, "threshold").with_bound(2.0).bound_satisfied
        assert BlowupEstimate(2.01, "threshold").with_bound(None).bound_satisfied is None


class TestMonitor:
    def test_s1_trajectory_clean(self):
        rec, _ = integrate_characteristic("pressureless", CharState(3.0, -2.0), K1, t_end=5.0)
        assert monitor_inequalities(rec, K1, "s1") == []

    def test_s2_trajectory_clean(self):
        rec, _ = integrate_characteristic("background", CharState(2.0, -1.0), BG, t_end=5.0)
        assert monitor_inequalities(rec, BG, "s2") == []

    def test_fabricated_decreasing_density(self):
        t = np.linspace(0, 1, 11)
        rho = np.full_like(t, 2.0)
        d = np.full_like(t, -1.0)
        d[6] = 0.5  # D rho/Dt = -rho d < 0 here
        rec = TrajectoryRecord(0.0, t, rho, d, Termination.reached_t_end)
        found = monitor_inequalities(rec, K1, "s1")
        hits = [v for v in found if v.label == "drho-nonneg"]
        assert len(hits) == 1 and hits[0].t == t[6]
        assert hits[0].lhs < hits[0].rhs

    def test_k_zero_squared_chain_trivial(self):
        params = PhysParams(k=0.0)
        rec, _ = integrate_characteristic("pressureless", CharState(1.0, -1.0), params, t_end=0.9)
        found = monitor_inequalities(rec, params, "s1")
        assert not [v for v in found if v.label == "drho-squared"]

    def test_insufficient_samples(self):
        rec = TrajectoryRecord(0.0, np.array([0.0, 1.0]), np.ones(2), -np.ones(2), Termination.reached_t_end)
        with pytest.raises(InsufficientDataError):
            monitor_inequalities(rec, K1, "s1")

    def test_unknown_regime(self):
        rec, _ = integrate_characteristic("pressureless", CharState(3.0, -2.0), K1, t_end=0.1)
        with pytest.raises(InvalidInputError):
            monitor_inequalities(rec, K1, "s3")


def test_system_enum():
    assert System("background") is System.background
