import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epblowup.errors import DomainRangeError, DomainTooSmallError, InvalidInputError
from epblowup.fields import (
    Grid1D,
    ScalarField,
    poisson_freespace,
    poisson_periodic,
    sample_field,
    solve_poisson,
    spectral_derivative,
)

TWO_PI = 2 * math.pi


def periodic(n=64):
    return Grid1D(0.0, TWO_PI, n)


class TestGrid:
    def test_nodes(self):
        g = Grid1D(-1.0, 1.0, 8, periodic=False)
        assert g.h == 0.25
        assert g.x[0] == -1.0 and g.x[-1] == pytest.approx(0.75)

    @pytest.mark.parametrize("args", [(1.0, 0.0, 8), (0.0, 1.0, 4), (0.0, 1.0, 8.5)])
    def test_invalid(self, args):
        with pytest.raises(InvalidInputError):
            Grid1D(*args)

    def test_field_validation(self):
        g = periodic(16)
        with pytest.raises(InvalidInputError):
            ScalarField(np.zeros(15), g)
        with pytest.raises(InvalidInputError):
            ScalarField(np.full(16, np.nan), g)


class TestPoissonPeriodic:
    def test_single_mode(self):
        g = periodic(64)
        sol = poisson_periodic(ScalarField(np.cos(g.x), g))
        assert np.max(np.abs(sol.phi.values + np.cos(g.x))) <= 1e-12
        assert np.max(np.abs(sol.grad_phi.values - np.sin(g.x))) <= 1e-12
        assert np.max(np.abs(sol.hessian.values - np.cos(g.x))) <= 1e-12

    def test_constant_source(self):
        g = periodic(32)
        sol = poisson_periodic(ScalarField(np.full(32, 3.0), g))
        assert np.max(np.abs(sol.phi.values)) <= 1e-14

    def test_two_modes(self):
        g = periodic(64)
        sol = poisson_periodic(ScalarField(np.cos(g.x) + np.cos(2 * g.x), g))
        exact = -np.cos(g.x) - np.cos(2 * g.x) / 4
        assert np.max(np.abs(sol.phi.values - exact)) <= 1e-12
        assert abs(np.mean(sol.phi.values)) <= 1e-14

    def test_requires_periodic(self):
        g = Grid1D(0.0, 1.0, 16, periodic=False)
        with pytest.raises(InvalidInputError):
            poisson_periodic(ScalarField(np.zeros(16), g))

    def test_second_derivative_recovers_source(self):
        g = periodic(128)
        src = np.exp(np.sin(g.x))
        sol = solve_poisson(ScalarField(src, g))
        back = spectral_derivative(sol.phi, 2).values
        assert np.max(np.abs(back - (src - src.mean()))) <= 1e-10


class TestPoissonFreeSpace:
    def indicator(self, n=400):
        g = Grid1D(-10.0, 10.0, n, periodic=False)
        x = g.x
        src = np.where(np.abs(x) < 1 - 1e-9, 1.0, 0.0)
        src[np.isclose(np.abs(x), 1.0, atol=1e-9)] = 0.5  # trapezoid-exact jumps
        return g, ScalarField(src, g)

    def test_indicator_hand_quadrature(self):
        g, src = self.indicator()
        sol = poisson_freespace(src)
        # phi_x = (mass left - mass right) / 2 = clip(x, -1, 1); at the two
        # jump nodes the trapezoid rule is off by h/4
        off_jump = ~np.isclose(np.abs(g.x), 1.0, atol=1e-9)
        err = np.abs(sol.grad_phi.values - np.clip(g.x, -1, 1))
        assert np.max(err[off_jump]) <= 1e-10
        assert np.allclose(err[~off_jump], g.h / 4, rtol=0, atol=1e-12)
        i0 = int(np.argmin(np.abs(g.x)))
        assert abs(sol.grad_phi.values[i0]) <= 1e-12
        assert np.all(np.abs(sol.grad_phi.values[g.x >= 1 + 1e-9] - 1) <= 1e-10)
        assert np.array_equal(sol.hessian.values, src.values)
        assert sol.phi.values[0] == 0.0

    def test_zero_source(self):
        g = Grid1D(-1.0, 1.0, 32, periodic=False)
        sol = poisson_freespace(ScalarField(np.zeros(32), g))
        assert not sol.grad_phi.values.any()

    def test_symmetric_source_has_no_net_force(self):
        g = Grid1D(-8.0, 8.0, 513, periodic=False)
        src = ScalarField(np.exp(-g.x**2) * (1 + 0.5 * g.x**2), g)
        sol = poisson_freespace(src)
        # the grid is symmetric about 0 only up to the missing right node
        assert abs(np.sum(sol.grad_phi.values * src.values) * g.h) <= 1e-10

    def test_source_must_decay(self):
        g = Grid1D(-1.0, 1.0, 32, periodic=False)
        with pytest.raises(DomainTooSmallError):
            poisson_freespace(ScalarField(np.ones(32), g))

    def test_requires_free_space(self):
        with pytest.raises(InvalidInputError):
            poisson_freespace(ScalarField(np.zeros(16), periodic(16)))


class TestDerivatives:
    def test_sine(self):
        g = periodic(64)
        f = ScalarField(np.sin(g.x), g)
        assert np.max(np.abs(spectral_derivative(f, 1).values - np.cos(g.x))) <= 1e-12
        assert np.max(np.abs(spectral_derivative(f, 3).values + np.cos(g.x))) <= 1e-10

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_constant(self, order):
        g = periodic(32)
        assert np.max(np.abs(spectral_derivative(ScalarField(np.full(32, 2.0), g), order).values)) <= 1e-13

    def test_bad_order(self):
        with pytest.raises(InvalidInputError):
            spectral_derivative(ScalarField(np.zeros(16), periodic(16)), 4)

    def test_finite_differences_on_line(self):
        g = Grid1D(0.0, 1.0, 100, periodic=False)
        f = ScalarField(g.x**2, g)
        assert np.allclose(spectral_derivative(f, 1).values, 2 * g.x, atol=1e-12)

    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(1, 3))
    def test_linearity(self, a, b, order):
        g = periodic(64)
        f = ScalarField(np.sin(3 * g.x), g)
        h = ScalarField(np.exp(np.cos(g.x)), g)
        lhs = spectral_derivative(ScalarField(a * f.values + b * h.values, g), order).values
        rhs = a * spectral_derivative(f, order).values + b * spectral_derivative(h, order).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-11 * (1 + abs(a) + abs(b))


class TestSampling:
    def test_node_exact(self):
        g = periodic(32)
        f = ScalarField(np.cos(g.x), g)
        assert sample_field(f, g.x[5]) == f.values[5]

    @given(st.floats(0.0, 0.96))
    def test_linear_exact_on_line(self, x):
        g = Grid1D(0.0, 1.0, 25, periodic=False)
        f = ScalarField(3 * g.x - 1, g)
        assert sample_field(f, x) == pytest.approx(3 * x - 1, abs=1e-13)

    def test_sine_accuracy(self):
        g = periodic(256)
        f = ScalarField(np.sin(g.x), g)
        assert abs(sample_field(f, 0.3) - math.sin(0.3)) <= 1e-8

    def test_periodic_wrap(self):
        g = periodic(256)
        f = ScalarField(np.sin(g.x), g)
        assert sample_field(f, 0.3 + TWO_PI) == pytest.approx(sample_field(f, 0.3), abs=1e-14)
        assert sample_field(f, -0.3) == pytest.approx(math.sin(-0.3), abs=1e-8)

    def test_outside_line(self):
        g = Grid1D(0.0, 1.0, 16, periodic=False)
        with pytest.raises(DomainRangeError):
            sample_field(ScalarField(np.zeros(16), g), 1.5)

    def test_vectorized(self):
        g = periodic(64)
        out = sample_field(ScalarField(np.sin(g.x), g), np.array([0.1, 0.2]))
        assert out.shape == (2,)
