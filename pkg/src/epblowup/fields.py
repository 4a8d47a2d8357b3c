"""1D grids, node-collocated fields, derivatives and Poisson solvers.

Two domains are supported: the periodic interval (Fourier methods) and a
finite window of the free line on which sources must be compactly
supported. On the line the potential uses the symmetric fundamental
solution ``phi = 1/2 int |x - y| source(y) dy``, i.e.

    phi_x(x) = 1/2 * (mass left of x - mass right of x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainRangeError, DomainTooSmallError, InvalidInputError


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_cells: int
    periodic: bool = True

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise InvalidInputError("x_max must exceed x_min")
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise InvalidInputError("n_cells must be an integer >= 8")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n_cells)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the real FFT modes."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_cells, d=self.h)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.periodic:
            return np.isfinite(x)
        last = self.x_min + (self.n_cells - 1) * self.h
        tol = 1e-12 * self.length
        return (x >= self.x_min - tol) & (x <= last + tol)

    def wrap(self, x):
        """Map positions into ``[x_min, x_max)`` on periodic grids."""
        if not self.periodic:
            return x
        return self.x_min + np.mod(np.asarray(x, dtype=float) - self.x_min, self.length)


@dataclass(frozen=True)
class ScalarField:
    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise InvalidInputError(
                f"field has shape {values.shape}, grid expects ({self.grid.n_cells},)"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("field has non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func, grid: Grid1D) -> "ScalarField":
        return cls(np.broadcast_to(func(grid.x), (grid.n_cells,)).astype(float), grid)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class PoissonSolution:
    phi: ScalarField
    grad_phi: ScalarField
    hessian: ScalarField


def spectral_diff(values: np.ndarray, grid: Grid1D, order: int) -> np.ndarray:
    """Array-level Fourier derivative on a periodic grid."""
    n = grid.n_cells
    f_hat = np.fft.rfft(values)
    ik = 1j * grid.wavenumbers
    d_hat = f_hat * ik**order
    if order % 2 == 1 and n % 2 == 0:
        d_hat[-1] = 0.0
    return np.fft.irfft(d_hat, n=n)


def fd_diff(values: np.ndarray, grid: Grid1D, order: int) -> np.ndarray:
    """Second-order finite differences, centered inside, one-sided at edges."""
    out = np.asarray(values, dtype=float)
    for _ in range(order):
        if grid.periodic:
            out = (np.roll(out, -1) - np.roll(out, 1)) / (2.0 * grid.h)
        else:
            out = np.gradient(out, grid.h, edge_order=2)
    return out


def spectral_derivative(f: ScalarField, order: int) -> ScalarField:
    """Derivative of order 1, 2 or 3.

    Spectral on periodic grids; repeated second-order finite differences
    otherwise.
    """
    if order not in (1, 2, 3):
        raise InvalidInputError(f"derivative order must be 1, 2 or 3, got {order!r}")
    if f.grid.periodic:
        return ScalarField(spectral_diff(f.values, f.grid, order), f.grid)
    return ScalarField(fd_diff(f.values, f.grid, order), f.grid)


def poisson_periodic(source: ScalarField) -> PoissonSolution:
    """Solve phi'' = source - mean(source) with mean(phi) = 0."""
    grid = source.grid
    if not grid.periodic:
        raise InvalidInputError("poisson_periodic requires a periodic grid")
    n = grid.n_cells
    k = grid.wavenumbers
    s_hat = np.fft.rfft(source.values - np.mean(source.values))
    s_hat[0] = 0.0
    phi_hat = np.zeros_like(s_hat)
    phi_hat[1:] = -s_hat[1:] / k[1:] ** 2
    grad_hat = 1j * k * phi_hat
    if n % 2 == 0:
        grad_hat[-1] = 0.0
    return PoissonSolution(
        phi=ScalarField(np.fft.irfft(phi_hat, n=n), grid),
        grad_phi=ScalarField(np.fft.irfft(grad_hat, n=n), grid),
        hessian=ScalarField(np.fft.irfft(s_hat, n=n), grid),
    )


def _cumtrapz(values: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * h * (values[1:] + values[:-1]), out=out[1:])
    return out


def poisson_freespace(source: ScalarField) -> PoissonSolution:
    """Solve phi'' = source on the line with the symmetric gauge.

    The gauge constant of phi itself is phi(x_min) = 0.
    """
    grid = source.grid
    if grid.periodic:
        raise InvalidInputError("poisson_freespace requires a non-periodic grid")
    s = source.values
    peak = float(np.max(np.abs(s)))
    if max(abs(s[0]), abs(s[-1])) > 1e-12 * peak:
        raise DomainTooSmallError("source does not vanish at the grid boundary")
    left = _cumtrapz(s, grid.h)
    grad = left - 0.5 * left[-1]
    phi = _cumtrapz(grad, grid.h)
    return PoissonSolution(
        phi=ScalarField(phi, grid),
        grad_phi=ScalarField(grad, grid),
        hessian=ScalarField(s.copy(), grid),
    )


def solve_poisson(source: ScalarField) -> PoissonSolution:
    if source.grid.periodic:
        return poisson_periodic(source)
    return poisson_freespace(source)


def sample_values(values: np.ndarray, grid: Grid1D, x) -> np.ndarray:
    """Cubic Lagrange interpolation through the four nearest nodes."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(grid.contains(x)):
        raise DomainRangeError("sample position outside the grid domain")
    n = grid.n_cells
    s = (grid.wrap(x) - grid.x_min) / grid.h
    i = np.floor(s).astype(int)
    if grid.periodic:
        start = i - 1
    else:
        start = np.clip(i - 1, 0, n - 4)
    u = s - start  # local coordinate, stencil nodes at 0, 1, 2, 3
    idx = start[:, None] + np.arange(4)[None, :]
    if grid.periodic:
        idx %= n
    f = values[idx]
    w0 = -(u - 1) * (u - 2) * (u - 3) / 6.0
    w1 = u * (u - 2) * (u - 3) / 2.0
    w2 = -u * (u - 1) * (u - 3) / 2.0
    w3 = u * (u - 1) * (u - 2) / 6.0
    return w0 * f[:, 0] + w1 * f[:, 1] + w2 * f[:, 2] + w3 * f[:, 3]


def sample_field(f: ScalarField, x):
    """Value of ``f`` at ``x`` (scalar in, scalar out; arrays vectorize)."""
    out = sample_values(f.values, f.grid, x)
    return float(out[0]) if np.ndim(x) == 0 else out
