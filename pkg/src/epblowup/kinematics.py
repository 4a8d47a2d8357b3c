"""Velocity-gradient algebra and the vorticity transport equation.

Conventions: ``V[i, j] = d_i v^j``. The deformation tensor is the
symmetric part ``D = (V + V^T)/2``, the antisymmetric part is
``A = (V - V^T)/2`` and the vorticity matrix is ``Omega = 2A``.
Along a particle path the antisymmetric part obeys

    dA/dt = -(D A + A D)

so ``A0 = 0`` stays zero, and ``|A(t)| <= |A0| exp(2 int_0^t |D|)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import DomainRangeError, InvalidInputError
from .integrators import IntegratorConfig, dopri5

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class GradientDecomposition:
    V: np.ndarray
    D: np.ndarray
    A: np.ndarray
    Omega: np.ndarray

    @property
    def divergence(self) -> float:
        return float(np.trace(self.D))


@dataclass(frozen=True)
class EigenPair:
    lam: float
    e: np.ndarray


@dataclass(frozen=True)
class MatrixPath:
    """Time-sampled matrices, e.g. D(X(a,t), t) along a trajectory."""

    times: np.ndarray
    matrices: np.ndarray  # shape (n_samples, n, n)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        mats = np.asarray(self.matrices, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise InvalidInputError("times must be a non-empty 1-D sequence")
        if mats.ndim != 3 or mats.shape[0] != times.size or mats.shape[1] != mats.shape[2]:
            raise InvalidInputError("matrices must have shape (len(times), n, n)")
        if np.any(np.diff(times) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "matrices", mats)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def at(self, t: float) -> np.ndarray:
        """Linearly interpolated matrix at time ``t``."""
        self._check_time(t)
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        if i >= self.times.size - 1:
            return self.matrices[-1].copy()
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.matrices[i] + w * self.matrices[i + 1]

    def _check_time(self, t: float):
        if not self.times[0] <= t <= self.times[-1]:
            raise DomainRangeError(
                f"t={t!r} outside path range [{self.times[0]}, {self.times[-1]}]"
            )


def _as_square(M, name="matrix") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M


def decompose_gradient(V) -> GradientDecomposition:
    V = _as_square(V, "velocity gradient")
    D = 0.5 * (V + V.T)
    A = 0.5 * (V - V.T)
    return GradientDecomposition(V=V.copy(), D=D, A=A, Omega=V - V.T)


def frobenius_norm(M) -> float:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    return float(np.sqrt(np.sum(M * M)))


def deformation_eigenpairs(D) -> list[EigenPair]:
    """Eigenpairs of a symmetric matrix, ascending, with a fixed sign rule.

    Each eigenvector is flipped so that its first component that is not
    negligibly small is positive.
    """
    D = _as_square(D, "deformation tensor")
    scale = 1.0 + frobenius_norm(D)
    if frobenius_norm(D - D.T) > SYMMETRY_TOL * scale:
        raise InvalidInputError("deformation tensor is not symmetric")
    lam, vecs = np.linalg.eigh(0.5 * (D + D.T))
    pairs = []
    for j in range(lam.size):
        e = vecs[:, j]
        nz = np.flatnonzero(np.abs(e) > 1e-12)
        if nz.size and e[nz[0]] < 0:
            e = -e
        pairs.append(EigenPair(lam=float(lam[j]), e=e / np.linalg.norm(e)))
    return pairs


def _antisym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M - M.T)


def _vorticity_rhs(t, y, D_path, n):
    A = y.reshape(n, n)
    D = D_path.at(t)
    return -(D @ A + A @ D).ravel()


def _project_antisym(y, n):
    return _antisym(y.reshape(n, n)).ravel()


def integrate_vorticity_ode(
    D_path: MatrixPath, A0, t_end: float, cfg: IntegratorConfig | None = None
) -> MatrixPath:
    """Integrate dA/dt = -(DA + AD) with D taken from ``D_path``.

    The path is integrated segment by segment between its sample times so
    the linearly interpolated D is smooth within every call of the
    integrator. A is re-antisymmetrized after each accepted step.
    """
    cfg = cfg or IntegratorConfig()
    n = D_path.dim
    A0 = _as_square(A0, "A0")
    if A0.shape != (n, n):
        raise InvalidInputError("A0 and D_path have different dimensions")
    if frobenius_norm(A0 + A0.T) > SYMMETRY_TOL * (1.0 + frobenius_norm(A0)):
        raise InvalidInputError("A0 is not antisymmetric")
    t0 = D_path.times[0]
    if not t0 < t_end <= D_path.times[-1]:
        raise DomainRangeError(f"t_end={t_end!r} outside path range")

    A = _antisym(A0)
    times = [t0]
    mats = [A.copy()]
    if not np.any(A):
        # zero is a fixed point of the linear transport equation
        knots = D_path.times[D_path.times <= t_end]
        knots = np.unique(np.append(knots, t_end))
        return MatrixPath(knots, np.zeros((knots.size, n, n)))

    knots = np.unique(np.append(D_path.times[D_path.times < t_end], t_end))
    rhs = partial(_vorticity_rhs, D_path=D_path, n=n)
    project = partial(_project_antisym, n=n)
    for a, b in zip(knots[:-1], knots[1:]):
        sol = dopri5(rhs, a, A.ravel(), b, cfg, project=project)
        if sol.status != "reached_t_end":
            raise InvalidInputError(f"vorticity integration failed ({sol.status})")
        for t, y in zip(sol.t[1:], sol.y[1:]):
            times.append(t)
            mats.append(y.reshape(n, n))
        A = mats[-1]
    return MatrixPath(np.array(times), np.array(mats))


def gronwall_vorticity_envelope(A0_norm: float, D_path: MatrixPath, t: float) -> float:
    """|A0| * exp(2 * int_0^t |D|) with the integral by the trapezoid rule.

    For ``t`` between samples the last partial panel uses the linearly
    interpolated D at ``t``. Since ``|D(tau)|`` is convex on each panel the
    trapezoid rule over-estimates the exact integral, keeping the envelope an
    upper bound.
    """
    if A0_norm < 0:
        raise InvalidInputError("A0_norm must be nonnegative")
    D_path._check_time(t)
    if A0_norm == 0.0:
        return 0.0
    ts = D_path.times
    norms = np.sqrt(np.sum(D_path.matrices**2, axis=(1, 2)))
    inside = ts <= t
    tt = ts[inside]
    nn = norms[inside]
    if tt[-1] < t:
        tt = np.append(tt, t)
        nn = np.append(nn, frobenius_norm(D_path.at(t)))
    integral = float(np.sum(0.5 * (nn[1:] + nn[:-1]) * np.diff(tt)))
    return float(A0_norm * np.exp(2.0 * integral))
