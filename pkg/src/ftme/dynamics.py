"""Vector fields, flow-map/variational integration and closed-form flows.

All integration is classical fixed-step RK4 on the augmented system
(x, Phi) with Phi the fundamental matrix of the linearization along the
trajectory.  Right-hand sides broadcast over leading axes, so whole grids
of initial conditions integrate in one vectorized pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

BLOWUP_NORM = 1e12
DEFAULT_STEPS_PER_UNIT = 100


class TrajectoryBlowUpError(RuntimeError):
    """Trajectory left the computational domain (||x|| > BLOWUP_NORM)."""

    def __init__(self, last_time: float):
        super().__init__(f"trajectory blow-up, last finite time t = {last_time!r}")
        self.last_time = last_time


class NoClosedFormError(ValueError):
    """Requested a closed-form flow for a system that has none."""


@dataclass(frozen=True)
class VectorField:
    """ODE right-hand side f(t, x) with Jacobian D_x f(t, x).

    Both callables must broadcast: for x of shape (..., dim), f returns
    (..., dim) and jac returns (..., dim, dim).
    """

    dim: int
    f: Callable[[float, np.ndarray], np.ndarray]
    jac: Callable[[float, np.ndarray], np.ndarray]
    autonomous: bool = True
    name: str = ""


@dataclass(frozen=True)
class FlowResult:
    x_end: np.ndarray
    phi: np.ndarray
    t0: float
    t1: float
    step_count: int


# ---------------------------------------------------------------------------
# Built-in systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearSystem:
    """dx/dt = A x for a constant square matrix A."""

    A: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def field(self) -> VectorField:
        A = self.A

        def f(t, x):
            return np.asarray(x) @ A.T

        def jac(t, x):
            x = np.asarray(x)
            return np.broadcast_to(A, x.shape[:-1] + A.shape).copy()

        return VectorField(dim=self.dim, f=f, jac=jac, autonomous=True,
                           name="linear")


def linear_saddle() -> LinearSystem:
    """The planar saddle dx1/dt = x1 - x2, dx2/dt = -x2."""
    return LinearSystem(np.array([[1.0, -1.0], [0.0, -1.0]]))


@dataclass(frozen=True)
class ParabolaSystem:
    """dx1/dt = -x1, dx2/dt = beta*x1^2 + gamma*x2 with gamma > 0.

    Hyperbolic equilibrium at the origin; the stable manifold is the
    parabola x2 = -beta/(2+gamma) * x1^2 and the unstable manifold is the
    x2-axis.
    """

    beta: float
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def dim(self) -> int:
        return 2

    def field(self) -> VectorField:
        beta, gamma = self.beta, self.gamma

        def f(t, x):
            x = np.asarray(x, dtype=float)
            out = np.empty_like(x)
            out[..., 0] = -x[..., 0]
            out[..., 1] = beta * x[..., 0] ** 2 + gamma * x[..., 1]
            return out

        def jac(t, x):
            x = np.asarray(x, dtype=float)
            J = np.zeros(x.shape[:-1] + (2, 2))
            J[..., 0, 0] = -1.0
            J[..., 1, 0] = 2.0 * beta * x[..., 0]
            J[..., 1, 1] = gamma
            return J

        return VectorField(dim=2, f=f, jac=jac, autonomous=True,
                           name="parabola")


@dataclass(frozen=True)
class Scalar1D:
    """dx/dt = a x in one dimension."""

    a: float

    @property
    def dim(self) -> int:
        return 1

    def field(self) -> VectorField:
        a = self.a

        def f(t, x):
            return a * np.asarray(x, dtype=float)

        def jac(t, x):
            x = np.asarray(x, dtype=float)
            return np.full(x.shape[:-1] + (1, 1), a)

        return VectorField(dim=1, f=f, jac=jac, autonomous=True,
                           name="scalar1d")


BuiltinSystem = LinearSystem | ParabolaSystem | Scalar1D


# ---------------------------------------------------------------------------
# RK4 integration of the augmented (x, Phi) system
# ---------------------------------------------------------------------------

def _augmented_rhs(field: VectorField, t: float, x: np.ndarray,
                   phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return field.f(t, x), field.jac(t, x) @ phi


def integrate_flow_batch(field: VectorField, x0: np.ndarray, t0: float,
                         t1: float, steps: int):
    """RK4-integrate a batch of initial states together with Phi.

    x0 has shape (m, n).  Returns (x_end (m,n), phi (m,n,n), ok (m,) bool);
    rows where the trajectory exceeded BLOWUP_NORM are frozen at their last
    finite value and flagged ok=False.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.array(x0, dtype=float)
    m, n = x.shape
    if n != field.dim:
        raise ValueError(f"state dimension {n} != field dimension {field.dim}")
    phi = np.broadcast_to(np.eye(n), (m, n, n)).copy()
    ok = np.ones(m, dtype=bool)
    h = (t1 - t0) / steps
    if h == 0.0:
        return x, phi, ok
    t = t0
    for _ in range(steps):
        k1x, k1p = _augmented_rhs(field, t, x, phi)
        k2x, k2p = _augmented_rhs(field, t + h / 2, x + h / 2 * k1x,
                                  phi + h / 2 * k1p)
        k3x, k3p = _augmented_rhs(field, t + h / 2, x + h / 2 * k2x,
                                  phi + h / 2 * k2p)
        k4x, k4p = _augmented_rhs(field, t + h, x + h * k3x, phi + h * k3p)
        x_new = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        phi_new = phi + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        bad = ~np.isfinite(x_new).all(axis=1)
        bad |= np.linalg.norm(np.where(bad[:, None], 0.0, x_new),
                              axis=1) > BLOWUP_NORM
        newly_bad = bad & ok
        # freeze rows that blew up on this step
        x_new[newly_bad] = x[newly_bad]
        phi_new[newly_bad] = phi[newly_bad]
        x_new[~ok] = x[~ok]
        phi_new[~ok] = phi[~ok]
        ok &= ~bad
        x, phi = x_new, phi_new
        t += h
    return x, phi, ok


def integrate_flow(field: VectorField, x0, t0: float, t1: float,
                   steps: int) -> FlowResult:
    """Flow map and fundamental matrix for a single initial state.

    Backward time (t1 < t0) integrates with a negative step.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    x, phi, ok = integrate_flow_batch(field, x0[None, :], t0, t1, steps)
    if not ok[0]:
        # rerun cheaply to locate the last finite time
        h = (t1 - t0) / steps
        xs = x0.copy()
        t = t0
        for _ in range(steps):
            k1 = field.f(t, xs)
            k2 = field.f(t + h / 2, xs + h / 2 * k1)
            k3 = field.f(t + h / 2, xs + h / 2 * k2)
            k4 = field.f(t + h, xs + h * k3)
            xn = xs + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.isfinite(xn).all() or np.linalg.norm(xn) > BLOWUP_NORM:
                raise TrajectoryBlowUpError(t)
            xs = xn
            t += h
        raise TrajectoryBlowUpError(t1)
    return FlowResult(x_end=x[0], phi=phi[0], t0=t0, t1=t1, step_count=steps)


def liouville_det(field: VectorField, x0, t0: float, t1: float,
                  steps: int) -> float:
    """det Phi via Liouville's formula exp(integral of trace D_x f).

    Integrates (x, logdet) on the same RK4 grid as integrate_flow; serves
    as an independent cross-check of det(Phi).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    logdet = 0.0
    h = (t1 - t0) / steps
    t = t0

    def rhs(tt, state):
        xx, _ = state
        fx = field.f(tt, xx)
        tr = np.trace(field.jac(tt, xx))
        return fx, tr

    for _ in range(steps):
        k1x, k1d = rhs(t, (x, logdet))
        k2x, k2d = rhs(t + h / 2, (x + h / 2 * k1x, 0.0))
        k3x, k3d = rhs(t + h / 2, (x + h / 2 * k2x, 0.0))
        k4x, k4d = rhs(t + h, (x + h * k3x, 0.0))
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        logdet = logdet + h / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        if not np.isfinite(x).all() or np.linalg.norm(x) > BLOWUP_NORM:
            raise TrajectoryBlowUpError(t)
        t += h
    return float(np.exp(logdet))


# ---------------------------------------------------------------------------
# Closed-form flows for the built-in systems
# ---------------------------------------------------------------------------

def _expm_2x2(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a 2x2 (or 1x1) real matrix.

    Real, well-separated eigenvalues use the eigen-decomposition; the
    defective/complex cases fall back to scaling-and-squaring of the
    Taylor series, summed to relative 1e-14.
    """
    A = np.asarray(A, dtype=float)
    if A.shape == (1, 1):
        return np.array([[np.exp(A[0, 0])]])
    tr = A[0, 0] + A[1, 1]
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    disc = tr * tr / 4 - det
    scale = np.abs(A).max() + 1.0
    if disc > 1e-12 * scale * scale:
        root = np.sqrt(disc)
        mu1, mu2 = tr / 2 + root, tr / 2 - root
        # eigenvectors of the 2x2 via (A - mu2 I) and (A - mu1 I) columns
        P1 = (A - mu2 * np.eye(2)) / (mu1 - mu2)
        P2 = (A - mu1 * np.eye(2)) / (mu2 - mu1)
        return np.exp(mu1) * P1 + np.exp(mu2) * P2
    # scaling and squaring with a plain Taylor series
    s = max(0, int(np.ceil(np.log2(max(1.0, np.abs(A).max())))) + 4)
    B = A / 2 ** s
    term = np.eye(2)
    out = np.eye(2)
    k = 1
    while True:
        term = term @ B / k
        out = out + term
        if np.abs(term).max() <= 1e-16 * np.abs(out).max():
            break
        k += 1
    for _ in range(s):
        out = out @ out
    return out


def closed_form_flow(system: BuiltinSystem, x0, t: float) -> FlowResult:
    """Exact flow and fundamental matrix of a built-in system at time t."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if isinstance(system, LinearSystem):
        if system.dim > 2:
            raise NoClosedFormError("closed form implemented for n <= 2 only")
        phi = _expm_2x2(system.A * t)
        return FlowResult(x_end=phi @ x0, phi=phi, t0=0.0, t1=t, step_count=0)
    if isinstance(system, ParabolaSystem):
        beta, gamma = system.beta, system.gamma
        a = np.exp(-t)
        c = np.exp(gamma * t)
        growth = c - np.exp(-2.0 * t)
        x1 = a * x0[0]
        x2 = beta / (2.0 + gamma) * x0[0] ** 2 * growth + c * x0[1]
        b = 2.0 * beta / (2.0 + gamma) * x0[0] * growth
        phi = np.array([[a, 0.0], [b, c]])
        return FlowResult(x_end=np.array([x1, x2]), phi=phi, t0=0.0, t1=t,
                          step_count=0)
    if isinstance(system, Scalar1D):
        e = np.exp(system.a * t)
        return FlowResult(x_end=e * x0, phi=np.array([[e]]), t0=0.0, t1=t,
                          step_count=0)
    raise NoClosedFormError(f"no closed form for {type(system).__name__}")
