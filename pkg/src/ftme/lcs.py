"""Coherent-structure fields: stretching rates, weighted entropy fields,
FTLE fields, discrete extrema and the stable/unstable cone diagnostics.

The weighted field H(x) evaluates the planar entropy with the weight set
to the stretching rate along the vector field; its ridges and troughs
track the stable and unstable manifolds of hyperbolic equilibria.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import VectorField, integrate_flow, integrate_flow_batch
from .entropy import ftme_2d_exact
from .fieldio import Grid2D, ScalarField2D
from .spectra import singular_values_2x2_batch, svd_small

EQUILIBRIUM_SPEED = 1e-12


@dataclass(frozen=True)
class StretchingRate:
    alpha: float
    direction: np.ndarray
    at_equilibrium: bool


@dataclass(frozen=True)
class ConeReport:
    point: np.ndarray
    membership: str  # unstable_cone | stable_cone | neither
    H: float
    sin_angle: float
    unstable_threshold: float
    stable_threshold: float


def stretching_rate(field: VectorField, x0, T: float,
                    steps: int) -> StretchingRate:
    """Stretching rate along the vector field via endpoint speeds.

    Uses the identity Phi(T) f(x0) = f(phi(T, x0)) for autonomous fields,
    so only the trajectory itself is integrated.
    """
    if not field.autonomous:
        raise ValueError("stretching rate along f requires an autonomous field")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    f0 = field.f(0.0, x0)
    speed0 = np.linalg.norm(f0)
    if speed0 < EQUILIBRIUM_SPEED:
        return StretchingRate(alpha=math.nan, direction=f0, at_equilibrium=True)
    res = integrate_flow(field, x0, 0.0, T, steps)
    speed1 = np.linalg.norm(field.f(T, res.x_end))
    return StretchingRate(alpha=math.log(speed1 / speed0) / T,
                          direction=f0 / speed0, at_equilibrium=False)


def directional_stretching_rate(field: VectorField, x0, T: float, v,
                                steps: int) -> float:
    """(1/T) log ||Phi(T) v|| / ||v|| for an arbitrary direction v."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    res = integrate_flow(field, x0, 0.0, T, steps)
    return math.log(np.linalg.norm(res.phi @ v) / np.linalg.norm(v)) / T


def _field_batch(field: VectorField, grid: Grid2D, t1: float, steps: int):
    X0 = grid.nodes()
    x_end, phi, ok = integrate_flow_batch(field, X0, 0.0, t1, steps)
    return X0, x_end, phi, ok


def weighted_ftme_field(field: VectorField, grid: Grid2D, T: float,
                        steps: int) -> ScalarField2D:
    """H(x): planar entropy with the stretching-rate weight, on a grid.

    Equilibrium nodes and blown-up trajectories are masked and set to 0;
    export replaces masked values by the valid maximum.
    """
    if field.dim != 2:
        raise ValueError("weighted entropy field is planar only")
    if not field.autonomous:
        raise ValueError("weighted entropy field requires an autonomous field")
    X0, x_end, phi, ok = _field_batch(field, grid, T, steps)
    speed0 = np.linalg.norm(field.f(0.0, X0), axis=1)
    speed1 = np.linalg.norm(field.f(T, x_end), axis=1)
    equil = speed0 < EQUILIBRIUM_SPEED
    valid = ok & ~equil
    l1, l2 = singular_values_2x2_batch(phi)
    values = np.zeros(len(X0))
    for i in np.flatnonzero(valid):
        if l2[i] <= 0.0 or speed1[i] <= 0.0:
            valid[i] = False
            continue
        lam1 = math.log(l1[i]) / T
        lam2 = math.log(l2[i]) / T
        alpha = math.log(speed1[i] / speed0[i]) / T
        values[i] = ftme_2d_exact(lam1, lam2, alpha, T).h
    meta = {"kind": "ftme-weighted", "T": T, "alpha_policy": "stretching"}
    return ScalarField2D(grid=grid,
                         values=values.reshape(grid.nx, grid.ny),
                         mask=valid.reshape(grid.nx, grid.ny), meta=meta)


def ftle_field(field: VectorField, grid: Grid2D, T: float, steps: int,
               direction: str = "forward") -> ScalarField2D:
    """Largest FTLE per grid node, over [0, T] or [0, -T]."""
    if field.dim != 2:
        raise ValueError("FTLE field is planar only")
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    t1 = T if direction == "forward" else -T
    _, _, phi, ok = _field_batch(field, grid, t1, steps)
    l1, _ = singular_values_2x2_batch(phi)
    valid = ok & (l1 > 0.0)
    values = np.zeros(len(l1))
    values[valid] = np.log(l1[valid]) / T
    meta = {"kind": f"ftle-{direction}", "T": T, "alpha_policy": "none"}
    return ScalarField2D(grid=grid,
                         values=values.reshape(grid.nx, grid.ny),
                         mask=valid.reshape(grid.nx, grid.ny), meta=meta)


def stretching_rate_field(field: VectorField, grid: Grid2D, T: float,
                          steps: int) -> ScalarField2D:
    """Stretching rate along f per grid node; equilibria masked."""
    X0, x_end, _, ok = _field_batch(field, grid, T, steps)
    speed0 = np.linalg.norm(field.f(0.0, X0), axis=1)
    speed1 = np.linalg.norm(field.f(T, x_end), axis=1)
    valid = ok & (speed0 >= EQUILIBRIUM_SPEED) & (speed1 > 0.0)
    values = np.zeros(len(X0))
    values[valid] = np.log(speed1[valid] / speed0[valid]) / T
    meta = {"kind": "stretching-rate", "T": T, "alpha_policy": "stretching"}
    return ScalarField2D(grid=grid,
                         values=values.reshape(grid.nx, grid.ny),
                         mask=valid.reshape(grid.nx, grid.ny), meta=meta)


def extract_extrema(field2d: ScalarField2D, grad_tol: float | None = None,
                    hess_tol: float | None = None):
    """Interior nodes with near-zero discrete gradient, classified.

    Classification by the eigenvalue signs of the central-difference
    Hessian. A node is a max when no eigenvalue exceeds the curvature
    band and one falls below it, a min in the mirrored case, and a
    saddle otherwise. Max and min labels are additionally confirmed
    against the 8 neighbouring values, so a node on the edge of a flat
    plateau is not reported as an extremum. Tolerances default to
    grid-relative values and are overridable.
    """
    g = field2d.grid
    if g.nx < 3 or g.ny < 3:
        raise ValueError("grid must be at least 3x3")
    v = field2d.values
    dx, dy = g.dx, g.dy
    rng = float(v.max() - v.min())
    if grad_tol is None:
        grad_tol = 1e-2 * rng / max(dx, dy)
    gx = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * dx)
    gy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * dy)
    hxx = (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / dx**2
    hyy = (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / dy**2
    hxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * dx * dy)
    if hess_tol is None:
        scale = max(np.abs(hxx).max(), np.abs(hyy).max(), np.abs(hxy).max(),
                    1e-300)
        hess_tol = 1e-3 * scale
    flat = (np.abs(gx) <= grad_tol) & (np.abs(gy) <= grad_tol)
    # margin used when confirming a rise or drop against the neighbours;
    # a curvature at the band limit produces roughly this much change
    # over one grid cell
    margin = 0.25 * hess_tol * min(dx, dy) ** 2
    axes = ((1, 0), (0, 1), (1, 1), (1, -1))
    out = []
    for ii, jj in zip(*np.nonzero(flat)):
        i, j = ii + 1, jj + 1
        mean = 0.5 * (hxx[ii, jj] + hyy[ii, jj])
        rad = math.hypot(0.5 * (hxx[ii, jj] - hyy[ii, jj]), hxy[ii, jj])
        emin, emax = mean - rad, mean + rad
        vc = v[i, j]
        nbrs = v[i - 1:i + 2, j - 1:j + 2]
        pairs = [(v[i + a, j + b], v[i - a, j - b]) for a, b in axes]
        if emin <= -hess_tol and emax <= hess_tol:
            drop = max(vc - max(p) for p in pairs)
            kind = "max" if nbrs.max() <= vc and drop >= margin else "saddle"
        elif emax >= hess_tol and emin >= -hess_tol:
            rise = max(min(p) - vc for p in pairs)
            kind = "min" if nbrs.min() >= vc and rise >= margin else "saddle"
        else:
            # mixed strong signs, or curvature below the band (flat)
            kind = "saddle"
        out.append(((i, j), kind))
    return out


def cone_check(field: VectorField, xstar, e1, e2, lambda1: float,
               lambda2: float, eps: float, T: float, delta: float,
               points, steps: int):
    """Cone membership and weighted-entropy value at test points.

    e1, e2 must be unit eigenvectors of the Jacobian at the hyperbolic
    equilibrium xstar for eigenvalues lambda1 > 0 > lambda2.
    """
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    Dstar = field.jac(0.0, xstar)
    for ev, lam in ((e1, lambda1), (e2, lambda2)):
        if np.linalg.norm(Dstar @ ev - lam * ev) > 1e-8:
            raise ValueError("e1/e2 are not eigenvectors of D_x f(x*) "
                             "to the required residual")
    cu_thr = 2.0 * math.exp(-eps * T / 4.0)
    cs_thr = (eps / 4.0) * math.exp((lambda2 - lambda1) * T)
    reports = []
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        u = p - xstar
        nu = np.linalg.norm(u)
        if nu == 0.0:
            continue
        u = u / nu
        sin_angle = abs(u[0] * e2[1] - u[1] * e2[0])
        if sin_angle >= cu_thr:
            membership = "unstable_cone"
        elif sin_angle <= cs_thr:
            membership = "stable_cone"
        else:
            membership = "neither"
        H = weighted_ftme_at(field, p, T, steps)
        reports.append(ConeReport(point=p, membership=membership, H=H,
                                  sin_angle=sin_angle,
                                  unstable_threshold=cu_thr,
                                  stable_threshold=cs_thr))
    return reports


def weighted_ftme_at(field: VectorField, x0, T: float, steps: int) -> float:
    """H(x0) at a single point (0 at equilibria)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    f0 = field.f(0.0, x0)
    speed0 = np.linalg.norm(f0)
    if speed0 < EQUILIBRIUM_SPEED:
        return 0.0
    res = integrate_flow(field, x0, 0.0, T, steps)
    spec = svd_small(res.phi, T)
    alpha = math.log(np.linalg.norm(field.f(T, res.x_end)) / speed0) / T
    return ftme_2d_exact(spec.lam[0], spec.lam[1], alpha, T).h


def stretching_rate_near_equilibrium_gap(field: VectorField, xstar, points,
                                         T: float, steps: int):
    """Gap between alpha(x0) and the equilibrium-linearization rate.

    Returns (point, gap, bound) triples with bound the operator-norm
    estimate (log||Df(x*)|| + log||Df(x*)^{-1}||)/T, so the limiting gap
    along a sequence x0 -> x* can be checked against it.
    """
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    res_star = integrate_flow(field, xstar, 0.0, T, steps)
    Dstar = field.jac(0.0, xstar)
    s = np.linalg.svd(Dstar, compute_uv=False)
    bound = (math.log(s[0]) + math.log(1.0 / s[-1])) / T
    out = []
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        u = p - xstar
        rate = math.log(np.linalg.norm(res_star.phi @ u)
                        / np.linalg.norm(u)) / T
        sr = stretching_rate(field, p, T, steps)
        if sr.at_equilibrium:
            continue
        out.append((p, abs(sr.alpha - rate), bound))
    return out
