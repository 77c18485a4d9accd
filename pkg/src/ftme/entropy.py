"""Finite-time metric entropy: exact formulas, bounds and estimators.

The entropy of a trajectory is the negative normalized log of the volume
fraction of the unit ball that stays inside every ellipsoid
E(Phi(t,t0) e^{-alpha (t-t0)}) for t in the time set.  In one and two
dimensions closed forms exist; otherwise the volume is estimated by
Monte Carlo with a counter-based (Philox) generator so results are
reproducible from the seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .dynamics import VectorField, integrate_flow, integrate_flow_batch
from .spectra import unit_ball_volume

_BRANCH_TOL = 1e-12
_ACOS_GUARD = 1e-12
_MC_CHUNK = 1 << 20


class UnsortedExponentsError(ValueError):
    """lambda1 < lambda2 passed where descending order is required."""


class InternalConsistencyError(RuntimeError):
    """An arccos argument left [-1, 1] by more than the guard tolerance."""


@dataclass(frozen=True)
class TimeSet:
    """Finite ascending set of times containing the base time t0."""

    t0: float
    times: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if len(times) < 2:
            raise ValueError("a time set needs at least two times")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly ascending")
        if self.t0 not in times:
            raise ValueError("t0 must be one of the times")
        object.__setattr__(self, "times", times)

    @property
    def length(self) -> float:
        """|J| = max - min."""
        return self.times[-1] - self.times[0]


@dataclass(frozen=True)
class EntropyResult:
    h: float
    alpha: float
    method: str
    stderr: float = 0.0
    sample_count: int = 0
    empty_intersection: bool = False


def ftme_1d(lambda1: float, alpha: float) -> EntropyResult:
    """Scalar entropy (lambda1 - alpha)^+."""
    return EntropyResult(h=max(lambda1 - alpha, 0.0), alpha=alpha,
                         method="exact1d")


def ftme_2d_exact(lambda1: float, lambda2: float, alpha: float,
                  T: float) -> EntropyResult:
    """Exact planar entropy over a two-point time set of span T.

    With kappa_i = exp((lambda_i - alpha) T): zero when the ball maps into
    itself, log(kappa1*kappa2)/T when both directions expand, and the
    disk/ellipse intersection-area formula in the mixed case.  Branch
    selection compares kappa to 1 with tolerance 1e-12, preferring the
    closed outer branches where the mixed formula degenerates.
    """
    if lambda1 < lambda2:
        raise UnsortedExponentsError("unsorted exponents: lambda1 < lambda2")
    if not T > 0:
        raise ValueError("T must be positive")
    k1 = math.exp((lambda1 - alpha) * T)
    k2 = math.exp((lambda2 - alpha) * T)
    if k1 <= 1.0 + _BRANCH_TOL:
        return EntropyResult(h=0.0, alpha=alpha, method="exact2d")
    if k2 >= 1.0 - _BRANCH_TOL:
        h = math.log(k1 * k2) / T
        return EntropyResult(h=max(h, 0.0), alpha=alpha, method="exact2d")
    # the intersection-area angles, written with atan2 so the arguments
    # stay well conditioned as either kappa approaches 1:
    #   a1 = arccos(sqrt((k1^2-1)/(k1^2-k2^2)))
    #   a2 = arccos(k1 sqrt((1-k2^2)/(k1^2-k2^2)))
    s1 = k1 * k1 - 1.0
    s2 = 1.0 - k2 * k2
    if s1 < -_ACOS_GUARD or s2 < -_ACOS_GUARD:
        raise InternalConsistencyError(
            f"intersection angle arguments {s1!r}, {s2!r} negative beyond "
            "the guard tolerance")
    p = math.sqrt(max(s1, 0.0))
    q = math.sqrt(max(s2, 0.0))
    a1 = math.atan2(q, p)
    a2 = math.atan2(k2 * p, k1 * q)
    ratio = (2.0 / math.pi) * (a1 + a2 / (k1 * k2))
    h = -math.log(ratio) / T
    return EntropyResult(h=max(h, 0.0), alpha=alpha, method="exact2d")


def ftme_2d_incompressible(lambda1: float, T: float) -> EntropyResult:
    """Closed form for lambda2 = -lambda1, alpha = 0."""
    if not T > 0:
        raise ValueError("T must be positive")
    # arccos(sqrt(e^{2 lambda1 T}/(e^{2 lambda1 T}+1))) = atan(e^{-lambda1 T})
    h = -math.log((4.0 / math.pi) * math.atan(math.exp(-lambda1 * T))) / T
    return EntropyResult(h=max(h, 0.0), alpha=0.0, method="incompressible")


# ---------------------------------------------------------------------------
# Monte Carlo estimator
# ---------------------------------------------------------------------------

def _ball_sampler(n: int, seed: int):
    """Yield chunks of points uniform in B(0,1) by cube rejection.

    Philox is counter-based, so the stream is a pure function of the seed
    and the acceptance order is deterministic.
    """
    gen = np.random.Generator(np.random.Philox(key=seed))
    while True:
        pts = gen.uniform(-1.0, 1.0, size=(_MC_CHUNK, n))
        inside = np.einsum("ij,ij->i", pts, pts) <= 1.0
        yield pts[inside]


def ftme_monte_carlo(mats, alpha: float, J: TimeSet, samples: int,
                     seed: int, gamma: np.ndarray | None = None) -> EntropyResult:
    """Entropy of a linear(ized) system by ellipsoid-intersection volume.

    mats: iterable of (t, Phi(t, t0)) covering every t in J (identity at
    t0).  With gamma given, distances are measured in the norm ||gamma x||
    and the reference ball becomes the gamma-ellipsoid.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    mats = {float(t): np.asarray(M, dtype=float) for t, M in mats}
    missing = [t for t in J.times if t not in mats]
    if missing:
        raise ValueError(f"missing fundamental matrices for times {missing}")
    n = mats[J.times[0]].shape[0]
    G = np.eye(n) if gamma is None else np.asarray(gamma, dtype=float)
    Ginv = np.linalg.inv(G)
    # membership at time t: ||G Phi x|| <= e^{alpha (t - t0)}, i.e.
    # x^T Q_t x <= 1 with Q_t = e^{-2 alpha dt} (G Phi)^T (G Phi)
    forms = []
    for t in J.times:
        B = math.exp(-alpha * (t - J.t0)) * (G @ mats[t])
        if abs(np.linalg.det(B)) <= 1e-300:
            raise ValueError(f"singular matrix at t = {t}")
        forms.append(B.T @ B)
    kept = 0
    drawn = 0
    sampler = _ball_sampler(n, seed)
    while drawn < samples:
        pts = next(sampler)
        if drawn + len(pts) > samples:
            pts = pts[: samples - drawn]
        drawn += len(pts)
        # sample points uniformly in the reference gamma-ellipsoid
        x = pts @ Ginv.T
        ok = np.ones(len(x), dtype=bool)
        for Q in forms:
            ok &= np.einsum("ij,jk,ik->i", x, Q, x) <= 1.0
        kept += int(ok.sum())
    p = kept / samples
    if p == 0.0:
        return EntropyResult(h=math.inf, alpha=alpha, method="monte_carlo",
                             stderr=math.inf, sample_count=samples,
                             empty_intersection=True)
    sigma_p = math.sqrt(p * (1.0 - p) / samples)
    return EntropyResult(h=-math.log(p) / J.length, alpha=alpha,
                         method="monte_carlo",
                         stderr=sigma_p / (p * J.length),
                         sample_count=samples)


def linearized_ftme_monte_carlo(field: VectorField, x0, J: TimeSet,
                                alpha: float, samples: int, seed: int,
                                steps_per_unit: float = 100,
                                gamma: np.ndarray | None = None
                                ) -> EntropyResult:
    """Monte Carlo entropy of the linearization along a trajectory."""
    mats = [(J.t0, np.eye(field.dim))]
    for t in J.times:
        if t == J.t0:
            continue
        steps = max(1, round(abs(t - J.t0) * steps_per_unit))
        res = integrate_flow(field, x0, J.t0, t, steps)
        mats.append((t, res.phi))
    return ftme_monte_carlo(mats, alpha, J, samples, seed, gamma=gamma)


# ---------------------------------------------------------------------------
# Bounds and identities
# ---------------------------------------------------------------------------

def pesin_gap(lambdas, alpha: float, h: float, n: int, T: float,
              stderr: float = 0.0) -> tuple[float, float, bool]:
    """Gap of the finite-time Pesin formula and its dimensional bound.

    gap = sum_i (lambda_i - alpha)^+ - h must land in [0, bound] up to
    1e-9 for exact h, or 4*stderr for a Monte Carlo h.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    gap = sum(max(l - alpha, 0.0) for l in lambdas) - h
    bound = (n * math.log(2.0) + math.lgamma(n / 2 + 1)
             - (n / 2) * math.log(math.pi)) / T
    tol = 1e-9 if stderr == 0.0 else 4.0 * stderr
    ok = -tol <= gap <= bound + tol
    return gap, bound, ok


def ftme_norm_bounds(phi_norms, alpha: float, J: TimeSet,
                     n: int) -> tuple[float, float]:
    """Operator-norm entropy bounds from the inverse/forward norms of Phi.

    phi_norms: iterable of (t, ||Phi(t,t0)||, ||Phi(t,t0)^{-1}||).  lower
    is (n/|J|) log sup_t e^{alpha dt} ||Phi^{-1}||; upper is
    (n/|J|) log sup_t e^{-alpha dt} ||Phi||.  Only h <= upper is a safe
    assertion in general; see the package notes on the lower expression.
    """
    sup_inv = -math.inf
    sup_fwd = -math.inf
    for t, norm, inv_norm in phi_norms:
        dt = t - J.t0
        sup_inv = max(sup_inv, math.exp(alpha * dt) * inv_norm)
        sup_fwd = max(sup_fwd, math.exp(-alpha * dt) * norm)
    lower = n / J.length * math.log(sup_inv)
    upper = n / J.length * math.log(sup_fwd)
    return lower, upper


def ftme_along_trajectory(h_t0: float, alpha: float, t: float, t0: float,
                          J: TimeSet, n: int, det_phi: float) -> float:
    """Entropy at the evolved base point phi(t,t0)x0."""
    if det_phi == 0.0:
        raise ValueError("det Phi must be nonzero")
    return (h_t0 + n * alpha * (t - t0) / J.length
            - math.log(abs(det_phi)) / J.length)


def gamma_norm_deviation(Gamma: np.ndarray, n: int, J_len: float) -> float:
    """Bound (n log||Gamma|| + n log||Gamma^{-1}||) / |J| on the entropy
    change under the norm ||Gamma x||."""
    G = np.asarray(Gamma, dtype=float)
    evals = np.linalg.eigvalsh(0.5 * (G + G.T))
    if evals.min() <= 0:
        raise ValueError("Gamma must be positive definite")
    s = np.linalg.svd(G, compute_uv=False)
    return (n * math.log(s[0]) + n * math.log(1.0 / s[-1])) / J_len


def empirical_escape_rate(field: VectorField, x0, J: TimeSet, alpha: float,
                          eps: float, samples: int, seed: int,
                          steps_per_unit: float = 100) -> float:
    """Escape rate of radius eps by direct sampling of the nonlinear flow.

    Samples start points uniform in B(x0, eps), follows them through every
    time in J and counts the fraction that stays within
    eps * e^{alpha (t - t0)} of the reference trajectory.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = field.dim
    sampler = _ball_sampler(n, seed)
    pts = []
    need = samples
    while need > 0:
        chunk = next(sampler)
        pts.append(chunk[:need])
        need -= len(pts[-1])
    X = x0 + eps * np.concatenate(pts)
    ok = np.ones(samples, dtype=bool)

    def march(times):
        nonlocal ok
        cur = np.vstack([X, x0[None, :]])
        t_prev = J.t0
        for t in times:
            steps = max(1, round(abs(t - t_prev) * steps_per_unit))
            cur, _, alive = integrate_flow_batch(
                _flow_only(field), cur, t_prev, t, steps)
            ok &= alive[:-1]
            dist = np.linalg.norm(cur[:-1] - cur[-1], axis=1)
            ok &= dist <= eps * math.exp(alpha * (t - J.t0))
            t_prev = t

    forward = [t for t in J.times if t > J.t0]
    backward = [t for t in reversed(J.times) if t < J.t0]
    march(forward)
    march(backward)
    p = ok.sum() / samples
    if p == 0.0:
        return math.inf
    return -math.log(p) / J.length


def _flow_only(field: VectorField) -> VectorField:
    """Variant whose Jacobian is zero so Phi stays constant (cheap flow)."""

    def zero_jac(t, x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (field.dim, field.dim))

    return VectorField(dim=field.dim, f=field.f, jac=zero_jac,
                       autonomous=field.autonomous, name=field.name)


def coherent_pair_ratio(h: float, T: float) -> float:
    """Predicted mass ratio e^{-h T} of a coherent pair of eps-balls."""
    if not T > 0:
        raise ValueError("T must be positive")
    if math.isinf(h):
        return 0.0
    return math.exp(-h * T)
