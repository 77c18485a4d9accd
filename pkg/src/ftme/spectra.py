"""Small-matrix singular value machinery and ellipsoid geometry.

Singular values of the fundamental matrix are the stretch factors of the
linearized flow; dividing their logs by the horizon gives the finite-time
Lyapunov exponents.  Ellipsoids E(A) = A^{-1} B(0,1) are the unit balls of
the norms induced by A^T A and carry the volume geometry behind the
entropy estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_JACOBI_TOL = 1e-13


class DegenerateMatrixError(ValueError):
    """Fundamental matrix is numerically singular."""


@dataclass(frozen=True)
class SpectralData:
    """Singular values, FTLEs and right singular vectors over horizon T.

    Lambda is sorted descending; xi[i] is the unit right singular vector
    for Lambda[i], sign-normalized so its first nonzero component is
    positive.
    """

    Lambda: np.ndarray
    lam: np.ndarray
    xi: np.ndarray
    T: float


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    for comp in v:
        if comp != 0.0:
            return v if comp > 0 else -v
    return v


def _jacobi_eigh(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi iteration for a small symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm drops below _JACOBI_TOL
    relative to the matrix norm.
    """
    A = np.array(S, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    norm = np.linalg.norm(A) + 1.0
    for _ in range(100):
        off = math.sqrt(sum(A[p, q] ** 2 for p in range(n)
                            for q in range(n) if p != q))
        if off <= _JACOBI_TOL * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = np.sign(theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / math.sqrt(t * t + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
    return np.diag(A).copy(), V


def svd_small(M: np.ndarray, T: float) -> SpectralData:
    """Singular values/vectors and FTLEs of a small invertible matrix.

    n = 1, 2 use closed forms on M^T M; n = 3, 4 use cyclic Jacobi.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n) or n > 4:
        raise ValueError("square matrix with n <= 4 required")
    det = np.linalg.det(M)
    if abs(det) <= 1e-300:
        raise DegenerateMatrixError("degenerate fundamental matrix")
    S = M.T @ M
    if n == 1:
        evals = np.array([S[0, 0]])
        vecs = np.array([[1.0]])
    elif n == 2:
        p, q, r = S[0, 0], S[0, 1], S[1, 1]
        mean = 0.5 * (p + r)
        rad = math.hypot(0.5 * (p - r), q)
        # mean - rad cancels badly for strongly sheared matrices; the
        # product of the eigenvalues of M^T M is det(M)^2, which is exact
        evals = np.array([mean + rad, (det / math.sqrt(mean + rad)) ** 2])
        tiny = 1e-14 * (abs(p) + abs(r) + 1.0)
        if rad <= tiny:
            # Lambda1 == Lambda2: any orthonormal pair works, take the
            # standard basis for determinism
            vecs = np.eye(2)
        else:
            v1 = np.array([q, evals[0] - p])
            if np.linalg.norm(v1) <= tiny:
                v1 = np.array([evals[0] - r, q])
            v1 = v1 / np.linalg.norm(v1)
            vecs = np.column_stack([v1, np.array([-v1[1], v1[0]])])
    else:
        evals, vecs = _jacobi_eigh(S)
        order = np.argsort(evals)[::-1]
        evals = evals[order]
        vecs = vecs[:, order]
    evals = np.maximum(evals, 0.0)
    Lambda = np.sqrt(evals)
    if Lambda[-1] <= 0.0:
        raise DegenerateMatrixError("degenerate fundamental matrix")
    xi = np.array([_sign_normalize(vecs[:, i]) for i in range(n)])
    lam = np.log(Lambda) / T
    return SpectralData(Lambda=Lambda, lam=lam, xi=xi, T=T)


def singular_values_2x2_batch(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(Lambda1, Lambda2) for a batch of 2x2 matrices, shape (..., 2, 2)."""
    S = np.swapaxes(M, -1, -2) @ M
    p, q, r = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]
    mean = 0.5 * (p + r)
    rad = np.hypot(0.5 * (p - r), q)
    l1 = np.sqrt(np.maximum(mean + rad, 0.0))
    # the smaller value via the determinant avoids the cancellation in
    # mean - rad when the matrix is strongly sheared
    det = np.abs(M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0])
    l2 = np.divide(det, l1, out=np.zeros_like(l1), where=l1 > 0.0)
    return l1, l2


@dataclass(frozen=True)
class Ellipsoid:
    """E(A) = A^{-1} B(0,1) = {x : <x, A^T A x> <= 1} for invertible A."""

    A: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("generator must be square")
        if abs(np.linalg.det(A)) <= 1e-300:
            raise ValueError("generator must be invertible")
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def quadratic_form(self) -> np.ndarray:
        return self.A.T @ self.A

    def volume(self) -> float:
        return unit_ball_volume(self.dim) / abs(np.linalg.det(self.A))


def ellipsoid_membership(e: Ellipsoid, x) -> bool:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return bool(x @ e.quadratic_form() @ x <= 1.0)


def unit_ball_volume(n: int) -> float:
    """Lebesgue volume of the Euclidean unit ball, pi^(n/2)/Gamma(n/2+1)."""
    if not 1 <= n <= 4:
        raise ValueError("dimension must be in 1..4")
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)
