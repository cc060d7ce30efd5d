"""Geometry of F_v = {X in R^{n x q} : X^T X = I_q, v in span(X)}.

Tangent vectors and normal-space coordinates are plain numpy arrays: an
``(n, q)`` array for tangent/ambient directions and a 1-D array of length
``q(q+1)/2 + n - q`` for normal coordinates. Points carry their cached
``X^T v`` and a lazily built Householder completion.
"""

from __future__ import annotations

from functools import cached_property, lru_cache

import numpy as np

from .exceptions import DegenerateProjection, InfeasiblePoint, InvalidShape
from .numerics import ORTHO_TOL, HouseholderCompletion, inv_sqrt_spd, thin_qr_positive


class WeightVector:
    """Strictly positive weight vector ``v`` with cached norm and direction."""

    def __init__(self, v):
        v = np.array(v, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0.0):
            raise ValueError("weight vector entries must be finite and positive")
        v.setflags(write=False)
        self.v = v
        self.norm = float(np.linalg.norm(v))
        self.unit = v / self.norm

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n))

    def __len__(self):
        return self.v.size

    def __repr__(self):
        return f"WeightVector(n={self.v.size}, norm={self.norm:.4g})"


def as_weight(v):
    return v if isinstance(v, WeightVector) else WeightVector(v)


class FeasiblePoint:
    """A point of F_v.

    Parameters
    ----------
    X : ndarray of shape (n, q)
    v : WeightVector or array-like
    tol : float
        Feasibility tolerance for ``X^T X = I`` and ``v in span(X)``.
    """

    def __init__(self, X, v, tol=ORTHO_TOL):
        X = np.array(X, dtype=float)
        v = as_weight(v)
        if X.ndim != 2 or X.shape[0] != len(v) or X.shape[1] > X.shape[0]:
            raise InvalidShape(f"point of shape {X.shape} incompatible with n={len(v)}")
        if not np.all(np.isfinite(X)):
            raise InfeasiblePoint("point has non-finite entries")
        q = X.shape[1]
        alpha = X.T @ v.v
        gram_err = np.linalg.norm(X.T @ X - np.eye(q))
        span_err = np.linalg.norm(X @ alpha - v.v)
        if gram_err > tol or span_err > tol * v.norm:
            raise InfeasiblePoint(
                f"||X^T X - I|| = {gram_err:.2e}, ||X X^T v - v|| = {span_err:.2e}"
            )
        X.setflags(write=False)
        self.X = X
        self.v = v
        self.alpha = alpha
        self.alpha_hat = alpha / np.linalg.norm(alpha)

    @property
    def shape(self):
        return self.X.shape

    @cached_property
    def completion(self):
        return HouseholderCompletion(self.X)

    @classmethod
    def from_matrix(cls, X, v):
        """Build a point from an arbitrary full-rank matrix.

        The matrix is orthonormalized and then projected onto F_v.
        """
        Q, _ = thin_qr_positive(X)
        return project_to_manifold(Q, v)

    def __repr__(self):
        n, q = self.X.shape
        return f"FeasiblePoint(n={n}, q={q})"


def manifold_dim(n, q):
    """Dimension of F_v as a submanifold of R^{n x q}."""
    if not (1 <= q <= n):
        raise InvalidShape(f"need 1 <= q <= n, got n={n}, q={q}")
    return n * q - q * (q + 1) // 2 - n + q


def normal_dim(n, q):
    return q * (q + 1) // 2 + n - q


def _combine(Q, v, qstar):
    return np.outer(v.unit, qstar) + Q - np.outer(Q @ qstar, qstar)


def project_to_manifold(X, v):
    """Closest point of F_v to an orthonormal ``X`` in Frobenius norm."""
    v = as_weight(v)
    X = np.asarray(X, dtype=float)
    q = X.shape[1]
    if np.linalg.norm(X.T @ X - np.eye(q)) > ORTHO_TOL:
        X, _ = thin_qr_positive(X)
    a = X.T @ v.v
    na = np.linalg.norm(a)
    if na <= 1e-12 * v.norm:
        raise DegenerateProjection("X^T v vanishes; projection onto F_v is undefined")
    return FeasiblePoint(_combine(X, v, a / na), v)


def project_tangent(x, Z):
    X = x.X
    XtZ = X.T @ Z
    a = x.alpha_hat
    R = Z - X @ XtZ
    return X @ (0.5 * (XtZ - XtZ.T)) + R - np.outer(R @ a, a)


def project_normal(x, Z):
    X = x.X
    XtZ = X.T @ Z
    a = x.alpha_hat
    R = Z - X @ XtZ
    return X @ (0.5 * (XtZ + XtZ.T)) + np.outer(R @ a, a)


def retract_qr(x, V):
    """QR-based retraction: qf(X + V) followed by projection onto F_v."""
    if not np.any(V):
        return x
    Q, _ = thin_qr_positive(x.X + V)
    a = Q.T @ x.v.v
    na = np.linalg.norm(a)
    if na <= 1e-12 * x.v.norm:
        raise DegenerateProjection("(X + V)^T v vanishes")
    return FeasiblePoint(_combine(Q, x.v, a / na), x.v)


def retract_polar(x, V):
    """Polar retraction: (X + V)(I + V^T V)^{-1/2} followed by projection."""
    if not np.any(V):
        return x
    q = x.X.shape[1]
    P = (x.X + V) @ inv_sqrt_spd(np.eye(q) + V.T @ V)
    a = P.T @ x.v.v
    na = np.linalg.norm(a)
    if na <= 1e-12 * x.v.norm:
        raise DegenerateProjection("(X + V)^T v vanishes")
    return FeasiblePoint(_combine(P, x.v, a / na), x.v)


RETRACTIONS = {"qr": retract_qr, "polar": retract_polar}


@lru_cache(maxsize=64)
def _offdiag_index(q):
    # upper-triangle pairs with the column index as the outer loop
    pairs = [(i, j) for j in range(1, q) for i in range(j)]
    if not pairs:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    rows, cols = zip(*pairs)
    return np.array(rows), np.array(cols)


def basis_transpose_apply(x, V, completion=None):
    """Coordinates ``u_i = trace(V^T V_i)`` in the orthonormal normal basis.

    Layout: the q diagonal entries, then the q(q-1)/2 symmetric pairs
    (column-major upper triangle), then n - q directions along X_perp.
    """
    comp = x.completion if completion is None else completion
    q = x.X.shape[1]
    SK = comp.alpha(V)
    S, K = SK[:q], SK[q:]
    ii, jj = _offdiag_index(q)
    off = (S[ii, jj] + S[jj, ii]) / np.sqrt(2.0)
    z = K @ x.alpha / x.v.norm
    return np.concatenate([np.diagonal(S), off, z])


def basis_apply(x, u, completion=None):
    """Normal-space matrix ``sum_i u_i V_i`` for coordinates ``u``."""
    comp = x.completion if completion is None else completion
    n, q = x.X.shape
    u = np.asarray(u, dtype=float)
    m = normal_dim(n, q)
    if u.shape != (m,):
        raise InvalidShape(f"normal coordinates must have length {m}, got {u.shape}")
    ii, jj = _offdiag_index(q)
    S = np.diag(u[:q])
    off = u[q : q + ii.size] / np.sqrt(2.0)
    S[ii, jj] = off
    S[jj, ii] = off
    z = u[q + ii.size :]
    bottom = np.outer(z, x.alpha / x.v.norm)
    return comp.beta(np.vstack([S, bottom]))
