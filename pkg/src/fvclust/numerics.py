"""Dense and sparse linear-algebra kernels.

Sparse storage is ``scipy.sparse.csr_matrix``; the helpers here add the few
pieces the optimizer needs on top of numpy/scipy: a sign-normalized thin QR,
an inverse square root for small SPD matrices, an implicit orthonormal
completion built from Householder reflectors, conjugate gradients and a
power iteration for spectral-norm estimates.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .exceptions import (
    InvalidShape,
    NotOrthonormal,
    NotSPD,
    NumericalBreakdown,
    RankDeficient,
)

FACTOR_TOL = 1e-12
ORTHO_TOL = 1e-8


def thin_qr_positive(A):
    """Thin QR factorization with a strictly positive diagonal in R.

    Parameters
    ----------
    A : ndarray of shape (n, q)
        Matrix with full column rank.

    Returns
    -------
    Q : ndarray of shape (n, q)
    R : ndarray of shape (q, q)
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] > A.shape[0]:
        raise InvalidShape(f"thin QR needs a tall matrix, got {A.shape}")
    Q, R = np.linalg.qr(A, mode="reduced")
    d = np.diagonal(R).copy()
    scale = np.linalg.norm(A)
    if scale == 0.0 or np.min(np.abs(d)) <= FACTOR_TOL * scale:
        raise RankDeficient("matrix is numerically rank deficient")
    s = np.sign(d)
    return Q * s, R * s[:, None]


def inv_sqrt_spd(S):
    """Return ``S^{-1/2}`` for a symmetric positive definite ``S``."""
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)
    w, U = np.linalg.eigh(S)
    if w.size and w[0] <= 0.0:
        raise NotSPD(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return (U / np.sqrt(w)) @ U.T


class HouseholderCompletion:
    """Implicit orthogonal matrix ``E = (X  X_perp)`` for an orthonormal ``X``.

    ``X_perp`` is never formed. It is fixed by the Householder reflectors of
    the QR factorization of ``X``, so repeated calls on the same handle are
    consistent with each other. ``alpha(A) = E^T A`` and ``beta(B) = E B``
    both cost O(n q k) for a k-column argument.

    ``perp_rotation`` optionally post-multiplies the completion by an
    orthogonal (n - q) x (n - q) matrix; it exists to produce alternative
    completions of the same ``X`` in tests.
    """

    def __init__(self, X, perp_rotation=None, tol=ORTHO_TOL):
        X = np.asarray(X, dtype=float)
        n, q = X.shape
        if q > n:
            raise InvalidShape(f"completion needs q <= n, got {X.shape}")
        gram_err = np.linalg.norm(X.T @ X - np.eye(q))
        if gram_err > tol:
            raise NotOrthonormal(f"||X^T X - I||_F = {gram_err:.3e}")
        self.n, self.q = n, q
        qr, tau, _, info = lapack.dgeqrf(np.asfortranarray(X))
        if info != 0:
            raise NumericalBreakdown(f"dgeqrf failed with info={info}")
        self._qr = qr
        self._tau = tau
        # X = Q_full[:, :q] diag(sign(R_ii)) because R is orthogonal and triangular
        self._sign = np.sign(np.diagonal(qr)[:q]).copy()
        self._sign[self._sign == 0] = 1.0
        if perp_rotation is not None:
            G = np.asarray(perp_rotation, dtype=float)
            if G.shape != (n - q, n - q):
                raise InvalidShape("perp_rotation must be (n - q) x (n - q)")
            self._rot = G
        else:
            self._rot = None

    def _apply_q(self, C, trans):
        C = np.asarray(C, dtype=float)
        vec = C.ndim == 1
        C2 = np.asfortranarray(C[:, None] if vec else C)
        if C2.shape[0] != self.n:
            raise InvalidShape(f"expected {self.n} rows, got {C2.shape[0]}")
        if self.q == 0 or C2.shape[1] == 0:
            out = C2.copy()
        else:
            lwork = max(1, C2.shape[1]) * 64
            out, _, info = lapack.dormqr(
                "L", trans, self._qr, self._tau, C2, lwork, overwrite_c=0
            )
            if info != 0:
                raise NumericalBreakdown(f"dormqr failed with info={info}")
        return out[:, 0] if vec else out

    def alpha(self, A):
        """``(X  X_perp)^T A``."""
        out = np.array(self._apply_q(A, "T"))
        q = self.q
        if out.ndim == 1:
            out[:q] *= self._sign
            if self._rot is not None:
                out[q:] = self._rot.T @ out[q:]
        else:
            out[:q] *= self._sign[:, None]
            if self._rot is not None:
                out[q:] = self._rot.T @ out[q:]
        return out

    def beta(self, B):
        """``(X  X_perp) B``."""
        B = np.array(B, dtype=float)
        q = self.q
        if B.ndim == 1:
            B[:q] *= self._sign
        else:
            B[:q] *= self._sign[:, None]
        if self._rot is not None:
            B[q:] = self._rot @ B[q:]
        return self._apply_q(B, "N")


def cg_solve(op, b, tol=1e-10, maxit=None, x0=None):
    """Conjugate gradients for a symmetric positive definite operator.

    Returns the first iterate with ``||op(x) - b|| <= tol * ||b||``, or the
    iterate with the smallest residual once ``maxit`` is reached.
    """
    b = np.asarray(b, dtype=float)
    if maxit is None:
        maxit = max(10, 2 * b.size)
    bnorm = np.linalg.norm(b)
    if not np.isfinite(bnorm):
        raise NumericalBreakdown("non-finite right-hand side")
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros_like(b)
    r = b - op(x) if x0 is not None else b.copy()
    target = tol * bnorm
    rr = r @ r
    if np.sqrt(rr) <= target:
        return x
    p = r.copy()
    best_x, best_res = x.copy(), np.sqrt(rr)
    for _ in range(maxit):
        Ap = op(p)
        pAp = p @ Ap
        if not np.isfinite(pAp):
            raise NumericalBreakdown("non-finite value in CG")
        if pAp <= 0.0:
            break
        a = rr / pAp
        x = x + a * p
        r = r - a * Ap
        rr_new = r @ r
        res = np.sqrt(rr_new)
        if not np.isfinite(res):
            raise NumericalBreakdown("non-finite residual in CG")
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= target:
            return x
        p = r + (rr_new / rr) * p
        rr = rr_new
    return best_x


def power_iteration_sym(op, n, tol=1e-8, maxit=1000, seed=0):
    """Estimate the spectral radius of a symmetric operator on R^n.

    The estimate ``||op(x)||`` for unit ``x`` never exceeds the true radius,
    so callers that need an upper bound should add a safety margin.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxit):
        y = op(x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        if abs(ny - est) <= tol * ny:
            return float(ny)
        est = ny
        x = y / ny
    return float(est)


class SparsePlusRankOne:
    """Symmetric-by-construction operator ``S + scale * u w^T``."""

    def __init__(self, S, u, w, scale):
        self.S = sp.csr_matrix(S, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.scale = float(scale)
        n = self.S.shape[0]
        if self.S.shape != (n, n) or self.u.shape != (n,) or self.w.shape != (n,):
            raise InvalidShape("inconsistent SparsePlusRankOne shapes")
        self.shape = (n, n)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return self.S @ x + self.scale * np.multiply.outer(self.u, self.w @ x)

    __matmul__ = apply

    def diagonal(self):
        return self.S.diagonal() + self.scale * self.u * self.w

    def to_dense(self):
        return self.S.toarray() + self.scale * np.outer(self.u, self.w)
