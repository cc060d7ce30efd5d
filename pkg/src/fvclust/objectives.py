"""Composite objectives F(X) = -trace(X^T C X) + lambda * ||X||_1.

``C`` is kept implicit: a sparse matrix, a sparse-plus-rank-one modularity
operator, a diagonally rescaled affinity, or a Gram operator ``A A^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import EmptyGraph, InvalidShape, IsolatedVertex
from .manifold import WeightVector, as_weight, project_tangent
from .numerics import SparsePlusRankOne, power_iteration_sym


def _check_square_sparse(A):
    A = sp.csr_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise InvalidShape(f"expected a square matrix, got {A.shape}")
    A.sum_duplicates()
    A.sort_indices()
    return A


class ScaledSparse:
    """``diag(s) W diag(s)`` stored as a single sparse matrix."""

    def __init__(self, W, s):
        self.W = sp.csr_matrix(W, dtype=float)
        self.s = np.asarray(s, dtype=float)
        S = sp.diags(self.s)
        self.M = sp.csr_matrix(S @ self.W @ S)
        self.shape = self.M.shape

    def apply(self, x):
        return self.M @ np.asarray(x, dtype=float)

    __matmul__ = apply

    def diagonal(self):
        return self.M.diagonal()

    def to_dense(self):
        return self.M.toarray()


class GramOperator:
    """``C = A A^T`` applied as ``A (A^T x)``."""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        if self.A.ndim == 1:
            self.A = self.A[:, None]
        n = self.A.shape[0]
        self.shape = (n, n)

    def apply(self, x):
        return self.A @ (self.A.T @ np.asarray(x, dtype=float))

    __matmul__ = apply

    def diagonal(self):
        return np.einsum("ij,ij->i", self.A, self.A)

    def to_dense(self):
        return self.A @ self.A.T


class SparseOperator:
    def __init__(self, S):
        self.M = sp.csr_matrix(S, dtype=float)
        self.shape = self.M.shape

    def apply(self, x):
        return self.M @ np.asarray(x, dtype=float)

    __matmul__ = apply

    def diagonal(self):
        return self.M.diagonal()

    def to_dense(self):
        return self.M.toarray()


def as_operator(op):
    if hasattr(op, "apply"):
        return op
    if sp.issparse(op):
        return SparseOperator(op)
    return SparseOperator(sp.csr_matrix(np.asarray(op, dtype=float)))


def modularity_operator(A):
    """Modularity matrix ``M = A - d d^T / (2m)`` kept as sparse plus rank one."""
    A = _check_square_sparse(A)
    d = np.asarray(A.sum(axis=1)).ravel()
    two_m = float(d.sum())
    if two_m <= 0.0:
        raise EmptyGraph("graph has no edges")
    return SparsePlusRankOne(A, d, d, -1.0 / two_m)


def ncut_operator(W):
    """Normalized-cut kernel ``D^{-1/2} W D^{-1/2}`` and weights ``diag(D^{1/2})``."""
    W = _check_square_sparse(W)
    d = np.asarray(W.sum(axis=1)).ravel()
    bad = np.flatnonzero(d <= 0.0)
    if bad.size:
        raise IsolatedVertex(int(bad[0]))
    return ScaledSparse(W, 1.0 / np.sqrt(d)), WeightVector(np.sqrt(d))


def gram_operator(A):
    """Operator of the k-means trace form, ``C = A A^T``."""
    return GramOperator(A)


@dataclass
class QuadTraceObjective:
    """``f(X) = -trace(X^T C X)`` for a symmetric operator ``C``."""

    op: object
    tag: str = "quadratic"

    def __post_init__(self):
        self.op = as_operator(self.op)
        self.n = self.op.shape[0]

    def value(self, X):
        return -float(np.sum(X * (self.op @ X)))

    def egrad(self, X):
        return -2.0 * (self.op @ X)

    def value_and_egrad(self, X):
        CX = self.op @ X
        return -float(np.sum(X * CX)), -2.0 * CX

    def spectral_norm(self, seed=0, tol=1e-6, maxit=2000):
        return power_iteration_sym(lambda x: self.op @ x, self.n, tol=tol, maxit=maxit, seed=seed)


@dataclass
class CompositeProblem:
    """min over F_v of ``f(X) + lambda1 * ||X||_1``.

    ``Lf`` defaults to ``2.2 * ||C||_2`` (twice the spectral norm estimate,
    with a 10% margin since the power iteration estimate is a lower bound).
    """

    objective: QuadTraceObjective
    lambda1: float
    v: WeightVector
    Lf: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be non-negative")
        self.v = as_weight(self.v)
        if len(self.v) != self.objective.n:
            raise InvalidShape("weight vector length does not match operator size")
        if self.Lf is None:
            rho = self.objective.spectral_norm(seed=self.seed)
            self.Lf = 2.2 * rho if rho > 0 else 1.0

    @property
    def n(self):
        return self.objective.n

    def with_lambda(self, lambda1):
        return CompositeProblem(self.objective, lambda1, self.v, Lf=self.Lf, seed=self.seed)


def eval_f(prob, x):
    return prob.objective.value(x.X)


def eval_F(prob, x):
    X = x.X
    return prob.objective.value(X) + prob.lambda1 * float(np.abs(X).sum())


def egrad(prob, x):
    return prob.objective.egrad(x.X)


def rgrad(prob, x):
    return project_tangent(x, prob.objective.egrad(x.X))
