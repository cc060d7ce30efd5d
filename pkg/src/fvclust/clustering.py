"""Rounding to hard assignments, agreement metrics and kernel k-means refinement."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .exceptions import EmptyCluster, EmptyGraph, InvalidShape, SizeMismatch
from .manifold import FeasiblePoint, as_weight

log = logging.getLogger(__name__)


class Partition:
    """Hard clustering with labels in ``0..q-1``.

    Parameters
    ----------
    labels : array-like of int, shape (n,)
    q : int, optional
        Number of clusters. Defaults to ``max(labels) + 1``.
    """

    def __init__(self, labels, q=None):
        labels = np.asarray(labels)
        if labels.ndim != 1 or labels.size == 0:
            raise InvalidShape("labels must be a non-empty 1-D array")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ValueError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.min() < 0:
            raise ValueError("labels must be non-negative")
        top = int(labels.max()) + 1
        q = top if q is None else int(q)
        if top > q:
            raise ValueError(f"label {top - 1} out of range for q={q}")
        labels.setflags(write=False)
        self.labels = labels
        self.q = q

    @property
    def n(self):
        return self.labels.size

    def sizes(self):
        return np.bincount(self.labels, minlength=self.q)

    def n_clusters(self):
        """Number of non-empty clusters."""
        return int(np.count_nonzero(self.sizes()))

    def compact(self):
        """Relabel so that the used labels are ``0..k-1`` in first-seen order."""
        _, first, inv = np.unique(self.labels, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return Partition(order[inv], len(first))

    def indicator(self):
        """0/1 sparse indicator matrix of shape (n, q)."""
        n = self.n
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.labels)), shape=(n, self.q))

    def __eq__(self, other):
        return isinstance(other, Partition) and self.q == other.q and np.array_equal(
            self.labels, other.labels
        )

    def __repr__(self):
        return f"Partition(n={self.n}, q={self.q})"


def as_partition(p):
    return p if isinstance(p, Partition) else Partition(p)


def assignment_matrix(p, v):
    """Point of the assignment set: ``Y_ij = v_i / ||v_{C_j}||`` for ``i in C_j``.

    Raises ``EmptyCluster`` if a column would be empty.
    """
    p = as_partition(p)
    v = as_weight(v)
    if p.n != len(v):
        raise SizeMismatch("partition and weight vector differ in length")
    norms = np.sqrt(np.bincount(p.labels, weights=v.v**2, minlength=p.q))
    if np.any(norms == 0):
        empty = np.flatnonzero(norms == 0)
        raise EmptyCluster(f"cluster(s) {empty.tolist()} received no rows", partition=p)
    vals = v.v / norms[p.labels]
    return sp.csr_matrix((vals, (np.arange(p.n), p.labels)), shape=(p.n, p.q))


def embed(p, v):
    """Assignment matrix of ``p`` as a :class:`FeasiblePoint`."""
    return FeasiblePoint(assignment_matrix(p, v).toarray(), v)


def round_to_assignment(x, v=None):
    """Nearest assignment-set point to a feasible ``x``.

    Each row goes to the column holding its largest-magnitude entry (lowest
    column index on ties). Since ``v`` is positive, dividing row ``i`` by
    ``v_i`` does not change the argmax. Columns are then normalized against
    ``v`` with all entries positive, which leaves ``f`` unchanged because
    ``f`` is invariant under column sign flips.

    Returns
    -------
    partition : Partition
    Y : scipy.sparse.csr_matrix of shape (n, q)
    """
    X = x.X if isinstance(x, FeasiblePoint) else np.asarray(x, dtype=float)
    if v is None:
        v = x.v
    labels = np.argmax(np.abs(X), axis=1)
    p = Partition(labels, X.shape[1])
    return p, assignment_matrix(p, v)


def contingency(p, g):
    p, g = as_partition(p), as_partition(g)
    if p.n != g.n:
        raise SizeMismatch(f"partitions have {p.n} and {g.n} elements")
    _, a = np.unique(p.labels, return_inverse=True)
    _, b = np.unique(g.labels, return_inverse=True)
    ka, kb = a.max() + 1, b.max() + 1
    return np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb).astype(float)


def _entropy(counts, n):
    c = counts[counts > 0] / n
    return float(-np.sum(c * np.log(c)))


def _mutual_info(C):
    n = C.sum()
    a, b = C.sum(axis=1), C.sum(axis=0)
    i, j = np.nonzero(C)
    nij = C[i, j]
    return float(np.sum(nij / n * (np.log(nij * n) - np.log(a[i] * b[j]))))


def _is_permutation(C):
    return C.shape[0] == C.shape[1] and np.count_nonzero(C) == C.shape[0]


def nmi(p, g):
    """Normalized mutual information ``2 I / (H(p) + H(g))`` (natural logs)."""
    C = contingency(p, g)
    if _is_permutation(C):
        return 1.0
    n = C.sum()
    h = _entropy(C.sum(axis=1), n) + _entropy(C.sum(axis=0), n)
    if h <= 0.0:
        return 0.0
    return float(np.clip(2.0 * _mutual_info(C) / h, 0.0, 1.0))


def expected_mutual_info(a, b, n):
    """Expected mutual information under the hypergeometric model.

    ``a`` and ``b`` are the cluster sizes of the two partitions.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = float(n)
    lg_n = gammaln(n + 1)
    emi = 0.0
    for ai in a:
        for bj in b:
            lo = max(1.0, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            k = np.arange(lo, hi + 1)
            logp = (
                gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(k + 1) - gammaln(ai - k + 1) - gammaln(bj - k + 1)
                - gammaln(n - ai - bj + k + 1)
            )
            emi += float(np.sum(k / n * np.log(n * k / (ai * bj)) * np.exp(logp)))
    return emi


def ami(p, g):
    """Adjusted mutual information with the arithmetic mean of entropies."""
    C = contingency(p, g)
    if _is_permutation(C):
        return 1.0
    n = C.sum()
    a, b = C.sum(axis=1), C.sum(axis=0)
    mi = _mutual_info(C)
    emi = expected_mutual_info(a, b, n)
    denom = 0.5 * (_entropy(a, n) + _entropy(b, n)) - emi
    if abs(denom) <= 1e-15:
        return 0.0
    return float((mi - emi) / denom)


def purity(p, g):
    """Purity of the finer partition against the coarser one.

    With equal cluster counts both orders are computed and the larger
    value is returned.
    """
    C = contingency(p, g)
    n = C.sum()
    rows = C.max(axis=1).sum() / n
    cols = C.max(axis=0).sum() / n
    if C.shape[0] > C.shape[1]:
        return float(rows)
    if C.shape[0] < C.shape[1]:
        return float(cols)
    return float(max(rows, cols))


def modularity_Q(p, A):
    """Newman modularity of a hard partition of the graph ``A``."""
    p = as_partition(p)
    A = sp.csr_matrix(A, dtype=float)
    if A.shape != (p.n, p.n):
        raise SizeMismatch("adjacency and partition sizes differ")
    d = np.asarray(A.sum(axis=1)).ravel()
    two_m = d.sum()
    if two_m <= 0:
        raise EmptyGraph("graph has no edges")
    Z = p.indicator()
    within = np.asarray((Z.T @ (A @ Z)).diagonal()).ravel()
    deg = np.bincount(p.labels, weights=d, minlength=p.q)
    return float(np.sum(within - deg**2 / two_m) / two_m)


@dataclass
class MetricsReport:
    nmi: float
    ami: float
    purity: float
    modularity_Q: float | None = None

    def to_dict(self):
        return asdict(self)


def evaluate(pred, truth, A=None):
    pred, truth = as_partition(pred), as_partition(truth)
    return MetricsReport(
        nmi=nmi(pred, truth),
        ami=ami(pred, truth),
        purity=purity(pred, truth),
        modularity_Q=None if A is None else modularity_Q(pred, A),
    )


# --- weighted kernel k-means -------------------------------------------------


def ncut_kernel(W, sigma=1.0):
    """Kernel ``sigma D^-1 + D^-1 W D^-1`` and weights ``d`` for normalized cut.

    Weighted kernel k-means with this pair minimizes the normalized cut; with
    ``sigma = 1`` the kernel is positive semidefinite.
    """
    W = sp.csr_matrix(W, dtype=float)
    d = np.asarray(W.sum(axis=1)).ravel()
    if np.any(d <= 0):
        raise ValueError("affinity has isolated vertices")
    Dinv = sp.diags(1.0 / d)
    K = sp.csr_matrix(Dinv @ W @ Dinv + sigma * Dinv)
    return K, d


def _kernel_diag(K):
    if hasattr(K, "diagonal"):
        return np.asarray(K.diagonal(), dtype=float)
    return np.diag(np.asarray(K, dtype=float))


def _cluster_terms(K, w, labels, q):
    n = labels.size
    Zw = sp.csr_matrix((w, (np.arange(n), labels)), shape=(n, q))
    KWZ = np.asarray(K @ Zw.toarray())
    s = np.bincount(labels, weights=w, minlength=q)
    T = np.bincount(labels, weights=w * KWZ[np.arange(n), labels], minlength=q)
    return KWZ, s, T


def kernel_kmeans_objective(K, w, labels, q):
    """``sum_c sum_{i in c} w_i ||phi_i - m_c||^2`` in kernel form."""
    labels = np.asarray(labels)
    w = np.asarray(w, dtype=float)
    _, s, T = _cluster_terms(K, w, labels, q)
    nz = s > 0
    return float(np.sum(w * _kernel_diag(K)) - np.sum(T[nz] / s[nz]))


def _distances(K, w, labels, q, kdiag):
    KWZ, s, T = _cluster_terms(K, w, labels, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        D = kdiag[:, None] - 2.0 * KWZ / s + T / s**2
    D[:, s <= 0] = np.inf
    return D


def _repair_empty(labels, w, q, D):
    labels = labels.copy()
    for c in range(q):
        counts = np.bincount(labels, minlength=q)
        if counts[c] > 0:
            continue
        fit = D[np.arange(labels.size), labels]
        fit = np.where(counts[labels] > 1, fit, -np.inf)
        worst = int(np.argmax(fit))
        if not np.isfinite(fit[worst]):
            break
        labels[worst] = c
        D[worst] = np.inf
        D[worst, c] = 0.0
    return labels


def weighted_kernel_kmeans(K, weights, init, max_iter=100, return_history=False):
    """Batch weighted kernel k-means started from ``init``.

    A sweep is kept only if it strictly lowers the objective, so the
    objective never increases. Empty clusters are refilled with the point
    that fits its own cluster worst.
    """
    init = as_partition(init)
    w = np.asarray(weights, dtype=float)
    if w.shape != (init.n,) or np.any(w <= 0):
        raise ValueError("weights must be positive with one entry per point")
    q = init.q
    kdiag = _kernel_diag(K)
    labels = np.array(init.labels)
    if np.any(np.bincount(labels, minlength=q) == 0):
        labels = _repair_empty(labels, w, q, _distances(K, w, labels, q, kdiag))
    obj = kernel_kmeans_objective(K, w, labels, q)
    history = [obj]
    for _ in range(max_iter):
        D = _distances(K, w, labels, q, kdiag)
        cur = D[np.arange(labels.size), labels]
        new = np.argmin(D, axis=1)
        # keep the current label unless another cluster is strictly closer
        new = np.where(D[np.arange(labels.size), new] < cur, new, labels)
        if np.any(np.bincount(new, minlength=q) == 0):
            new = _repair_empty(new, w, q, D)
        if np.array_equal(new, labels):
            break
        new_obj = kernel_kmeans_objective(K, w, new, q)
        if not new_obj < obj:
            break
        labels, obj = new, new_obj
        history.append(obj)
    out = Partition(labels, q)
    return (out, history) if return_history else out


def ncut_value(p, W):
    """``-f_NC`` at the assignment point of ``p``: ``sum_c links(c, c) / deg(c)``."""
    p = as_partition(p)
    W = sp.csr_matrix(W, dtype=float)
    d = np.asarray(W.sum(axis=1)).ravel()
    Z = p.indicator()
    within = np.asarray((Z.T @ (W @ Z)).diagonal()).ravel()
    deg = np.bincount(p.labels, weights=d, minlength=p.q)
    nz = deg > 0
    return float(np.sum(within[nz] / deg[nz]))
