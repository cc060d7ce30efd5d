"""scikit-learn style front ends.

Both estimators are transductive, like :class:`sklearn.cluster.SpectralClustering`:
they label the vertices of the graph passed to ``fit`` and expose
``fit_predict`` rather than an out-of-sample ``predict``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .clustering import ncut_value
from .graphs import build_affinity
from .pipeline import NCUT_SCHEDULE, RunConfig, detect_communities, ncut_partition


def _check_square_affinity(X, name):
    X = check_array(X, accept_sparse="csr", dtype=float, ensure_min_samples=2)
    if X.shape[0] != X.shape[1]:
        raise ValueError(f"{name} must be square, got shape {X.shape}")
    X = sp.csr_matrix(X)
    if X.nnz and X.data.min() < 0:
        raise ValueError(f"{name} must be non-negative")
    if abs(X - X.T).max() > 1e-12 * max(1.0, abs(X).max()):
        raise ValueError(f"{name} must be symmetric")
    return X


class SparseCommunityDetection(ClusterMixin, BaseEstimator):
    """Community detection by sparse modularity maximization.

    Parameters
    ----------
    n_clusters : int
        Number of communities q.
    lambda1 : float
        Weight of the L1 penalty.
    mode : {"inexact", "exact"}
        Accuracy of the proximal subproblem solves.
    init : {"spectral", "random"}
    max_iter : int
        Cap on outer iterations.
    stop_ratio : float
        Relative reduction of the safeguard direction norm that stops the solver.
    random_state : int
    retries : int
        Extra random restarts when rounding leaves a community empty.

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
    embedding_ : ndarray of shape (n, q)
        Final point of the solver.
    report_ : SolveReport
    n_iter_ : int
    """

    def __init__(self, n_clusters=2, lambda1=0.3, mode="inexact", init="spectral",
                 max_iter=1000, stop_ratio=1e-3, random_state=0, retries=3):
        self.n_clusters = n_clusters
        self.lambda1 = lambda1
        self.mode = mode
        self.init = init
        self.max_iter = max_iter
        self.stop_ratio = stop_ratio
        self.random_state = random_state
        self.retries = retries

    def _run_config(self):
        return RunConfig(q=self.n_clusters, lambda1=self.lambda1, mode=self.mode,
                         seed=self.random_state, init=self.init, max_iter=self.max_iter,
                         stop_ratio=self.stop_ratio, retries=self.retries)

    def fit(self, X, y=None):
        """Fit on a symmetric adjacency matrix ``X`` of shape (n, n)."""
        A = _check_square_affinity(X, "adjacency")
        res = detect_communities(A, self._run_config())
        self.labels_ = np.asarray(res.partition.labels)
        self.embedding_ = np.asarray(res.report.final_x.X)
        self.report_ = res.report
        self.n_iter_ = res.report.iters
        self.objective_ = res.report.F_final
        return self


class NormalizedCutClustering(ClusterMixin, BaseEstimator):
    """Normalized-cut clustering refined by weighted kernel k-means.

    Parameters
    ----------
    n_clusters : int
    affinity : {"precomputed", "image"}
        ``"precomputed"`` expects a symmetric affinity matrix; ``"image"``
        expects a 2-D grayscale array in ``[0, 1]`` and builds the pixel
        affinity from ``radius``, ``sigma_I`` and ``sigma_X``.
    lambdas : sequence of float
        Continuation schedule for the L1 weight.
    radius, sigma_I, sigma_X : float
        Pixel affinity parameters, used with ``affinity="image"``.
    mode, init, max_iter, stop_ratio, random_state
        Solver settings, as in :class:`SparseCommunityDetection`.
    kmeans_iter : int
        Sweeps of weighted kernel k-means.

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
    rounded_labels_ : ndarray of shape (n,)
        Partition before the kernel k-means refinement.
    embedding_ : ndarray of shape (n, q)
    association_ : float
        Normalized association ``sum_c links(c, c) / deg(c)`` of ``labels_``.
    """

    def __init__(self, n_clusters=2, affinity="precomputed", lambdas=NCUT_SCHEDULE,
                 radius=5, sigma_I=0.1, sigma_X=4.0, mode="inexact", init="spectral",
                 max_iter=1000, stop_ratio=1e-3, random_state=0, kmeans_iter=100):
        self.n_clusters = n_clusters
        self.affinity = affinity
        self.lambdas = lambdas
        self.radius = radius
        self.sigma_I = sigma_I
        self.sigma_X = sigma_X
        self.mode = mode
        self.init = init
        self.max_iter = max_iter
        self.stop_ratio = stop_ratio
        self.random_state = random_state
        self.kmeans_iter = kmeans_iter

    def fit(self, X, y=None):
        if self.affinity == "image":
            img = check_array(X, dtype=float, ensure_min_samples=1)
            W = build_affinity(img, self.radius, self.sigma_I, self.sigma_X)
        elif self.affinity == "precomputed":
            W = _check_square_affinity(X, "affinity")
        else:
            raise ValueError(f"unknown affinity {self.affinity!r}")
        cfg = RunConfig(q=self.n_clusters, mode=self.mode, seed=self.random_state,
                        init=self.init, max_iter=self.max_iter, stop_ratio=self.stop_ratio,
                        lambdas=tuple(self.lambdas), kmeans_iter=self.kmeans_iter)
        res = ncut_partition(W, cfg)
        self.affinity_matrix_ = W
        self.labels_ = np.asarray(res.partition.labels)
        self.rounded_labels_ = np.asarray(res.rounded.labels)
        self.embedding_ = np.asarray(res.final_x.X)
        self.n_iter_ = sum(r.iters for r in res.reports)
        self.association_ = ncut_value(res.partition, W)
        return self

    def association(self):
        check_is_fitted(self, "labels_")
        return self.association_
