"""Sparse clustering by proximal gradient optimization on F_v.

F_v is the set of n x q matrices with orthonormal columns whose span
contains a fixed positive vector v. Community detection (modularity) and
normalized cut are solved as ``min f(X) + lambda ||X||_1`` over F_v with an
accelerated inexact Riemannian proximal gradient method.
"""

__version__ = "0.1.0"

from .clustering import (  # noqa: E402
    MetricsReport,
    Partition,
    ami,
    nmi,
    purity,
    round_to_assignment,
    weighted_kernel_kmeans,
)
from .estimator import NormalizedCutClustering, SparseCommunityDetection  # noqa: E402
from .manifold import FeasiblePoint, WeightVector  # noqa: E402
from .objectives import CompositeProblem, QuadTraceObjective  # noqa: E402
from .solver import SolverConfig, solve  # noqa: E402

__all__ = [
    "CompositeProblem",
    "FeasiblePoint",
    "MetricsReport",
    "NormalizedCutClustering",
    "Partition",
    "QuadTraceObjective",
    "SolverConfig",
    "SparseCommunityDetection",
    "WeightVector",
    "ami",
    "nmi",
    "purity",
    "round_to_assignment",
    "solve",
    "weighted_kernel_kmeans",
]
