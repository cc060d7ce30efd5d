"""Fast sanity checks exercised by ``fvclust selftest``."""

from __future__ import annotations

import numpy as np

from .clustering import nmi
from .graphs import PlantedPartitionSpec, block_affinity, generate_planted
from .manifold import (
    FeasiblePoint,
    WeightVector,
    basis_apply,
    basis_transpose_apply,
    normal_dim,
    project_normal,
    project_tangent,
    retract_qr,
)
from .pipeline import RunConfig, detect_communities, ncut_partition
from .proxmap import ProxConfig, inexact_gate, solve_subproblem


def _random_point(rng, n, q):
    v = WeightVector(rng.uniform(0.5, 2.0, n))
    return FeasiblePoint.from_matrix(rng.standard_normal((n, q)), v)


def check_geometry(rng):
    x = _random_point(rng, 12, 3)
    Z = rng.standard_normal((12, 3))
    split = np.linalg.norm(project_tangent(x, Z) + project_normal(x, Z) - Z)
    u = rng.standard_normal(normal_dim(12, 3))
    iso = np.linalg.norm(basis_transpose_apply(x, basis_apply(x, u)) - u)
    y = retract_qr(x, 0.1 * project_tangent(x, Z))
    feas = np.linalg.norm(y.X.T @ y.X - np.eye(3))
    return max(split, iso, feas) < 1e-10


def check_subproblem(rng):
    x = _random_point(rng, 10, 2)
    xi = project_tangent(x, rng.standard_normal((10, 2)))
    cfg = ProxConfig.for_shape(0.5, 0.1, 10, 2)
    res = solve_subproblem(x, xi, cfg, mode="inexact")
    exact = solve_subproblem(x, xi, cfg, mode="exact")
    return (res.psi_norm <= inexact_gate(np.linalg.norm(res.eta), cfg)
            and exact.psi_norm <= cfg.exact_tol)


def check_community(seed):
    g, truth = generate_planted(PlantedPartitionSpec(120, 3, 0.05, 15, seed))
    res = detect_communities(g.adjacency(), RunConfig(q=3, seed=seed))
    return nmi(res.partition, truth) == 1.0


def check_ncut(seed):
    W, labels = block_affinity([8, 10, 12], seed=seed)
    res = ncut_partition(W, RunConfig(q=3, seed=seed))
    return nmi(res.partition, labels) == 1.0


def run_selftest(seed=0, out=print):
    """Run every check and report one line each; returns True if all pass."""
    rng = np.random.default_rng(seed)
    checks = [
        ("geometry", lambda: check_geometry(rng)),
        ("subproblem", lambda: check_subproblem(rng)),
        ("community detection", lambda: check_community(seed)),
        ("normalized cut", lambda: check_ncut(seed)),
    ]
    ok = True
    for name, fn in checks:
        try:
            passed = bool(fn())
        except Exception as e:  # report and keep checking
            passed = False
            name = f"{name} ({type(e).__name__}: {e})"
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'} {name}")
    return ok
