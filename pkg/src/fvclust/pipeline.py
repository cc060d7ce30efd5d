"""End-to-end runs: build the objective, solve, round, score and record."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import jsonschema
import numpy as np
import scipy.sparse as sp

from . import __version__
from .clustering import (
    Partition,
    as_partition,
    evaluate,
    modularity_Q,
    ncut_kernel,
    ncut_value,
    round_to_assignment,
    weighted_kernel_kmeans,
)
from .exceptions import EmptyCluster, FvClustError
from .graphs import build_affinity
from .manifold import WeightVector
from .objectives import CompositeProblem, QuadTraceObjective, modularity_operator, ncut_operator
from .solver import SolverConfig, initial_point, solve

log = logging.getLogger(__name__)

NCUT_SCHEDULE = (0.01, 0.04, 0.2)


@dataclass
class RunConfig:
    """Settings shared by the community-detection and normalized-cut runs."""

    q: int
    lambda1: float = 0.3
    mode: str = "inexact"
    seed: int = 0
    init: str = "spectral"
    max_iter: int = 1000
    stop_ratio: float = 1e-3
    retraction: str = "qr"
    retries: int = 3
    lambdas: tuple = NCUT_SCHEDULE
    kmeans_iter: int = 100

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("q must be at least 2")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be non-negative")
        self.lambdas = tuple(float(v) for v in self.lambdas)

    def solver_config(self, seed=None):
        return SolverConfig(
            mode=self.mode,
            seed=self.seed if seed is None else seed,
            max_outer=self.max_iter,
            stop_ratio=self.stop_ratio,
            retraction=self.retraction,
        )

    def to_dict(self):
        d = asdict(self)
        d["lambdas"] = list(self.lambdas)
        return d


@dataclass
class RunRecord:
    """Serializable outcome of a single run.

    ``timing`` holds everything that legitimately differs between two
    otherwise identical runs (timestamps and wall-clock durations).
    """

    kind: str
    config: dict
    input: dict
    report: dict | None = None
    metrics: dict | None = None
    labels: list | None = None
    trace: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    error: dict | None = None
    timing: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def ok(self):
        return self.error is None

    def partition(self):
        return None if self.labels is None else Partition(self.labels, self.config["q"])

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        validate_record(d)
        return cls(**d)


_COUNTS = {"type": "integer", "minimum": 0}
_NUM = {"type": ["number", "null"]}

RECORD_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "RunRecord",
    "type": "object",
    "required": ["kind", "config", "input", "report", "metrics", "labels", "error",
                 "timing", "version", "trace", "extra"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["community_detection", "ncut"]},
        "version": {"type": "string"},
        "config": {"type": "object", "required": ["q", "lambda1", "mode", "seed", "init"]},
        "input": {"type": "object", "required": ["n"]},
        "report": {
            "type": ["object", "null"],
            "required": ["iter", "SSNiter", "nf", "ng", "nR", "nSG", "F", "eta_ratio",
                         "status", "converged"],
            "properties": {
                "iter": _COUNTS, "SSNiter": _COUNTS, "nf": _COUNTS, "ng": _COUNTS,
                "nR": _COUNTS, "nSG": _COUNTS, "F": {"type": "number"}, "eta_ratio": _NUM,
                "status": {"enum": ["ok", "max_iter", "stalled"]},
                "converged": {"type": "boolean"},
            },
        },
        "metrics": {
            "type": ["object", "null"],
            "properties": {"nmi": _NUM, "ami": _NUM, "purity": _NUM, "modularity_Q": _NUM},
        },
        "labels": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0}},
        "trace": {"type": "array", "items": {"type": "object"}},
        "extra": {"type": "object"},
        "error": {
            "type": ["object", "null"],
            "required": ["type", "message"],
            "properties": {"type": {"type": "string"}, "message": {"type": "string"}},
        },
        "timing": {"type": "object"},
    },
}


def validate_record(d):
    jsonschema.validate(d, RECORD_SCHEMA)


def _now():
    return datetime.now(timezone.utc).isoformat()


def _report_dict(rep, stage_reports=()):
    reps = list(stage_reports) + [rep]
    counts = {key: sum(r.counters()[key] for r in reps)
              for key in ("iter", "SSNiter", "nf", "ng", "nR", "nSG")}
    return {
        **counts,
        "F": float(rep.F_final),
        "eta_ratio": None if not np.isfinite(rep.eta_ratio) else float(rep.eta_ratio),
        "status": rep.status,
        "converged": bool(rep.converged),
        "line_search_failures": int(sum(r.line_search_failures for r in reps)),
        "stalled_subproblems": int(sum(r.stalled_subproblems for r in reps)),
    }


def _trace(rep, stage=0):
    return [{"stage": stage, "k": int(c["k"]), "F": float(c["F"]), "eta": float(c["eta"]),
             "took_effect": bool(c["took_effect"])} for c in rep.checkpoints]


def _error(exc):
    return {"type": type(exc).__name__, "message": str(exc)}


@dataclass
class CommunityResult:
    report: object
    partition: Partition
    attempts: int


@dataclass
class NcutResult:
    reports: list
    rounded: Partition
    partition: Partition
    kmeans_history: list
    final_x: object


def detect_communities(A, cfg):
    """Maximize sparse modularity on F_1 and round the solution.

    When rounding leaves a cluster empty the solve is repeated from a random
    start with the next seed, up to ``cfg.retries`` times; the last
    ``EmptyCluster`` is raised if every attempt fails.
    """
    A = sp.csr_matrix(A, dtype=float)
    prob = CompositeProblem(QuadTraceObjective(modularity_operator(A), "modularity"),
                            cfg.lambda1, WeightVector.ones(A.shape[0]), seed=cfg.seed)
    last = None
    for attempt in range(cfg.retries + 1):
        init = cfg.init if attempt == 0 else "random"
        seed = cfg.seed + attempt
        x0 = initial_point(prob, cfg.q, init, seed)
        rep = solve(prob, x0, cfg.solver_config(seed))
        try:
            part, _ = round_to_assignment(rep.final_x)
        except EmptyCluster as exc:
            log.info("rounding left an empty cluster (attempt %d)", attempt)
            last = exc
            continue
        return CommunityResult(rep, part, attempt + 1)
    raise last


def ncut_partition(W, cfg):
    """Normalized cut by lambda continuation, rounding and kernel k-means.

    Each value in ``cfg.lambdas`` is solved in turn, warm-started from the
    previous solution. The rounded partition initializes weighted kernel
    k-means, which also repairs any empty cluster left by rounding.
    """
    W = sp.csr_matrix(W, dtype=float)
    op, v = ncut_operator(W)
    prob = CompositeProblem(QuadTraceObjective(op, "ncut"), cfg.lambdas[0], v, seed=cfg.seed)
    x = initial_point(prob, cfg.q, cfg.init, cfg.seed)
    reports = []
    for lam in cfg.lambdas:
        rep = solve(prob.with_lambda(lam), x, cfg.solver_config())
        reports.append(rep)
        x = rep.final_x
    try:
        rounded, _ = round_to_assignment(x)
    except EmptyCluster as exc:
        rounded = exc.partition
    K, d = ncut_kernel(W)
    refined, hist = weighted_kernel_kmeans(K, d, rounded, cfg.kmeans_iter, return_history=True)
    return NcutResult(reports, rounded, refined, hist, x)


def run_community_detect(graph, cfg, truth=None):
    """Community detection run recorded for serialization.

    Errors from the solver or the rounding are stored in the record rather
    than raised.
    """
    record = RunRecord(kind="community_detection", config=cfg.to_dict(),
                       input={"n": int(graph.n), "m": int(graph.m)})
    record.timing["started"] = _now()
    try:
        A = graph.adjacency()
        res = detect_communities(A, cfg)
        record.report = _report_dict(res.report)
        record.trace = _trace(res.report)
        record.labels = res.partition.labels.tolist()
        record.extra["attempts"] = res.attempts
        record.timing["solve_seconds"] = res.report.wall_time
        if truth is not None:
            record.metrics = evaluate(res.partition, truth, A).to_dict()
        else:
            record.metrics = {"nmi": None, "ami": None, "purity": None,
                              "modularity_Q": modularity_Q(res.partition, A)}
    except FvClustError as exc:
        record.error = _error(exc)
    record.timing["finished"] = _now()
    return record


def run_ncut(W, cfg, truth=None, image_shape=None):
    """Normalized-cut run recorded for serialization.

    ``W`` is a symmetric affinity; use :func:`affinity_from_image` for images.
    """
    W = sp.csr_matrix(W, dtype=float)
    record = RunRecord(kind="ncut", config=cfg.to_dict(), input={"n": int(W.shape[0])})
    if image_shape is not None:
        record.input["image_shape"] = list(image_shape)
    record.timing["started"] = _now()
    try:
        res = ncut_partition(W, cfg)
        record.report = _report_dict(res.reports[-1], res.reports[:-1])
        for stage, rep in enumerate(res.reports):
            record.trace.extend(_trace(rep, stage))
        record.labels = res.partition.labels.tolist()
        record.timing["solve_seconds"] = float(sum(r.wall_time for r in res.reports))
        full = res.rounded.n_clusters() == cfg.q
        record.extra.update({
            "ncut_assoc_rounded": ncut_value(res.rounded, W) if full else None,
            "ncut_assoc": ncut_value(res.partition, W),
            "kmeans_objective": [float(h) for h in res.kmeans_history],
            "rounded_labels": res.rounded.labels.tolist(),
        })
        if truth is not None:
            record.metrics = evaluate(res.partition, truth).to_dict()
    except FvClustError as exc:
        record.error = _error(exc)
    record.timing["finished"] = _now()
    return record


def affinity_from_image(image, radius=5, sigma_I=0.1, sigma_X=4.0):
    return build_affinity(image, radius=radius, sigma_I=sigma_I, sigma_X=sigma_X)


def compare_partitions(pred, truth, A=None):
    """Agreement metrics between two partitions (modularity when ``A`` given)."""
    return evaluate(as_partition(pred), as_partition(truth), A)


__all__ = [
    "NCUT_SCHEDULE",
    "RECORD_SCHEMA",
    "RunConfig",
    "RunRecord",
    "affinity_from_image",
    "compare_partitions",
    "detect_communities",
    "ncut_partition",
    "run_community_detect",
    "run_ncut",
    "validate_record",
]
