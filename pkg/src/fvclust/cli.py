"""Command-line interface: ``fvclust {gen,cd,ncut,metrics,selftest}``.

Exit codes: 0 success, 2 parse error, 3 numerical failure, 4 infeasible spec.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, exceptions as exc
from .clustering import Partition
from .graphs import PlantedPartitionSpec, build_affinity, generate_planted
from .io import (
    load_edge_list,
    load_partition,
    load_pgm,
    save_edge_list,
    save_partition,
    save_pgm,
    write_csv,
    write_json,
)
from .pipeline import NCUT_SCHEDULE, RunConfig, compare_partitions, run_community_detect, run_ncut

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_SPEC = 4

log = logging.getLogger("fvclust")

_NUMERIC_ERRORS = {
    "NumericalBreakdown", "SubproblemStalled", "RankDeficient", "NotSPD",
    "DegenerateProjection", "InfeasiblePoint", "EmptyCluster", "NotOrthonormal",
}
_SPEC_ERRORS = {"InvalidSpec", "EmptyGraph", "IsolatedVertex", "SizeMismatch", "InvalidShape"}


def exit_code_for(error_type):
    if error_type in _NUMERIC_ERRORS:
        return EXIT_NUMERIC
    if error_type in _SPEC_ERRORS:
        return EXIT_SPEC
    if error_type == "ParseError":
        return EXIT_PARSE
    return EXIT_NUMERIC


def _float_list(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_solver_flags(p, default_lambda):
    p.add_argument("--q", type=int, required=True, help="number of clusters")
    p.add_argument("--lambda", dest="lambda1", type=float, default=default_lambda,
                   help="L1 weight")
    p.add_argument("--mode", choices=["inexact", "exact"], default="inexact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=["spectral", "random"], default="spectral")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--stop-ratio", type=float, default=1e-3)
    p.add_argument("--out", default="-", help="JSON record path ('-' for stdout)")
    p.add_argument("--labels-out", help="write the partition file here")
    p.add_argument("--trace-csv", help="write (k, F, ||eta||) checkpoints as CSV")
    p.add_argument("--truth", help="ground-truth partition file")


def build_parser():
    parser = argparse.ArgumentParser(prog="fvclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a planted-partition graph or a test image")
    g.add_argument("kind", choices=["planted", "image"])
    g.add_argument("--n", type=int, default=200, help="vertices (planted) or image side")
    g.add_argument("--q", type=int, default=4)
    g.add_argument("--mu-mix", type=float, default=0.1)
    g.add_argument("--avg-degree", type=float, default=20.0)
    g.add_argument("--noise", type=float, default=0.05, help="image noise level")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="edge list or PGM output path")
    g.add_argument("--truth", help="write ground-truth labels here")

    c = sub.add_parser("cd", help="community detection on an edge list")
    c.add_argument("graph")
    c.add_argument("--n", type=int, help="vertex count (default: max id + 1)")
    c.add_argument("--repeat", type=int, default=1, help="run seeds seed..seed+repeat-1")
    c.add_argument("--sweep-csv", help="one CSV row per run")
    c.add_argument("--jobs", type=int, default=1, help="worker processes for --repeat")
    _add_solver_flags(c, 0.3)

    n = sub.add_parser("ncut", help="normalized cut of a PGM image or weighted edge list")
    n.add_argument("input")
    n.add_argument("--lambdas", type=_float_list, default=NCUT_SCHEDULE,
                   help="continuation schedule, e.g. 0.01,0.04,0.2")
    n.add_argument("--radius", type=float, default=5.0)
    n.add_argument("--sigma-i", type=float, default=0.1)
    n.add_argument("--sigma-x", type=float, default=4.0)
    _add_solver_flags(n, None)

    m = sub.add_parser("metrics", help="compare two partition files")
    m.add_argument("pred")
    m.add_argument("truth")
    m.add_argument("--graph", help="edge list for the modularity score")
    m.add_argument("--out", default="-")

    s = sub.add_parser("selftest", help="quick numerical self-checks")
    s.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_gen(args):
    if args.kind == "planted":
        spec = PlantedPartitionSpec(args.n, args.q, args.mu_mix, args.avg_degree, args.seed)
        graph, truth = generate_planted(spec)
        save_edge_list(args.out, graph)
    else:
        img, truth = synthetic_image(args.n, args.q, args.noise, args.seed)
        save_pgm(args.out, img)
    if args.truth:
        save_partition(args.truth, truth)
    log.info("wrote %s", args.out)
    return EXIT_OK


def synthetic_image(side, q, noise=0.05, seed=0):
    """Square image made of ``q`` vertical bands of distinct gray levels."""
    if side < q or q < 1:
        raise exc.InvalidSpec("image side must be at least q")
    rng = np.random.default_rng(seed)
    band = np.minimum(np.arange(side) * q // side, q - 1)
    levels = (np.arange(q) + 0.5) / q
    labels = np.tile(band, (side, 1))
    img = np.clip(levels[labels] + noise * rng.standard_normal((side, side)), 0.0, 1.0)
    return img, Partition(labels.ravel(), q)


def _write_outputs(args, records):
    if len(records) == 1:
        write_json(args.out, records[0].to_dict())
    else:
        write_json(args.out, [r.to_dict() for r in records])
    rec = records[-1]
    if args.labels_out and rec.labels is not None:
        save_partition(args.labels_out, Partition(rec.labels, rec.config["q"]))
    if args.trace_csv:
        write_csv(args.trace_csv, rec.trace, ["stage", "k", "F", "eta", "took_effect"])


def _status(records):
    codes = [exit_code_for(r.error["type"]) for r in records if r.error is not None]
    for r in records:
        if r.error is not None:
            log.error("%s: %s", r.error["type"], r.error["message"])
    return max(codes) if codes else EXIT_OK


def _sweep_row(rec):
    row = {"seed": rec.config["seed"], "q": rec.config["q"], "lambda": rec.config["lambda1"],
           "mode": rec.config["mode"], "error": rec.error["type"] if rec.error else ""}
    row.update({k: (rec.report or {}).get(k) for k in
                ("iter", "SSNiter", "nf", "ng", "nR", "nSG", "F", "eta_ratio")})
    row.update({k: (rec.metrics or {}).get(k) for k in ("nmi", "ami", "purity", "modularity_Q")})
    row["seconds"] = rec.timing.get("solve_seconds")
    return row


def _check_q(q, n):
    if q < 2 or q > n:
        raise exc.InvalidSpec(f"need 2 <= q <= n, got q={q}, n={n}")


def _cmd_cd(args):
    graph = load_edge_list(args.graph, n=args.n)
    _check_q(args.q, graph.n)
    truth = load_partition(args.truth) if args.truth else None
    if truth is not None and truth.n != graph.n:
        raise exc.SizeMismatch("truth partition and graph differ in size")
    cfgs = [RunConfig(q=args.q, lambda1=args.lambda1, mode=args.mode, seed=args.seed + i,
                      init=args.init, max_iter=args.max_iter, stop_ratio=args.stop_ratio)
            for i in range(args.repeat)]
    if args.jobs > 1 and len(cfgs) > 1:
        # independent solves; results come back in seed order
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(run_community_detect, [graph] * len(cfgs), cfgs,
                                    [truth] * len(cfgs)))
    else:
        records = [run_community_detect(graph, cfg, truth) for cfg in cfgs]
    _write_outputs(args, records)
    if args.sweep_csv:
        write_csv(args.sweep_csv, [_sweep_row(r) for r in records])
    return _status(records)


def _cmd_ncut(args):
    path = Path(args.input)
    with open(path, "rb") as fh:
        is_pgm = fh.read(2) in (b"P5", b"P2")
    shape = None
    if is_pgm:
        img = load_pgm(path)
        shape = img.shape
        W = build_affinity(img, args.radius, args.sigma_i, args.sigma_x)
    else:
        graph = load_edge_list(path)
        W = graph.adjacency()
    _check_q(args.q, W.shape[0])
    lambdas = (args.lambda1,) if args.lambda1 is not None else args.lambdas
    cfg = RunConfig(q=args.q, mode=args.mode, seed=args.seed, init=args.init,
                    max_iter=args.max_iter, stop_ratio=args.stop_ratio, lambdas=lambdas,
                    lambda1=lambdas[-1])
    truth = load_partition(args.truth) if args.truth else None
    record = run_ncut(W, cfg, truth, image_shape=shape)
    _write_outputs(args, [record])
    return _status([record])


def _cmd_metrics(args):
    pred = load_partition(args.pred)
    truth = load_partition(args.truth)
    A = None
    if args.graph:
        A = load_edge_list(args.graph, n=pred.n).adjacency()
    report = compare_partitions(pred, truth, A)
    write_json(args.out, report.to_dict())
    return EXIT_OK


def _cmd_selftest(args):
    from .selftest import run_selftest

    ok = run_selftest(seed=args.seed)
    return EXIT_OK if ok else EXIT_NUMERIC


_COMMANDS = {
    "gen": _cmd_gen,
    "cd": _cmd_cd,
    "ncut": _cmd_ncut,
    "metrics": _cmd_metrics,
    "selftest": _cmd_selftest,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except exc.ParseError as e:
        log.error("parse error: %s", e)
        return EXIT_PARSE
    except (exc.InvalidSpec, exc.SizeMismatch, exc.EmptyGraph, exc.IsolatedVertex) as e:
        log.error("infeasible input: %s", e)
        return EXIT_SPEC
    except exc.FvClustError as e:
        log.error("numerical failure: %s", e)
        return EXIT_NUMERIC
    except (OSError, ValueError) as e:
        log.error("%s", e)
        return EXIT_PARSE if isinstance(e, OSError) else EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
