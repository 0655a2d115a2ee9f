"""Command line entry point: ``spikegraph <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import io
from .bounds import compute_constants, theorem2_bounds
from .contexts import admissible_set, count_contexts
from .estimator import DEFAULT_C, DEFAULT_XI, estimate_graph
from .experiments import ExperimentConfig, run_experiment
from .model import NetworkValidationError, validate_network
from .simulate import SimulationConfig, simulate, simulate_coupled

log = logging.getLogger("spikegraph")


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _out(args, name: str) -> Path:
    path = Path(args.out) if getattr(args, "out", None) else Path(args.out_dir or ".") / name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args):
    net = validate_network(io.load_spec(args.spec))
    raster = simulate(SimulationConfig(net, args.n, args.seed))
    path = _out(args, "raster.csv")
    io.save_raster(raster, path)
    log.info("wrote %s (%d steps x %d neurons)", path, raster.n, len(raster.neurons))


def cmd_couple(args):
    net = validate_network(io.load_spec(args.spec))
    res = simulate_coupled(SimulationConfig(net, args.n, args.seed), _ints(args.region), args.target)
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    io.save_raster(res.raster_full, out / "raster_full.csv")
    io.save_raster(res.raster_approx, out / "raster_approx.csv")
    with open(out / "discrepancy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["neuron", "first_discrepancy"])
        for k, t in res.discrepancy_times.items():
            w.writerow([k, "" if t is None else t])
    print(f"target {args.target}: first discrepancy {res.discrepancy_times[args.target]}")


def cmd_count(args):
    raster = io.load_raster(args.raster)
    table = count_contexts(raster, args.target, ell_max=args.ell_max)
    path = _out(args, "table.csv")
    io.save_table(table, path)
    T = admissible_set(table, args.xi)
    print(f"{len(table)} contexts observed, {len(T)} admissible at xi={args.xi}")


def cmd_estimate(args):
    raster = io.load_raster(args.raster)
    eps = args.eps if args.eps == "auto" else float(args.eps)
    graph = estimate_graph(raster, args.xi, eps, args.c, ell_max=args.ell_max)
    path = _out(args, "graph.csv")
    io.save_graph(graph, path)
    for s, t in sorted(graph.edge_set):
        print(f"{s} -> {t}")


def cmd_bounds(args):
    net = validate_network(io.load_spec(args.spec))
    region = _ints(args.region) if args.region else None
    consts = compute_constants(net, args.target, region)
    report = theorem2_bounds(args.n, args.xi, args.eps, consts, args.nu)
    path = _out(args, "report.json")
    io.save_report(report, path)
    for name in ("overestimation", "underestimation", "hoeffding", "coupling"):
        bv = getattr(report, name)
        print(f"{name}: raw={bv.raw} clamped={bv.clamped} {bv.note}".rstrip())


def cmd_experiment(args):
    cfg = ExperimentConfig.from_json(args.config)
    cfg.threads = args.threads
    if args.replicates is not None:
        cfg.replicates = args.replicates
    if args.seed_given:
        cfg.seed = args.seed
    cfg.out_dir = args.out_dir or cfg.out_dir or "."
    report = run_experiment(cfg)
    sys.stdout.write(report.to_csv())


def cmd_bench(args):
    cfg = ExperimentConfig(
        kind="runtime",
        n_grid=_ints(args.n_grid),
        region_size=args.width,
        repeats=args.repeats,
        seed=args.seed,
        out_dir=args.out_dir,
    )
    report = run_experiment(cfg)
    sys.stdout.write(report.to_csv())
    print(f"fitted log-log slope: {report.slope:.3f}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(
        prog="spikegraph",
        description="Simulate spiking networks, estimate their interaction graph and evaluate error bounds.",
        epilog="Exit codes: 0 success, 1 validation error, 2 I/O error.",
    )
    p.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for replicates")
    p.add_argument("--out-dir", default=None, help="directory for output files")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="sample a spike raster")
    s.add_argument("--spec", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("couple", parents=[common], help="coupled full / fixed-range trajectories")
    s.add_argument("--spec", required=True)
    s.add_argument("--region", required=True, help="comma-separated neuron ids")
    s.add_argument("--target", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.set_defaults(func=cmd_couple)

    s = sub.add_parser("count", parents=[common], help="context counts for one target")
    s.add_argument("--raster", required=True)
    s.add_argument("--target", type=int, required=True)
    s.add_argument("--xi", type=float, default=DEFAULT_XI)
    s.add_argument("--ell-max", type=int, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_count)

    s = sub.add_parser("estimate", parents=[common], help="estimate the interaction graph")
    s.add_argument("--raster", required=True)
    s.add_argument("--xi", type=float, default=DEFAULT_XI)
    s.add_argument("--eps", default="auto", help="'auto' for c * n^(-xi/2), or a number")
    s.add_argument("--c", type=float, default=DEFAULT_C)
    s.add_argument("--ell-max", type=int, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("bounds", parents=[common], help="evaluate the error bounds")
    s.add_argument("--spec", required=True)
    s.add_argument("--region", default=None)
    s.add_argument("--target", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--xi", type=float, default=DEFAULT_XI)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--nu", type=float, default=0.5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo experiment")
    s.add_argument("--config", required=True, help="JSON experiment config")
    s.add_argument("--replicates", type=int, default=None)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("bench", parents=[common], help="counting runtime benchmark")
    s.add_argument("--n-grid", default="1000,2000,4000,8000")
    s.add_argument("--width", type=int, default=3)
    s.add_argument("--repeats", type=int, default=3)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    try:
        args.func(args)
    except (io.ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NetworkValidationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
