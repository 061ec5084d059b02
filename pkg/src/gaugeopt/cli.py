"""Command-line interface: reduce, find-interior, train, solve, bench, selftest.

Structured results go to stdout as JSON (or CSV for benchmark reports).
Exit codes: 0 success, 1 domain error (empty interior, infeasible set,
corrupt checkpoint, ...), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

import numpy as np

from .baselines import BaselineConfig
from .dcopf import (
    BENCH_METHODS,
    generate_system,
    render_figures,
    report_csv_text,
    run_benchmark,
    sample_dataset,
    series_csv_text,
    write_report_csv,
    write_series_csv,
)
from .errors import GaugeoptError
from .interior import (
    build_bfs_structures,
    find_interior_artificial,
    find_interior_bfs_average,
    find_interior_two_phase,
)
from .neural import (
    TrainConfig,
    checkpoint_metadata,
    load_checkpoint,
    pipeline_forward,
    pipeline_model,
    save_checkpoint,
    train,
)
from .problems import load_problem, problem_hash, validate
from .reduction import reduce_problem
from .selftest import run_selftest

log = logging.getLogger("gaugeopt")


def _load_vector(path):
    with open(path, "r", encoding="utf-8") as fh:
        return np.asarray(json.load(fh), dtype=float).reshape(-1)


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _load_validated_problem(path):
    problem = load_problem(path)
    report = validate(problem)
    if not report.ok:
        raise GaugeoptError("invalid problem: " + "; ".join(report.findings))
    return problem


def _cmd_reduce(args) -> int:
    problem = _load_validated_problem(args.problem)
    red = reduce_problem(problem)
    doc = {
        "a_red": red.a_red.tolist(),
        "b_mat_red": red.b_mat_red.tolist(),
        "b_vec_red": red.b_vec_red.tolist(),
        "indep_idx": red.partition.indep_idx.tolist(),
        "dep_idx": red.partition.dep_idx.tolist(),
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    _emit(doc)
    return 0


def _cmd_find_interior(args) -> int:
    problem = _load_validated_problem(args.problem)
    red = reduce_problem(problem)
    x = _load_vector(args.x)
    if args.method == "lp":
        result = find_interior_artificial(red, x, big_m=args.big_m)
    elif args.method == "bfs":
        result = find_interior_bfs_average(build_bfs_structures(red), x)
    else:  # two-phase
        if not args.phase1_model:
            raise GaugeoptError("--phase1-model is required for the two-phase finder")
        ckpt = load_checkpoint(args.phase1_model)
        result = find_interior_two_phase(red, x, ckpt.model)
    _emit({"point": result.point.tolist(), "margin": result.margin, "method": result.method})
    return 0


def _cmd_train(args) -> int:
    problem = _load_validated_problem(args.problem)
    red = reduce_problem(problem)
    with open(args.data, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    xs = np.asarray(data["x"], dtype=float)
    if xs.ndim == 1:
        xs = xs.reshape(-1, 1)
    references = None
    if args.mode == "solver":
        if "u_star" not in data:
            raise GaugeoptError("solver mode requires 'u_star' reference optima in the data file")
        references = np.asarray(data["u_star"], dtype=float)
    hidden = tuple(int(h) for h in args.hidden.split(",") if h)
    cfg = TrainConfig(
        mode="solver_in_loop" if args.mode == "solver" else "objective_only",
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        shared_interior=args.shared_interior,
    )
    model = pipeline_model(red, hidden=hidden, seed=args.seed)
    model, history = train(model, red, xs, cfg, references=references)
    metadata = checkpoint_metadata(red, epoch=args.epochs, loss_history=history)
    save_checkpoint(args.out, model, metadata)
    _emit({
        "checkpoint": args.out,
        "epochs": args.epochs,
        "final_loss": history[-1] if history else None,
    })
    return 0


def _cmd_solve(args) -> int:
    problem = _load_validated_problem(args.problem)
    red = reduce_problem(problem)
    x = _load_vector(args.x)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ckpt = load_checkpoint(args.model, expected_problem_hash=problem_hash(problem))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.u_o:
        u_o = _load_vector(args.u_o)
    else:
        u_o = find_interior_artificial(red, x).point
    u_full, _ = pipeline_forward(ckpt.model, red, x, u_o)
    _emit({
        "u": u_full.tolist(),
        "ineq_slack": problem.ineq_residual(u_full, x).tolist(),
        "eq_residual": problem.eq_residual(u_full, x).tolist(),
    })
    return 0


def _benchmark_from_args(args):
    system = generate_system(args.gens, args.loads, args.lines, seed=args.seed)
    dataset = sample_dataset(system, args.samples, fluctuation=args.fluctuation, seed=args.seed)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    unknown = [m for m in methods if m not in BENCH_METHODS]
    if unknown:
        raise GaugeoptError(f"unknown benchmark methods: {unknown}")
    baseline_cfg = BaselineConfig(
        penalty_coefficient=args.penalty_coefficient,
        dc3_step_size=args.dc3_step_size,
        dc3_inner_iters_train=args.dc3_iters,
        dc3_inner_iters_test=args.dc3_iters,
    )
    return run_benchmark(system, dataset, methods=methods, baseline_cfg=baseline_cfg,
                         seed=args.seed, epochs=args.epochs)


def _cmd_bench_dcopf(args) -> int:
    rows, series = _benchmark_from_args(args)
    if args.out:
        write_report_csv(rows, args.out)
    if args.plots:
        for path in render_figures(series, args.plots):
            log.info("wrote %s", path)
    print(report_csv_text(rows), end="")
    return 0


def _cmd_bench_plot_data(args) -> int:
    _, series = _benchmark_from_args(args)
    if args.out:
        write_series_csv(series, args.out)
    print(series_csv_text(series), end="")
    return 0


def _cmd_selftest(args) -> int:
    return run_selftest()


def _add_bench_common(parser) -> None:
    parser.add_argument("--gens", type=int, required=True)
    parser.add_argument("--loads", type=int, required=True)
    parser.add_argument("--lines", type=int, required=True)
    parser.add_argument("--samples", type=int, default=40)
    parser.add_argument("--fluctuation", type=float, default=0.10)
    parser.add_argument("--methods", default=",".join(BENCH_METHODS))
    parser.add_argument("--epochs", type=int, default=400)
    parser.add_argument("--penalty-coefficient", type=float, default=1e4)
    parser.add_argument("--dc3-step-size", type=float, default=1e-4)
    parser.add_argument("--dc3-iters", type=int, default=3)
    parser.add_argument("--out", help="CSV output path")


def build_parser() -> argparse.ArgumentParser:
    # Shared flags live on a parent parser so they are accepted after the
    # subcommand name (e.g. `bench dcopf ... --seed 1`).
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])

    parser = argparse.ArgumentParser(
        prog="gaugeopt",
        description="Feasibility-guaranteed neural surrogates for linearly "
                    "constrained optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", parents=[common],
                       help="eliminate equalities and emit the reduced problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("find-interior", parents=[common],
                       help="find a strict interior point of the reduced set")
    p.add_argument("--problem", required=True)
    p.add_argument("--x", required=True, help="JSON file with the input vector")
    p.add_argument("--method", choices=["lp", "bfs", "two-phase"], default="lp")
    p.add_argument("--big-m", type=float, default=1e4)
    p.add_argument("--phase1-model", help="checkpoint for the two-phase finder")
    p.set_defaults(func=_cmd_find_interior)

    p = sub.add_parser("train", parents=[common], help="train the constrained pipeline model")
    p.add_argument("--problem", required=True)
    p.add_argument("--data", required=True,
                   help="JSON file {'x': [[...]], 'u_star': [[...]] (solver mode)}")
    p.add_argument("--mode", choices=["solver", "objective"], required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--hidden", default="16", help="comma-separated hidden layer sizes")
    p.add_argument("--shared-interior", action="store_true",
                   help="reuse the first sample's interior point for all samples")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("solve", parents=[common], help="run one constrained prediction")
    p.add_argument("--model", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--u-o", help="JSON file overriding the interior point")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bench", help="benchmark harness")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)
    b = bench_sub.add_parser("dcopf", parents=[common], help="synthetic dispatch benchmark")
    _add_bench_common(b)
    b.add_argument("--plots", help="directory for per-instance gap figures")
    b.set_defaults(func=_cmd_bench_dcopf)
    b = bench_sub.add_parser("plot-data", parents=[common],
                             help="per-instance gap series as CSV")
    _add_bench_common(b)
    b.set_defaults(func=_cmd_bench_plot_data)

    p = sub.add_parser("selftest", parents=[common], help="run the built-in invariant suites")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()))
    try:
        return args.func(args)
    except GaugeoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
