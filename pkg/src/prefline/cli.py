"""Command-line front door: benchmarks, analyses, and the live service."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import (ExperimentConfig, load_posterior_csv,
                          load_visits_csv, run_experiment, run_noise_sweep,
                          run_scaling, visitation_correlation,
                          write_correlation_csv, write_experiment_csvs)
from .gait import (build_pairs, load_preferences_csv, load_trajectory_csv,
                   simulate_lipm, write_report_csv, write_trajectory_csv)

_OBJECTIVES = {"h3": "hartmann3", "h6": "hartmann6", "poly": "polynomial"}


def _add_bench_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--objective", choices=sorted(_OBJECTIVES),
                        default="h3", help="benchmark objective")
    parser.add_argument("--dims", type=int, default=None,
                        help="dimensions (required for poly)")
    parser.add_argument("--granularity", type=int, default=30,
                        help="points per line")
    parser.add_argument("--iters", type=int, default=100,
                        help="feedback iterations per run")
    parser.add_argument("--runs", type=int, default=30,
                        help="repeated runs")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--poly-quadratic", action="store_true",
                        help="with --objective poly: add squared terms")
    parser.add_argument("--out", type=Path, required=True,
                        help="output directory for CSV artifacts")


def _bench_config(args) -> ExperimentConfig:
    objective = _OBJECTIVES[args.objective]
    if getattr(args, "poly_quadratic", False):
        if args.objective != "poly":
            raise SystemExit("--poly-quadratic only applies to --objective poly")
        objective = "polynomial2"
    return ExperimentConfig(
        objective=objective, dims=args.dims,
        granularity=args.granularity, iterations=args.iters,
        runs=args.runs, noise=getattr(args, "noise_ch", 0.0),
        coactive=getattr(args, "coactive", False), seed=args.seed,
        out=args.out)


def _cmd_bench(args) -> int:
    config = _bench_config(args)
    result = run_experiment(config)
    write_experiment_csvs(result, args.out)
    final = result.sampled_matrix()[:, -1]
    print(f"wrote {args.out}; final sampled objective "
          f"mean {final.mean():.4f} sd {final.std():.4f}")
    return 0


def _cmd_noise_sweep(args) -> int:
    levels = [float(v) for v in args.ch_list.split(",") if v]
    if not levels:
        print("--ch-list must name at least one noise level", file=sys.stderr)
        return 2
    config = _bench_config(args)
    run_noise_sweep(config, levels)
    print(f"wrote {args.out}/noise_sweep.csv and per-level directories")
    return 0


def _cmd_scaling(args) -> int:
    dims_list = [int(v) for v in args.dims_list.split(",") if v]
    if not dims_list:
        print("--dims-list must name at least one dimension", file=sys.stderr)
        return 2
    rows = run_scaling(dims_list, granularity=args.granularity,
                       iterations=args.iters, runs=args.runs,
                       seed=args.seed, out=args.out)
    for row in rows:
        tail = "skipped" if row.skipped else f"{row.mean_iter_ms:.2f} ms/iter"
        print(f"{row.algo} d={row.dims}: {tail}")
    return 0


def _cmd_correlate(args) -> int:
    visits = load_visits_csv(args.trace_dir / "visits.csv")
    points, means = load_posterior_csv(args.trace_dir / "posterior.csv")
    rows, r, p = visitation_correlation(visits, points, means, bins=args.bins)
    out = args.trace_dir / "correlation.csv"
    write_correlation_csv(out, rows, r, p)
    print(f"wrote {out}; r={r:.4f} p={p:.3g}")
    return 0


def _cmd_fit_cost(args) -> int:
    trajectories = {}
    for path in sorted(args.traj_dir.glob("*.csv")):
        traj = load_trajectory_csv(path)
        trajectories[traj.gait_id] = traj
    if not trajectories:
        print(f"no trajectory CSVs under {args.traj_dir}", file=sys.stderr)
        return 2
    prefs = load_preferences_csv(args.prefs)
    try:
        pairs = build_pairs(trajectories, prefs)
        write_report_csv(args.out, pairs, holdout=args.holdout)
    except (KeyError, ValueError) as exc:
        print(f"fit-cost: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(pairs)} preference pairs)")
    return 0


def _cmd_simulate_lipm(args) -> int:
    traj = simulate_lipm(
        args.z0, args.duration, args.dt,
        initial_state=(args.x0, args.y0, args.vx0, args.vy0),
        cop=(args.cop_x, args.cop_y), com_goal=(args.goal_x, args.goal_y),
        foot=(args.foot_x, args.foot_y),
        foot_goal=(args.foot_goal_x, args.foot_goal_y),
        gait_id=args.gait_id)
    write_trajectory_csv(args.out, traj)
    print(f"wrote {args.out} ({len(traj)} samples)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(args.log_dir), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefline",
        description="preference-based line-subspace Bayesian optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="simulation benchmark -> CSVs")
    _add_bench_flags(bench)
    bench.add_argument("--noise-ch", type=float, default=0.0,
                       help="subject preference noise scale (0 = noiseless)")
    bench.add_argument("--coactive", action="store_true",
                       help="subject also offers coactive suggestions")
    bench.set_defaults(func=_cmd_bench)

    sweep = sub.add_parser("noise-sweep",
                           help="benchmark across subject noise levels")
    _add_bench_flags(sweep)
    sweep.add_argument("--ch-list", required=True,
                       help="comma-separated noise scales, e.g. 0.1,0.5,2.0")
    sweep.add_argument("--coactive", action="store_true")
    sweep.set_defaults(func=_cmd_noise_sweep)

    scaling = sub.add_parser("scaling",
                             help="per-iteration runtime vs a full grid")
    scaling.add_argument("--dims-list", required=True,
                         help="comma-separated dimensions, e.g. 2,3,4,5,6")
    scaling.add_argument("--granularity", type=int, default=10)
    scaling.add_argument("--iters", type=int, default=20)
    scaling.add_argument("--runs", type=int, default=5)
    scaling.add_argument("--seed", type=int, default=0)
    scaling.add_argument("--out", type=Path, default=None,
                         help="directory for scaling.csv (optional)")
    scaling.set_defaults(func=_cmd_scaling)

    correlate = sub.add_parser(
        "correlate", help="visit-count vs posterior-utility correlation")
    correlate.add_argument("--trace-dir", type=Path, required=True,
                           help="bench output directory")
    correlate.add_argument("--bins", type=int, default=10)
    correlate.set_defaults(func=_cmd_correlate)

    fit = sub.add_parser("fit-cost",
                         help="fit cost weights from gait preferences")
    fit.add_argument("--traj-dir", type=Path, required=True,
                     help="directory of trajectory CSVs")
    fit.add_argument("--prefs", type=Path, required=True,
                     help="preferences CSV")
    fit.add_argument("--out", type=Path, required=True,
                     help="report CSV destination")
    fit.add_argument("--holdout", action="store_true",
                     help="also score leave-one-subject-out accuracy")
    fit.set_defaults(func=_cmd_fit_cost)

    sim = sub.add_parser("simulate-lipm",
                         help="integrate a pendulum gait to a trajectory CSV")
    sim.add_argument("--z0", type=float, required=True,
                     help="pendulum height in meters")
    sim.add_argument("--duration", type=float, required=True)
    sim.add_argument("--dt", type=float, required=True)
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--x0", type=float, default=0.05)
    sim.add_argument("--y0", type=float, default=0.0)
    sim.add_argument("--vx0", type=float, default=0.0)
    sim.add_argument("--vy0", type=float, default=0.0)
    sim.add_argument("--cop-x", type=float, default=0.0)
    sim.add_argument("--cop-y", type=float, default=0.0)
    sim.add_argument("--goal-x", type=float, default=0.0)
    sim.add_argument("--goal-y", type=float, default=0.0)
    sim.add_argument("--foot-x", type=float, default=0.0)
    sim.add_argument("--foot-y", type=float, default=0.0)
    sim.add_argument("--foot-goal-x", type=float, default=0.2)
    sim.add_argument("--foot-goal-y", type=float, default=0.0)
    sim.add_argument("--gait-id", default="lipm")
    sim.set_defaults(func=_cmd_simulate_lipm)

    serve = sub.add_parser("serve", help="run the live session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--log-dir", type=Path, default=Path("sessions"),
                       help="directory for session event logs")
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
