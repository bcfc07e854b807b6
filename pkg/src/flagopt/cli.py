"""``flagopt`` command line: bench, sweep and check.

Exit status is 0 on success, 1 when an invariant fails or a line search
stalls, and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    ExperimentConfig,
    ambient_template,
    depth_template,
    run_property_suite,
    run_sweep,
    run_trajectory,
    trajectory_csv,
    trajectory_json,
    trial_paths,
)
from .signature import FlagError, FlagSignature
from .solvers import SolverConfig

MONOTONE_RTOL = 1e-12


def _dims(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers, got %r" % text)


def _span(text: str) -> list[int]:
    """``start:stop[:step]``, both ends inclusive."""
    try:
        parts = [int(x) for x in text.split(":")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected start:stop[:step], got %r" % text)
    if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] <= 0) or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError("expected start:stop[:step] with start <= stop, got %r" % text)
    step = parts[2] if len(parts) == 3 else 1
    return list(range(parts[0], parts[1] + 1, step))


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", choices=("principal", "eigenflag"), default="principal")
    p.add_argument("--solver", choices=("sd", "cg", "newton"), default="sd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--line-search", choices=("armijo", "golden"), default="armijo")
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--plot", action="store_true", help="also render a PNG next to --out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flagopt", description="Optimization on flag manifolds.")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run seeded trials and emit their trajectories")
    _solver_args(bench)
    bench.add_argument("--sig", type=_dims, default=(3, 7, 12))
    bench.add_argument("--n", type=int, default=60)
    bench.add_argument("--trials", type=int, default=1)

    sweep = sub.add_parser("sweep", help="aggregate accuracy and time over a family of flags")
    _solver_args(sweep)
    which = sweep.add_mutually_exclusive_group(required=True)
    which.add_argument("--sweep-ambient", type=_span, metavar="START:STOP[:STEP]")
    which.add_argument("--sweep-depth", type=_span, metavar="START:STOP[:STEP]")
    sweep.add_argument("--sig", type=_dims, default=(3, 9, 21), help="fixed dims for ambient sweeps")
    sweep.add_argument("--n", type=int, default=60, help="ambient dimension for depth sweeps")
    sweep.add_argument("--trials", type=int, default=10)

    check = sub.add_parser("check", help="run the randomized property suite")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--instances", type=int, default=100)
    return parser


def _config(args) -> SolverConfig:
    return SolverConfig(
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        line_search="golden_exact" if args.line_search == "golden" else "armijo",
    )


def _monotone(run) -> bool:
    fs = [r.f for r in run.result.trajectory]
    return all(b >= a - MONOTONE_RTOL * max(1.0, abs(a)) for a, b in zip(fs, fs[1:]))


def _bench(args) -> int:
    cfg = ExperimentConfig(
        problem=args.problem,
        sig=FlagSignature(args.sig, args.n),
        seed=args.seed,
        trials=args.trials,
        solver=args.solver,
        solver_config=_config(args),
        out=args.out,
        format=args.format,
    )
    runs = run_trajectory(cfg)
    if args.out is None:
        for run in runs:
            if len(runs) > 1:
                print("# trial %d seed %d" % (run.trial, run.seed))
            sys.stdout.write(trajectory_csv(run) if args.format == "csv" else trajectory_json(run))
    else:
        for path in trial_paths(args.out, len(runs)):
            print(path)
    if args.plot:
        from .plotting import plot_trajectories

        print(plot_trajectories(runs, args.out.with_suffix(".png")))
    status = 0
    for run in runs:
        last = run.result.trajectory[-1]
        gap = "" if run.f_star is None else " gap=%.3e" % (abs(last.f - run.f_star) / abs(run.f_star))
        ok = _monotone(run) and not run.stalled
        print(
            "trial %d: %s after %d iterations, f=%.17g grad=%.3e%s%s"
            % (run.trial, run.result.termination, last.iter, last.f, last.grad_norm, gap, "" if ok else " INVARIANT FAILED"),
            file=sys.stderr,
        )
        status = status or (0 if ok else 1)
    return status


def _sweep(args) -> int:
    if args.sweep_ambient is not None:
        template, values, label = ambient_template(args.sig), args.sweep_ambient, "ambient dimension"
    else:
        template, values, label = depth_template(args.n), args.sweep_depth, "depth"
    for v in values:
        template(v)  # fail fast on invalid signatures
    report = run_sweep(args.problem, template, values, args.trials, args.seed, args.solver, _config(args))
    text = report.to_csv() if args.format == "csv" else report.to_json()
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
        print(args.out)
    if args.plot:
        from .plotting import plot_sweep

        print(plot_sweep(report, args.out.with_suffix(".png"), label))
    return 1 if any(r.stalled for r in report.rows) else 0


def _check(args) -> int:
    report = run_property_suite(args.seed, args.instances)
    print("\n".join(report.lines()))
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "plot", False) and args.out is None:
        parser.error("--plot needs --out to know where to write the figure")
    if getattr(args, "trials", 1) < 1:
        parser.error("--trials must be at least 1")
    if getattr(args, "instances", 1) < 1:
        parser.error("--instances must be at least 1")
    try:
        if args.command == "bench":
            return _bench(args)
        if args.command == "sweep":
            return _sweep(args)
        return _check(args)
    except (FlagError, ValueError) as exc:
        print("flagopt: error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
