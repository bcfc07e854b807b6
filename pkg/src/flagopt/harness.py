"""Seeded benchmark runs, sweeps, and the randomized property suite.

Per-trial randomness comes from one generator seeded with ``child_seed(seed,
trial)``; it draws ``M`` first and the starting flag second.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import properties
from .objectives import (
    SymmetricMatrixProblem,
    flag_distance,
    principal_solution_distance,
    random_symmetric,
    true_principal_flag,
)
from .signature import FlagError, FlagSignature, random_point
from .solvers import SOLVERS, LineSearchError, SolveResult, SolverConfig

PROBLEMS = ("principal", "eigenflag")
TRAJECTORY_FIELDS = ("iter", "f", "grad_norm", "step", "elapsed_ms")
TRUTH_FIELDS = ("f_star", "gap")
SWEEP_FIELDS = (
    "value",
    "n",
    "dims",
    "mean_distance",
    "mean_eigvec_distance",
    "mean_elapsed_ms",
    "median_elapsed_ms",
    "mean_iterations",
    "grad_tol",
    "step_tol",
    "max_iters",
    "stalled",
)


def fmt(x) -> str:
    """Full double precision."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def child_seed(seed: int, trial: int) -> int:
    """Mix ``(seed, trial)`` into an independent 64-bit seed."""
    return int(np.random.SeedSequence([int(seed), int(trial)]).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    sig: FlagSignature
    seed: int = 0
    trials: int = 1
    solver: str = "sd"
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    out: Optional[Path] = None
    format: str = "csv"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise FlagError("problem must be one of %s, got %r" % (PROBLEMS, self.problem))
        if self.solver not in SOLVERS:
            raise FlagError("solver must be one of %s, got %r" % (tuple(SOLVERS), self.solver))
        if self.trials < 1:
            raise FlagError("trials must be at least 1")
        if self.format not in ("csv", "json"):
            raise FlagError("format must be csv or json")


@dataclass(frozen=True, eq=False)
class TrialRun:
    trial: int
    seed: int
    M: np.ndarray = field(repr=False)
    result: SolveResult
    f_star: Optional[float]
    stalled: bool = False

    def rows(self) -> list[dict]:
        out = []
        for rec in self.result.trajectory:
            row = asdict(rec)
            if self.f_star is not None:
                row["f_star"] = self.f_star
                row["gap"] = abs(rec.f - self.f_star)
            out.append(row)
        return out

    @property
    def elapsed_ms(self) -> float:
        return self.result.trajectory[-1].elapsed_ms


def run_trial(problem: str, sig: FlagSignature, seed: int, trial: int, solver: str = "sd", config: SolverConfig = SolverConfig()) -> TrialRun:
    s = child_seed(seed, trial)
    rng = np.random.default_rng(s)
    M = random_symmetric(sig.n, rng)
    p0 = random_point(sig, rng)
    f = SymmetricMatrixProblem(M, sig, problem).objective()
    stalled = False
    try:
        result = SOLVERS[solver](f, p0, config, maximize=True)
    except LineSearchError as exc:
        result, stalled = exc.result, True
    f_star = true_principal_flag(M, sig).value if problem == "principal" else None
    return TrialRun(trial, s, M, result, f_star, stalled)


def run_trajectory(cfg: ExperimentConfig) -> list[TrialRun]:
    """Run ``cfg.trials`` seeded trials and write their trajectories if ``cfg.out`` is set."""
    runs = [run_trial(cfg.problem, cfg.sig, cfg.seed, k, cfg.solver, cfg.solver_config) for k in range(cfg.trials)]
    if cfg.out is not None:
        for path, run in zip(trial_paths(Path(cfg.out), cfg.trials), runs):
            write_trajectory(run, path, cfg.format)
    return runs


def trial_paths(out: Path, trials: int) -> list[Path]:
    if trials == 1:
        return [out]
    return [out.with_name("%s_t%d%s" % (out.stem, k, out.suffix)) for k in range(trials)]


def trajectory_fields(run: TrialRun) -> tuple[str, ...]:
    return TRAJECTORY_FIELDS + (TRUTH_FIELDS if run.f_star is not None else ())


def trajectory_csv(run: TrialRun) -> str:
    buf = io.StringIO()
    names = trajectory_fields(run)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in run.rows():
        w.writerow([fmt(row[k]) for k in names])
    return buf.getvalue()


def trajectory_json(run: TrialRun) -> str:
    doc = {
        "fields": list(trajectory_fields(run)),
        "trial": run.trial,
        "seed": run.seed,
        "termination": run.result.termination,
        "stalled": run.stalled,
        "records": run.rows(),
    }
    return json.dumps(doc, indent=1) + "\n"


def write_trajectory(run: TrialRun, path: Path, format: str = "csv") -> None:
    text = trajectory_csv(run) if format == "csv" else trajectory_json(run)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


# -- sweeps ----------------------------------------------------------------------------


def ambient_template(dims: Sequence[int] = (3, 9, 21)) -> Callable[[int], FlagSignature]:
    return lambda k: FlagSignature(tuple(dims), k)


def depth_template(n: int = 60, step: int = 2) -> Callable[[int], FlagSignature]:
    return lambda d: FlagSignature(tuple(range(step, step * d + 1, step)), n)


@dataclass(frozen=True)
class SweepRow:
    value: int
    sig: FlagSignature
    mean_distance: float
    mean_eigvec_distance: float
    mean_elapsed_ms: float
    median_elapsed_ms: float
    mean_iterations: float
    terminations: dict
    stalled: int

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "n": self.sig.n,
            "dims": " ".join(map(str, self.sig.dims)),
            "mean_distance": self.mean_distance,
            "mean_eigvec_distance": self.mean_eigvec_distance,
            "mean_elapsed_ms": self.mean_elapsed_ms,
            "median_elapsed_ms": self.median_elapsed_ms,
            "mean_iterations": self.mean_iterations,
            "grad_tol": self.terminations.get("grad_tol", 0),
            "step_tol": self.terminations.get("step_tol", 0),
            "max_iters": self.terminations.get("max_iters", 0),
            "stalled": self.stalled,
        }


@dataclass(frozen=True)
class SweepReport:
    problem: str
    trials: int
    seed: int
    rows: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_FIELDS)
        for row in self.rows:
            d = row.as_dict()
            w.writerow([d[k] if isinstance(d[k], str) else fmt(d[k]) for k in SWEEP_FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "problem": self.problem,
            "trials": self.trials,
            "seed": self.seed,
            "fields": list(SWEEP_FIELDS),
            "rows": [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.as_dict().items()} for r in self.rows],
        }
        return json.dumps(doc, indent=1) + "\n"


def run_sweep(
    problem: str,
    sig_template: Union[str, Callable[[int], FlagSignature]],
    sweep_values: Sequence[int],
    trials: int = 10,
    seed: int = 0,
    solver: str = "sd",
    config: SolverConfig = SolverConfig(),
) -> SweepReport:
    """Aggregate ``trials`` seeded runs for every swept value.

    ``mean_distance`` is the projector distance to the nearest optimal flag;
    ``mean_eigvec_distance`` is the distance to the eigenvector flag itself.
    Both are NaN for problems without a closed-form optimum.
    """
    if isinstance(sig_template, str):
        sig_template = {"ambient": ambient_template(), "depth": depth_template()}[sig_template]
    if trials < 1:
        raise FlagError("trials must be at least 1")
    rows = []
    for value in sweep_values:
        sig = sig_template(value)
        dist, lit, ms, its, why = [], [], [], [], Counter()
        stalled = 0
        for k in range(trials):
            run = run_trial(problem, sig, seed, k, solver, config)
            if problem == "principal":
                dist.append(principal_solution_distance(run.result.point, run.M))
                lit.append(flag_distance(run.result.point, true_principal_flag(run.M, sig).point))
            ms.append(run.elapsed_ms)
            its.append(run.result.iterations)
            why[run.result.termination] += 1
            stalled += run.stalled
        rows.append(
            SweepRow(
                value=int(value),
                sig=sig,
                mean_distance=float(np.mean(dist)) if dist else math.nan,
                mean_eigvec_distance=float(np.mean(lit)) if lit else math.nan,
                mean_elapsed_ms=float(np.mean(ms)),
                median_elapsed_ms=float(statistics.median(ms)),
                mean_iterations=float(np.mean(its)),
                terminations=dict(why),
                stalled=stalled,
            )
        )
    return SweepReport(problem, trials, seed, tuple(rows))


# -- property suite ----------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyReport:
    results: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        return [
            "%s %-44s max=%.3e tol=%.1e" % ("PASS" if r.passed else "FAIL", r.name, r.max_residual, r.tol)
            for r in self.results
        ]


def run_property_suite(seed: int = 0, instances: int = 100) -> PropertyReport:
    """Check every geometric invariant on ``instances`` random problems each."""
    return PropertyReport(tuple(properties.run_all(seed, instances)))


def with_overrides(cfg: SolverConfig, **kw) -> SolverConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
