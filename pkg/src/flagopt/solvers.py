"""Steepest descent, conjugate gradient and Newton on a flag manifold.

All three move along geodesics ``Q exp(tB) I`` of the current full frame
``Q``.  The frame is carried between iterations so that the orthogonal
complement never has to be recomputed, and it is re-orthonormalised by a
positive-diagonal QR every few steps (that triangular factor only mixes
columns forward, so the flag itself is unchanged).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .calculus import (
    ObjectiveFunction,
    SingularHessianError,
    gradient_from_partials,
    euclidean_gradient,
    negate,
    newton_direction,
)
from .geometry import exp_neg_phi, exp_skew
from .signature import FlagError, StiefelPoint, block_diagonal_mask, qr_positive, same_flag
from .tangent import SkewGenerator

TERMINATIONS = ("grad_tol", "step_tol", "max_iters")


class LineSearchError(FlagError):
    """Backtracking exhausted its shrink budget; ``result`` holds the run so far."""

    def __init__(self, message: str, result: Optional["SolveResult"] = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 1000
    grad_tol: float = 1e-6
    step_tol: float = 1e-10
    line_search: str = "armijo"
    c1: float = 1e-4
    shrink: float = 0.5
    max_shrinks: int = 60
    cg_restart_period: Optional[int] = None
    reorth_every: int = 50

    def __post_init__(self):
        if self.line_search not in ("armijo", "golden_exact"):
            raise ValueError("line_search must be 'armijo' or 'golden_exact', got %r" % self.line_search)
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.grad_tol > 0 and self.step_tol > 0):
            raise ValueError("grad_tol and step_tol must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0.0 < self.c1 < 1.0:
            raise ValueError("c1 must lie in (0, 1)")
        if self.cg_restart_period is not None and self.cg_restart_period < 1:
            raise ValueError("cg_restart_period must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    f: float
    grad_norm: float
    step: float
    elapsed_ms: float


@dataclass(frozen=True, eq=False)
class SolveResult:
    point: StiefelPoint
    trajectory: list = field(repr=False)
    termination: str

    @property
    def iterations(self) -> int:
        return self.trajectory[-1].iter

    @property
    def value(self) -> float:
        return self.trajectory[-1].f


# -- line search ------------------------------------------------------------------


@dataclass
class _Step:
    t: float
    value: float
    frame: np.ndarray


def _along(Q, B):
    def frame(t):
        return Q @ exp_skew(B, t)

    return frame


def armijo(f_value, frame_at, nd, f0, slope, t0, cfg: SolverConfig) -> _Step:
    """Backtrack from ``t0`` until ``f(t) <= f0 + c1 t slope``."""
    t = t0
    for _ in range(cfg.max_shrinks + 1):
        F = frame_at(t)
        val = f_value(F[:, :nd])
        if val <= f0 + cfg.c1 * t * slope:
            return _Step(t, val, F)
        t *= cfg.shrink
    raise LineSearchError("Armijo backtracking failed after %d shrinks (slope %.3g)" % (cfg.max_shrinks, slope))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_exact(f_value, frame_at, nd, f0, t_max, rel_width=1e-8, grid=16) -> Optional[_Step]:
    """Minimise along ``[0, t_max]``: coarse scan, then golden section on the best bracket."""
    ts = np.linspace(0.0, t_max, grid + 1)
    vals = [f0] + [f_value(frame_at(t)[:, :nd]) for t in ts[1:]]
    k = int(np.argmin(vals))
    a, b = ts[max(k - 1, 0)], ts[min(k + 1, grid)]
    c, d = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
    fc, fd = f_value(frame_at(c)[:, :nd]), f_value(frame_at(d)[:, :nd])
    while b - a > rel_width * t_max:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f_value(frame_at(c)[:, :nd])
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f_value(frame_at(d)[:, :nd])
    t = 0.5 * (a + b)
    F = frame_at(t)
    val = f_value(F[:, :nd])
    if val >= f0 or t == 0.0:
        return None
    return _Step(t, val, F)


def line_search_geodesic(
    f: ObjectiveFunction,
    p: StiefelPoint,
    gen: SkewGenerator,
    cfg: SolverConfig = SolverConfig(),
    t0: Optional[float] = None,
) -> tuple[float, StiefelPoint]:
    """Step size along ``t -> [Y, Yperp] exp(tB) I`` and the accepted point (minimisation)."""
    nd = p.sig.nd
    Q = p.Q
    fY = euclidean_gradient(f, p)
    slope = float(np.vdot(fY, Q @ gen.B[:, :nd]))
    if slope >= 0:
        raise LineSearchError("direction is not a descent direction (slope %.3g)" % slope)
    step = _search(f.value, Q, gen.B, nd, f.value(p.Y), slope, t0, cfg)
    F = step.frame
    return step.t, StiefelPoint(p.sig, F[:, :nd], Yperp=F[:, nd:], check=False)


def _first_step(B: np.ndarray) -> float:
    # about one radian of rotation along the fastest plane
    return 1.0 / max(float(np.linalg.norm(B, 2)), 1e-300)


def _search(f_value, Q, B, nd, f0, slope, t0, cfg) -> _Step:
    frame_at = _along(Q, B)
    if cfg.line_search == "golden_exact":
        lam1 = float(np.linalg.norm(B, 2))
        step = golden_exact(f_value, frame_at, nd, f0, math.pi / max(lam1, 1e-300))
        if step is not None:
            return step
    return armijo(f_value, frame_at, nd, f0, slope, t0 if t0 is not None else _first_step(B), cfg)


# -- shared descent loop -------------------------------------------------------------


def _lift_array(Q: np.ndarray, delta: np.ndarray, mask: np.ndarray, nd: int) -> np.ndarray:
    n = Q.shape[0]
    top = Q.T @ delta
    B = np.zeros((n, n))
    B[:, :nd] = top
    B[:nd, nd:] = -top[nd:, :].T
    B = 0.5 * (B - B.T)
    B[mask] = 0.0
    return B


def _metric(delta_a: np.ndarray, delta_b: np.ndarray, Y: np.ndarray) -> float:
    return float(np.vdot(delta_a, delta_b) - 0.5 * np.vdot(Y.T @ delta_a, Y.T @ delta_b))


class _Runner:
    def __init__(self, f: ObjectiveFunction, p0: StiefelPoint, cfg: SolverConfig, maximize: bool):
        self.f_user = f
        self.f = negate(f) if maximize else f
        self.sign = -1.0 if maximize else 1.0
        self.cfg = cfg
        self.sig = p0.sig
        self.nd = p0.sig.nd
        self.Q = np.array(p0.Q)
        self.mask = block_diagonal_mask(self.sig)
        self.records: list[IterationRecord] = []
        self.start = time.perf_counter()
        self.accepted = 0

    def point(self) -> StiefelPoint:
        return StiefelPoint(self.sig, self.Q[:, : self.nd], Yperp=self.Q[:, self.nd:], check=False)

    def record(self, it: int, value: float, gnorm: float, step: float) -> None:
        ms = (time.perf_counter() - self.start) * 1e3
        self.records.append(IterationRecord(it, self.sign * value, gnorm, step, ms))

    def evaluate(self):
        p = self.point()
        fY = euclidean_gradient(self.f, p)
        G = gradient_from_partials(p, fY).delta
        return p, self.f.value(p.Y), G

    def advance(self, F: np.ndarray) -> None:
        self.Q = F
        self.accepted += 1
        if self.cfg.reorth_every and self.accepted % self.cfg.reorth_every == 0:
            before = self.point()
            self.Q = qr_positive(self.Q)
            if not same_flag(before, self.point()):
                raise FlagError("re-orthonormalisation moved the flag; the frame has drifted too far")

    def result(self, termination: str) -> SolveResult:
        return SolveResult(self.point(), self.records, termination)

    def stop(self, it: int, gnorm: float, step: float) -> Optional[str]:
        if gnorm <= self.cfg.grad_tol:
            return "grad_tol"
        if it > 0 and step <= self.cfg.step_tol:
            return "step_tol"
        if it >= self.cfg.max_iters:
            return "max_iters"
        return None


def _descent(f, p0, cfg, maximize, restart_period, on_transport=None) -> SolveResult:
    run = _Runner(f, p0, cfg, maximize)
    nd = run.nd
    _, val, G = run.evaluate()
    H = -G
    t_prev = None
    step = 0.0
    it = 0
    while True:
        gnorm = float(np.linalg.norm(G))
        run.record(it, val, gnorm, step)
        why = run.stop(it, gnorm, step)
        if why:
            return run.result(why)
        Y = run.Q[:, :nd]
        B = _lift_array(run.Q, H, run.mask, nd)
        slope = _metric(G, H, Y)
        t0 = 2.0 * t_prev if t_prev is not None else None
        try:
            accepted = _search(run.f.value, run.Q, B, nd, val, slope, t0, cfg)
        except LineSearchError as exc:
            exc.result = run.result("step_tol")
            raise
        t_prev = accepted.t
        step = accepted.t * float(np.linalg.norm(B)) / math.sqrt(2.0)
        Q_old, G_old = run.Q, G
        run.advance(accepted.frame)
        _, val, G = run.evaluate()
        it += 1
        if restart_period is None or it % restart_period == 0:
            H = -G
            continue
        # transport the previous direction and gradient along the step
        F = accepted.frame
        tauH = F @ B[:, :nd]
        XG = SkewGenerator(run.sig, _lift_array(Q_old, G_old, run.mask, nd), check=False)
        tauG = F @ exp_neg_phi(SkewGenerator(run.sig, B, check=False), XG, accepted.t).B[:, :nd]
        Ynew = run.Q[:, :nd]
        if on_transport is not None:
            on_transport(run.point(), tauG, tauH)
        denom = _metric(G_old, G_old, Q_old[:, :nd])
        gamma = _metric(G - tauG, G, Ynew) / denom if denom > 0 else 0.0
        H = -G + gamma * tauH
        if _metric(H, G, Ynew) >= 0:
            H = -G


def steepest_descent(
    f: ObjectiveFunction,
    p0: StiefelPoint,
    config: SolverConfig = SolverConfig(),
    maximize: bool = False,
) -> SolveResult:
    """Follow ``-grad f`` along geodesics with a line search on each one."""
    return _descent(f, p0, config, maximize, restart_period=None)


def conjugate_gradient(
    f: ObjectiveFunction,
    p0: StiefelPoint,
    config: SolverConfig = SolverConfig(),
    maximize: bool = False,
    on_transport: Optional[Callable[[StiefelPoint, np.ndarray, np.ndarray], None]] = None,
) -> SolveResult:
    """Polak-Ribiere conjugate gradient with parallel-transported directions.

    Restarts with ``-grad f`` every ``config.cg_restart_period`` iterations
    (default: the manifold dimension) and whenever the new direction fails to
    descend.  ``on_transport(point, tauG, tauH)`` sees both transported
    vectors at every non-restart step.
    """
    period = config.cg_restart_period or p0.sig.dimension
    return _descent(f, p0, config, maximize, period if period > 1 else None, on_transport)


def newton_solve(
    f: ObjectiveFunction,
    p0: StiefelPoint,
    config: SolverConfig = SolverConfig(),
    maximize: bool = False,
    fd_fallback: bool = False,
) -> SolveResult:
    """Newton's method with an Armijo safeguard from unit step.

    Falls back to ``-grad f`` when the Newton system is singular or its
    solution does not descend.
    """
    run = _Runner(f, p0, config, maximize)
    nd = run.nd
    step = 0.0
    it = 0
    while True:
        p, val, G = run.evaluate()
        gnorm = float(np.linalg.norm(G))
        run.record(it, val, gnorm, step)
        why = run.stop(it, gnorm, step)
        if why:
            return run.result(why)
        Y = p.Y
        try:
            X = newton_direction(run.f, p, fd_fallback=fd_fallback).delta
            if _metric(X, G, Y) >= 0:
                X = -G
        except SingularHessianError:
            X = -G
        B = _lift_array(run.Q, X, run.mask, nd)
        slope = _metric(G, X, Y)
        cfg = config if config.line_search == "armijo" else _armijo_only(config)
        try:
            accepted = armijo(run.f.value, _along(run.Q, B), nd, val, slope, 1.0, cfg)
        except LineSearchError as exc:
            exc.result = run.result("step_tol")
            raise
        step = accepted.t * float(np.linalg.norm(B)) / math.sqrt(2.0)
        run.advance(accepted.frame)
        it += 1


def _armijo_only(cfg: SolverConfig) -> SolverConfig:
    return replace(cfg, line_search="armijo")


SOLVERS: dict[str, Callable[..., SolveResult]] = {
    "sd": steepest_descent,
    "cg": conjugate_gradient,
    "newton": newton_solve,
}
