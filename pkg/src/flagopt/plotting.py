"""Matplotlib figures for trajectories and sweeps, written straight to files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_trajectories(runs: Sequence, path) -> Path:
    """Objective (or gap to the optimum) and gradient norm against iteration."""
    plt = _pyplot()
    fig, (ax_f, ax_g) = plt.subplots(1, 2, figsize=(10, 4))
    for run in runs:
        it = [r.iter for r in run.result.trajectory]
        if run.f_star is not None:
            gap = [max(abs(r.f - run.f_star) / abs(run.f_star), 1e-17) for r in run.result.trajectory]
            ax_f.semilogy(it, gap, lw=1)
        else:
            ax_f.plot(it, [r.f for r in run.result.trajectory], lw=1)
        ax_g.semilogy(it, [max(r.grad_norm, 1e-300) for r in run.result.trajectory], lw=1)
    has_truth = any(run.f_star is not None for run in runs)
    ax_f.set_ylabel("|f - f*| / |f*|" if has_truth else "f")
    ax_g.set_ylabel("gradient norm")
    for ax in (ax_f, ax_g):
        ax.set_xlabel("iteration")
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(report, path, xlabel: str = "swept value") -> Path:
    """Mean distance to the optimum and median time per swept value."""
    plt = _pyplot()
    xs = [r.value for r in report.rows]
    fig, (ax_d, ax_t) = plt.subplots(1, 2, figsize=(10, 4))
    dist = [r.mean_distance for r in report.rows]
    if any(d == d for d in dist):
        ax_d.semilogy(xs, dist, "o-")
    ax_d.set_ylabel("mean distance to optimum")
    ax_t.plot(xs, [r.median_elapsed_ms for r in report.rows], "o-")
    ax_t.set_ylabel("median elapsed (ms)")
    for ax in (ax_d, ax_t):
        ax.set_xlabel(xlabel)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
