"""Benchmark objectives built from a symmetric matrix ``M``.

Every objective here has the form ``sum_i f_i(tr(Y_i^T M Y_i))`` over the
column blocks ``Y_i``, which is automatically invariant under block rotations.
The principal flag problem takes ``f_i(x) = x`` and the nonlinear eigenflag
problem ``f_i(x) = x^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .calculus import ObjectiveFunction
from .signature import FlagError, FlagSignature, StiefelPoint, qr_positive

ScalarFn = tuple[Callable[[float], float], Callable[[float], float], Callable[[float], float]]

IDENTITY: ScalarFn = (lambda x: x, lambda x: 1.0, lambda x: 0.0)
SQUARE: ScalarFn = (lambda x: x * x, lambda x: 2.0 * x, lambda x: 2.0)


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise FlagError("M must be square, got shape %s" % (M.shape,))
    return 0.5 * (M + M.T)


def random_symmetric(n: int, seed) -> np.ndarray:
    """Standard normal entries, symmetrised as ``(A + A^T) / 2``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


def _check_shape(M: np.ndarray, sig: FlagSignature) -> None:
    if M.shape != (sig.n, sig.n):
        raise FlagError("M has shape %s but the flag lives in R^%d" % (M.shape, sig.n))


def principal_flag_objective(M, sig: FlagSignature) -> ObjectiveFunction:
    """``tr(Y^T M Y)``; to be maximised."""
    M = symmetrize(M)
    _check_shape(M, sig)
    return ObjectiveFunction(
        value=lambda Y: float(np.vdot(Y, M @ Y)),
        euclidean_gradient=lambda Y: 2.0 * (M @ Y),
        euclidean_hessian=lambda Y, X, X2: 2.0 * float(np.vdot(X, M @ X2)),
        euclidean_hvp=lambda Y, X: 2.0 * (M @ X),
        sig=sig,
        name="principal",
    )


def trace_family_objective(M, sig: FlagSignature, funcs: Sequence[ScalarFn], name: str = "trace-family") -> ObjectiveFunction:
    """``sum_i f_i(tr(Y_i^T M Y_i))`` with each ``f_i`` given as ``(f, f', f'')``."""
    M = symmetrize(M)
    _check_shape(M, sig)
    funcs = list(funcs)
    if len(funcs) == 1:
        funcs = funcs * sig.d
    if len(funcs) != sig.d:
        raise FlagError("need %d scalar functions, got %d" % (sig.d, len(funcs)))
    slices = sig.block_slices()

    def traces(Y, MY):
        return [float(np.vdot(Y[:, s], MY[:, s])) for s in slices]

    def value(Y):
        MY = M @ Y
        return float(sum(fn[0](t) for fn, t in zip(funcs, traces(Y, MY))))

    def gradient(Y):
        MY = M @ Y
        G = np.empty_like(MY)
        for fn, t, s in zip(funcs, traces(Y, MY), slices):
            G[:, s] = 2.0 * fn[1](t) * MY[:, s]
        return G

    def hvp(Y, X):
        MY, MX = M @ Y, M @ X
        H = np.empty_like(MX)
        for fn, t, s in zip(funcs, traces(Y, MY), slices):
            dt = 2.0 * float(np.vdot(MY[:, s], X[:, s]))
            H[:, s] = 2.0 * fn[2](t) * dt * MY[:, s] + 2.0 * fn[1](t) * MX[:, s]
        return H

    return ObjectiveFunction(
        value=value,
        euclidean_gradient=gradient,
        euclidean_hessian=lambda Y, X, X2: float(np.vdot(hvp(Y, X), X2)),
        euclidean_hvp=hvp,
        sig=sig,
        name=name,
    )


def eigenflag_objective(M, sig: FlagSignature) -> ObjectiveFunction:
    """``sum_i tr(Y_i^T M Y_i)^2``; to be maximised."""
    return trace_family_objective(M, sig, [SQUARE], name="eigenflag")


@dataclass(frozen=True, eq=False)
class SymmetricMatrixProblem:
    M: np.ndarray
    sig: FlagSignature
    family: str = "principal"
    funcs: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "M", symmetrize(self.M))
        _check_shape(self.M, self.sig)
        if self.family not in ("principal", "eigenflag", "custom"):
            raise FlagError("unknown problem family %r" % self.family)
        if self.family == "custom" and not self.funcs:
            raise FlagError("custom problems need per-block scalar functions")

    def objective(self) -> ObjectiveFunction:
        if self.family == "principal":
            return principal_flag_objective(self.M, self.sig)
        if self.family == "eigenflag":
            return eigenflag_objective(self.M, self.sig)
        return trace_family_objective(self.M, self.sig, self.funcs)


class PrincipalFlag(NamedTuple):
    point: StiefelPoint
    value: float
    unique: bool


def _eig_descending(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, V = np.linalg.eigh(M)
    w, V = w[::-1], V[:, ::-1]
    # first nonzero entry of every eigenvector is positive
    idx = np.argmax(np.abs(V) > 1e-14, axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    return w, V * s


def true_principal_flag(M, sig: FlagSignature, gap_tol: float = 1e-12) -> PrincipalFlag:
    """Eigenvector flag of the ``n_d`` largest eigenvalues and the optimal value.

    ``unique`` reports whether the optimal ``n_d``-dimensional subspace is
    unique (nonzero eigengap at the cut).  The objective never constrains the
    inner subspaces, so any nested choice inside that subspace is also optimal.
    """
    M = symmetrize(M)
    _check_shape(M, sig)
    w, V = _eig_descending(M)
    nd = sig.nd
    value = float(np.sum(w[:nd]))
    gap = w[nd - 1] - w[nd]
    unique = bool(gap > gap_tol * max(1.0, abs(w[0])))
    return PrincipalFlag(StiefelPoint(sig, V[:, :nd]), value, unique)


def flag_distance(a: StiefelPoint, b: StiefelPoint) -> float:
    """Frobenius distance between cumulative projector tuples, divided by ``sqrt(d)``."""
    total = 0.0
    for ni in a.sig.dims:
        Pa = a.Y[:, :ni] @ a.Y[:, :ni].T
        Pb = b.Y[:, :ni] @ b.Y[:, :ni].T
        total += float(np.sum((Pa - Pb) ** 2))
    return float(np.sqrt(total / a.sig.d))


def nearest_principal_solution(p: StiefelPoint, M) -> StiefelPoint:
    """An optimal flag close to ``p``: project ``p``'s frame onto the top eigenspace.

    The projection followed by a triangular orthonormalisation keeps the
    nesting of ``p``, so the result is an optimal flag whose inner subspaces
    follow ``p`` as closely as this construction allows.
    """
    sol = true_principal_flag(M, p.sig)
    E = sol.point.Y
    return StiefelPoint(p.sig, qr_positive(E @ (E.T @ p.Y)))


def principal_solution_distance(p: StiefelPoint, M) -> float:
    """Upper bound on the projector distance from ``p`` to the set of optimal flags."""
    return flag_distance(p, nearest_principal_solution(p, M))
