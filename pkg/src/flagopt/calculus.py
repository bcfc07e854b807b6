"""Riemannian gradient, Hessian and Newton direction from Euclidean partials."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .signature import FlagError, FlagSignature, StiefelPoint, random_block_orthogonal, random_point
from .tangent import (
    TangentVector,
    generator_from_coords,
    lift,
    m_basis,
    metric,
    push,
)

FD_STEP = 1e-5
WELL_DEFINED_TOL = 1e-10


class SingularHessianError(FlagError):
    """The Newton system could not be solved even after regularisation."""


class QuotientWarning(UserWarning):
    """An objective changed value under a change of flag representative."""


@dataclass(frozen=True, eq=False)
class ObjectiveFunction:
    """Callbacks for ``f(Y)`` and its Euclidean derivatives in Stiefel coordinates.

    ``euclidean_gradient(Y)`` returns the ``n x n_d`` matrix of partials and
    ``euclidean_hessian(Y, X, X2)`` the second-derivative bilinear form.
    ``euclidean_hvp(Y, X)`` is an optional faster route to the same form,
    returning the matrix ``H`` with ``f_YY(X, X2) = <H, X2>``.
    """

    value: Callable[[np.ndarray], float]
    euclidean_gradient: Callable[[np.ndarray], np.ndarray]
    euclidean_hessian: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], float]] = None
    euclidean_hvp: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    sig: Optional[FlagSignature] = None
    name: str = ""
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.sig is not None and self.check:
            check_well_defined(self, self.sig)

    @property
    def has_hessian(self) -> bool:
        return self.euclidean_hessian is not None or self.euclidean_hvp is not None

    def hessian_bilinear(self, Y, X, X2) -> float:
        if self.euclidean_hvp is not None:
            return float(np.vdot(self.euclidean_hvp(Y, X), X2))
        if self.euclidean_hessian is not None:
            return float(self.euclidean_hessian(Y, X, X2))
        raise FlagError("objective %r has no second-derivative source" % self.name)


def negate(f: ObjectiveFunction) -> ObjectiveFunction:
    """``-f``; maximisation problems are solved as minimisation of this."""
    hess = None if f.euclidean_hessian is None else (lambda Y, X, X2: -f.euclidean_hessian(Y, X, X2))
    hvp = None if f.euclidean_hvp is None else (lambda Y, X: -f.euclidean_hvp(Y, X))
    return ObjectiveFunction(
        value=lambda Y: -f.value(Y),
        euclidean_gradient=lambda Y: -f.euclidean_gradient(Y),
        euclidean_hessian=hess,
        euclidean_hvp=hvp,
        sig=f.sig,
        name="-" + (f.name or "f"),
        check=False,
    )


def check_well_defined(f: ObjectiveFunction, sig: FlagSignature, samples: int = 3, seed: int = 0) -> float:
    """Largest relative change of ``f`` under random block rotations; warns above tolerance."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        Y = random_point(sig, rng).Y
        K = random_block_orthogonal(sig, rng)
        a, b = f.value(Y), f.value(Y @ K)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    if worst > WELL_DEFINED_TOL:
        warnings.warn(
            "objective %r is not invariant under change of flag representative (rel. change %.3g)"
            % (f.name, worst),
            QuotientWarning,
            stacklevel=3,
        )
    return worst


def euclidean_gradient(f: ObjectiveFunction, p: StiefelPoint) -> np.ndarray:
    fY = np.asarray(f.euclidean_gradient(p.Y), dtype=float)
    if fY.shape != p.Y.shape:
        raise FlagError("euclidean_gradient returned shape %s, expected %s" % (fY.shape, p.Y.shape))
    return fY


def gradient_from_partials(p: StiefelPoint, fY: np.ndarray) -> TangentVector:
    """Metric dual of the partials: ``g(grad, X) = <f_Y, X>`` for every tangent ``X``.

    Blockwise this is ``f_{Y_i} - Y_i Y_i^T f_{Y_i} - sum_{j != i} Y_j f_{Y_j}^T Y_i``.
    """
    Y = p.Y
    S = Y.T @ fY
    mask = np.zeros_like(S, dtype=bool)
    for s in p.sig.block_slices():
        mask[s, s] = True
    correction = np.where(mask, S, S.T)
    return TangentVector(p, fY - Y @ correction, check=False)


def riemannian_gradient(f: ObjectiveFunction, p: StiefelPoint) -> TangentVector:
    return gradient_from_partials(p, euclidean_gradient(f, p))


def fd_hessian_bilinear(f: ObjectiveFunction, Y: np.ndarray, X: np.ndarray, X2: np.ndarray) -> float:
    """Central difference of the Euclidean gradient along ``X2``, paired with ``X``."""
    h = FD_STEP * (1.0 + np.linalg.norm(Y))
    dG = (np.asarray(f.euclidean_gradient(Y + h * X2)) - np.asarray(f.euclidean_gradient(Y - h * X2))) / (2 * h)
    return float(np.vdot(dG, X))


def _euclidean_second(f, Y, X, X2, fd_fallback) -> float:
    if f.has_hessian:
        return f.hessian_bilinear(Y, X, X2)
    if fd_fallback:
        return fd_hessian_bilinear(f, Y, X, X2)
    raise FlagError("objective %r has no second-derivative source; pass fd_fallback=True" % f.name)


def _curvature_term(Q: np.ndarray, fY: np.ndarray, B: np.ndarray, C: np.ndarray, nd: int) -> float:
    """``(tr(f_Y^T Q B^T C I) + tr(f_Y^T Q C^T B I)) / 2`` with ``I = I_{n,n_d}``."""
    G = Q.T @ fY
    return 0.5 * float(np.vdot(G, B.T @ C[:, :nd]) + np.vdot(G, C.T @ B[:, :nd]))


def hessian_form(
    f: ObjectiveFunction,
    p: StiefelPoint,
    u: TangentVector,
    v: TangentVector,
    fd_fallback: bool = False,
) -> float:
    """Riemannian Hessian ``f_YY(u, v) - [tr(f_Y^T Q B^T Q^T v) + tr(f_Y^T Q C^T Q^T u)] / 2``."""
    B, C = lift(u).B, lift(v).B
    fY = euclidean_gradient(f, p)
    second = _euclidean_second(f, p.Y, u.delta, v.delta, fd_fallback)
    return second - _curvature_term(p.Q, fY, B, C, p.sig.nd)


def hessian_polarized(f, p, u, v, fd_fallback: bool = False) -> float:
    """Bilinear Hessian recovered from its quadratic form by polarisation."""
    q = lambda w: hessian_form(f, p, w, w, fd_fallback)
    return 0.5 * (q(u + v) - q(u) - q(v))


def hessian_matrix(f: ObjectiveFunction, p: StiefelPoint, fd_fallback: bool = False) -> np.ndarray:
    """Gram matrix of the Hessian over the metric-orthonormal canonical basis."""
    sig, Q, nd = p.sig, p.Q, p.sig.nd
    basis = np.array([E.B for E in m_basis(sig)])
    deltas = np.einsum("ij,kjl->kil", Q, basis[:, :, :nd])
    fY = euclidean_gradient(f, p)
    G = Q.T @ fY
    # T[k, l] = <G, B_k^T B_l I>
    T = np.einsum("im,kji,ljm->kl", G, basis, basis[:, :, :nd])
    dim = len(basis)
    H = np.empty((dim, dim))
    if f.euclidean_hvp is not None:
        HV = np.array([np.asarray(f.euclidean_hvp(p.Y, D)) for D in deltas])
        H[:] = np.einsum("kij,lij->kl", HV, deltas)
        H = 0.5 * (H + H.T)
    else:
        for k in range(dim):
            for l in range(k, dim):
                H[k, l] = H[l, k] = _euclidean_second(f, p.Y, deltas[k], deltas[l], fd_fallback)
    return H - 0.5 * (T + T.T)


def newton_direction(f: ObjectiveFunction, p: StiefelPoint, fd_fallback: bool = False) -> TangentVector:
    """Tangent ``X`` with ``Hess f(X, T) = -g(grad f, T)`` for every tangent ``T``."""
    grad = riemannian_gradient(f, p)
    sig = p.sig
    basis = m_basis(sig)
    # coordinates of -grad in the orthonormal basis
    gB = lift(grad).B
    rhs = -np.array([0.5 * np.vdot(gB, E.B) for E in basis])
    gnorm = float(np.linalg.norm(rhs))
    if gnorm == 0.0:
        return TangentVector(p, np.zeros_like(p.Y), check=False)
    H = hessian_matrix(f, p, fd_fallback)
    tol = 1e-8 * gnorm
    x = _solve_sym(H, rhs, tol)
    return push(p, generator_from_coords(sig, x))


def _solve_sym(H: np.ndarray, rhs: np.ndarray, tol: float) -> np.ndarray:
    Hn = float(np.linalg.norm(H))
    for eps in (0.0, 1e-10 * Hn):
        A = H + eps * np.eye(len(H))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                x = scipy.linalg.solve(A, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            continue
        if np.all(np.isfinite(x)) and np.linalg.norm(H @ x - rhs) <= tol:
            return x
    raise SingularHessianError("Newton system is singular beyond the regularisation threshold")


def directional_derivative(f: ObjectiveFunction, p: StiefelPoint, v: TangentVector) -> float:
    return float(np.vdot(euclidean_gradient(f, p), v.delta))


def gradient_pairing(f: ObjectiveFunction, p: StiefelPoint, v: TangentVector) -> float:
    return metric(riemannian_gradient(f, p), v)
