"""Geodesics, arclength, geodesic distance and parallel transport.

Geodesics through ``[Y]`` are ``t -> [Y, Yperp] exp(tB) I_{n,n_d}`` with ``B``
a horizontal generator.  Transport rotates the lifted vector by the same
one-parameter subgroup after correcting it with ``exp(-phi_{tB})``, where
``phi_B(X) = [B, X]_m / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .signature import (
    FlagError,
    OrthogonalPoint,
    ProjectionPoint,
    StiefelPoint,
    block_diagonal_mask,
    from_projection,
)
from .tangent import (
    SkewGenerator,
    TangentVector,
    lift,
    projection_velocity,
    push,
    tangent_from_projection_velocity,
)

SERIES_RTOL = 1e-15
SERIES_CAP = 40
SUBSTEP_THRESHOLD = 10.0
SUBSTEP_SIZE = 5.0


class SeriesDivergenceError(FlagError):
    """The ``exp(-phi)`` series did not settle within the term cap."""


class DegenerateLogError(FlagError):
    """The relative rotation has eigenvalue -1, so its logarithm is not unique."""


def _skew_array(B) -> np.ndarray:
    return B.B if isinstance(B, SkewGenerator) else np.asarray(B, dtype=float)


def exp_skew(B, t: float = 1.0) -> np.ndarray:
    """Orthogonal ``exp(tB)`` by Pade scaling-and-squaring plus one polar clean-up step."""
    A = _skew_array(B)
    n = A.shape[0]
    if t == 0.0 or not np.any(A):
        return np.eye(n)
    E = scipy.linalg.expm(t * A)
    # one Newton-Schulz step pulls E back onto O(n) to second order
    return 0.5 * E @ (3.0 * np.eye(n) - E.T @ E)


@dataclass(frozen=True, eq=False)
class Geodesic:
    base: StiefelPoint
    gen: SkewGenerator

    @classmethod
    def from_tangent(cls, v: TangentVector) -> "Geodesic":
        return cls(v.base, lift(v))

    @cached_property
    def Q(self) -> np.ndarray:
        return self.base.Q

    def frame(self, t: float) -> np.ndarray:
        """The full orthogonal frame ``[Y, Yperp] exp(tB)``."""
        if t == 0.0:
            return np.array(self.Q)
        return self.Q @ exp_skew(self.gen, t)

    def __call__(self, t: float) -> StiefelPoint:
        return geodesic_evaluate(self, t)


def geodesic_evaluate(g: Geodesic, t: float) -> StiefelPoint:
    if t == 0.0:
        return g.base
    F = g.frame(t)
    nd = g.base.sig.nd
    return StiefelPoint(g.base.sig, F[:, :nd], Yperp=F[:, nd:], check=False)


# -- spectral form ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralForm:
    """``B = V D V^T`` with ``D`` a direct sum of ``[[0, -l], [l, 0]]`` blocks and zeros."""

    V: np.ndarray
    lambdas: np.ndarray
    r: int

    def D(self) -> np.ndarray:
        n = self.V.shape[0]
        D = np.zeros((n, n))
        for k, lam in enumerate(self.lambdas):
            D[2 * k + 1, 2 * k] = lam
            D[2 * k, 2 * k + 1] = -lam
        return D

    def sigma(self, t: float) -> np.ndarray:
        n = self.V.shape[0]
        S = np.eye(n)
        for k, lam in enumerate(self.lambdas):
            c, s = math.cos(t * lam), math.sin(t * lam)
            S[2 * k: 2 * k + 2, 2 * k: 2 * k + 2] = [[c, -s], [s, c]]
        return S

    def exp(self, t: float) -> np.ndarray:
        return self.V @ self.sigma(t) @ self.V.T

    def reconstruct(self) -> np.ndarray:
        return self.V @ self.D() @ self.V.T


def spectral_form(B, rank_tol: float = 1e-13) -> SpectralForm:
    """Block-diagonalise a skew matrix with the real Schur decomposition."""
    A = _skew_array(B)
    n = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A)))
    T, Z = scipy.linalg.schur(A, output="real")
    pairs, rest = [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 0.0:
            lam = 0.5 * (abs(T[i, i + 1]) + abs(T[i + 1, i]))
            a, b = Z[:, i], Z[:, i + 1]
            if T[i + 1, i] < 0:
                a, b = b, a
            if lam > rank_tol * scale:
                pairs.append((lam, a, b))
            else:
                rest.extend([a, b])
            i += 2
        else:
            rest.append(Z[:, i])
            i += 1
    pairs.sort(key=lambda item: -item[0])
    cols = [c for _, a, b in pairs for c in (a, b)] + rest
    V = np.column_stack(cols) if cols else np.eye(n)
    return SpectralForm(V, np.array([lam for lam, _, _ in pairs]), len(pairs))


# -- lengths and distance --------------------------------------------------------


def arclength(g: Geodesic, t: float) -> float:
    if t < 0:
        raise ValueError("arclength needs t >= 0, got %g" % t)
    return float(t * np.linalg.norm(g.gen.B) / math.sqrt(2.0))


def rotation_angles(R: np.ndarray) -> np.ndarray:
    """Positive rotation angles of an orthogonal matrix (principal logarithm branch)."""
    n = R.shape[0]
    T, _ = scipy.linalg.schur(R, output="real")
    angles = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 0.0:
            s = math.sqrt(abs(T[i, i + 1] * T[i + 1, i]))
            c = 0.5 * (T[i, i] + T[i + 1, i + 1])
            angles.append(math.atan2(s, c))
            i += 2
        else:
            if T[i, i] < 0:
                raise DegenerateLogError("relative rotation has eigenvalue -1")
            i += 1
    return np.array(angles)


def distance(a: OrthogonalPoint, b: OrthogonalPoint) -> float:
    """``sqrt(sum lambda_i^2)`` over the rotation angles of ``a.Q^T b.Q``.

    This is evaluated on the given representatives; no minimisation over the
    isotropy group is attempted.
    """
    if a.sig != b.sig:
        raise FlagError("cannot measure distance between different flag manifolds")
    angles = rotation_angles(a.Q.T @ b.Q)
    return float(np.sqrt(np.sum(angles**2)))


# -- bracket and transport -----------------------------------------------------


def _bracket_m(sig, B: np.ndarray, X: np.ndarray, mask=None) -> np.ndarray:
    if mask is None:
        mask = block_diagonal_mask(sig)
    C = 0.5 * (B @ X - X @ B)
    C[mask] = 0.0
    return C


def bracket_m(B: SkewGenerator, X: SkewGenerator) -> SkewGenerator:
    """``phi_B(X)``: half the commutator with its diagonal blocks removed."""
    if B.sig != X.sig:
        raise FlagError("generators belong to different flag manifolds")
    return SkewGenerator(B.sig, _bracket_m(B.sig, B.B, X.B), check=False)


def _exp_neg_phi_once(sig, tB: np.ndarray, X: np.ndarray, mask) -> np.ndarray:
    acc = X.copy()
    term = X
    for k in range(1, SERIES_CAP + 1):
        term = -_bracket_m(sig, tB, term, mask) / k
        acc += term
        tn = np.linalg.norm(term)
        if tn <= SERIES_RTOL * np.linalg.norm(acc):
            return acc
    raise SeriesDivergenceError(
        "exp(-phi) series did not converge in %d terms (|tB| = %.3g)" % (SERIES_CAP, np.linalg.norm(tB))
    )


def exp_neg_phi(B: SkewGenerator, X: SkewGenerator, t: float) -> SkewGenerator:
    """Apply ``exp(-phi_{tB})`` to ``X``, splitting long steps into substeps."""
    sig = B.sig
    if t == 0.0 or sig.d == 1:
        # the m-bracket vanishes identically on Grassmannians
        return X
    mask = block_diagonal_mask(sig)
    size = abs(t) * np.linalg.norm(B.B)
    m = math.ceil(size / SUBSTEP_SIZE) if size > SUBSTEP_THRESHOLD else 1
    hB = (t / m) * B.B
    Xk = np.array(X.B)
    for _ in range(m):
        Xk = _exp_neg_phi_once(sig, hB, Xk, mask)
    return SkewGenerator(sig, Xk, check=False)


def transport_generator(g: Geodesic, X: SkewGenerator, t: float) -> tuple[StiefelPoint, np.ndarray]:
    """Transport a lifted vector; returns the end point and the ambient transported vector."""
    F = g.frame(t)
    Xt = exp_neg_phi(g.gen, X, t)
    nd = g.base.sig.nd
    end = g.base if t == 0.0 else StiefelPoint(g.base.sig, F[:, :nd], Yperp=F[:, nd:], check=False)
    return end, F @ Xt.B[:, :nd]


def transport(g: Geodesic, v: TangentVector, t: float) -> TangentVector:
    """Parallel transport of ``v`` from ``g.base`` to ``g(t)``."""
    if not np.array_equal(v.base.Y, g.base.Y):
        raise FlagError("vector is not based at the start of the geodesic")
    if t == 0.0:
        return v
    end, delta = transport_generator(g, lift(v), t)
    return TangentVector(end, delta, check=False)


def geodesic_projection_coords(P: ProjectionPoint, Z, t: float) -> ProjectionPoint:
    """Geodesic through nested projectors ``P`` with initial velocity ``Z``."""
    Y = from_projection(P)
    v = tangent_from_projection_velocity(P, Z, base=Y)
    if t == 0.0:
        return P
    Yt = geodesic_evaluate(Geodesic(Y, lift(v)), t).Y
    return ProjectionPoint(P.sig, tuple(Yt[:, :ni] @ Yt[:, :ni].T for ni in P.sig.dims), check=False)


def transport_projection_coords(P: ProjectionPoint, Z, t: float, direction=None) -> tuple[np.ndarray, ...]:
    """Transport velocity ``Z`` along the geodesic from ``P`` in ``direction`` (default ``Z``)."""
    if t == 0.0:
        return tuple(np.array(z, dtype=float) for z in Z)
    Y = from_projection(P)
    v = tangent_from_projection_velocity(P, Z, base=Y)
    w = v if direction is None else tangent_from_projection_velocity(P, direction, base=Y)
    return projection_velocity(transport(Geodesic(Y, lift(w)), v, t))


def initial_velocity(g: Geodesic) -> TangentVector:
    return push(g.base, g.gen)
