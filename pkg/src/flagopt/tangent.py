"""Tangent vectors, the canonical metric and the skew-symmetric lift.

A tangent vector at a Stiefel frame ``Y`` is stored as an ambient
``n x n_d`` matrix ``delta``.  Every such vector is ``[Y, Yperp] B I_{n,n_d}``
for a unique skew ``B`` whose diagonal blocks vanish; ``lift`` and ``push``
translate between the two forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signature import (
    FlagError,
    FlagSignature,
    ProjectionPoint,
    ReducedProjectionPoint,
    StiefelPoint,
    block_diagonal_mask,
    from_projection,
    from_reduced,
)

TANGENT_TOL = 1e-10
PROJECTION_COORDS_TOL = 1e-8


class TangencyError(FlagError):
    """A matrix failed the tangent-space equations at its base point."""


def _nd_block_mask(sig: FlagSignature) -> np.ndarray:
    return block_diagonal_mask(sig)[: sig.nd, : sig.nd]


def normal_part(sig: FlagSignature, S: np.ndarray) -> np.ndarray:
    """Component of ``S = Y^T A`` that no tangent vector can have.

    Tangent vectors have ``Y^T X`` skew with zero diagonal blocks, so the
    diagonal blocks and the symmetric off-diagonal part are normal.
    """
    mask = _nd_block_mask(sig)
    N = np.where(mask, S, 0.5 * (S + S.T))
    return N


def tangency_residual(p: StiefelPoint, delta: np.ndarray) -> float:
    return float(np.linalg.norm(normal_part(p.sig, p.Y.T @ delta)))


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: StiefelPoint
    delta: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float)
        delta.flags.writeable = False
        if delta.shape != self.base.Y.shape:
            raise TangencyError("delta has shape %s, expected %s" % (delta.shape, self.base.Y.shape))
        object.__setattr__(self, "delta", delta)
        if self.check:
            res = tangency_residual(self.base, delta)
            if res > TANGENT_TOL * (1.0 + np.linalg.norm(delta)):
                raise TangencyError("matrix is not tangent at the base point (residual %.3g)" % res)

    @property
    def sig(self) -> FlagSignature:
        return self.base.sig

    def __add__(self, other: "TangentVector") -> "TangentVector":
        _same_base(self, other)
        return TangentVector(self.base, self.delta + other.delta, check=False)

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        _same_base(self, other)
        return TangentVector(self.base, self.delta - other.delta, check=False)

    def __mul__(self, c: float) -> "TangentVector":
        return TangentVector(self.base, c * self.delta, check=False)

    __rmul__ = __mul__

    def __neg__(self) -> "TangentVector":
        return TangentVector(self.base, -self.delta, check=False)


@dataclass(frozen=True, eq=False)
class SkewGenerator:
    """Element of the horizontal algebra: skew ``n x n`` with zero diagonal blocks."""

    sig: FlagSignature
    B: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        n = self.sig.n
        if B.shape != (n, n):
            raise FlagError("generator has shape %s, expected %s" % (B.shape, (n, n)))
        mask = block_diagonal_mask(self.sig)
        if self.check:
            tol = TANGENT_TOL * (1.0 + np.linalg.norm(B))
            if np.linalg.norm(B + B.T) > tol:
                raise FlagError("generator is not skew-symmetric")
            if np.linalg.norm(B[mask]) > tol:
                raise FlagError("generator has nonzero diagonal blocks")
        B = 0.5 * (B - B.T)
        B[mask] = 0.0
        B.flags.writeable = False
        object.__setattr__(self, "B", B)

    def __add__(self, other: "SkewGenerator") -> "SkewGenerator":
        return SkewGenerator(self.sig, self.B + other.B, check=False)

    def __mul__(self, c: float) -> "SkewGenerator":
        return SkewGenerator(self.sig, c * self.B, check=False)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.B) / np.sqrt(2.0))


def _same_base(u: TangentVector, v: TangentVector) -> None:
    if u.base is v.base:
        return
    if u.base.sig != v.base.sig or not np.array_equal(u.base.Y, v.base.Y):
        raise FlagError("tangent vectors live at different base points")


def lift(v: TangentVector) -> SkewGenerator:
    """The generator ``B`` with ``v.delta = [Y, Yperp] B I_{n,n_d}``."""
    p = v.base
    nd = p.sig.nd
    res = tangency_residual(p, v.delta)
    if res > TANGENT_TOL * (1.0 + np.linalg.norm(v.delta)):
        raise TangencyError("cannot lift a non-tangent matrix (residual %.3g)" % res)
    A = p.Q.T @ v.delta
    B = np.zeros((p.sig.n, p.sig.n))
    B[:, :nd] = A
    B[:nd, nd:] = -A[nd:, :].T
    return SkewGenerator(p.sig, B, check=False)


def push(p: StiefelPoint, B: SkewGenerator) -> TangentVector:
    return TangentVector(p, p.Q @ B.B[:, : p.sig.nd], check=False)


def project_tangent(p: StiefelPoint, ambient: np.ndarray) -> TangentVector:
    """Frobenius-orthogonal projection of an ``n x n_d`` matrix onto the tangent space."""
    ambient = np.asarray(ambient, dtype=float)
    N = normal_part(p.sig, p.Y.T @ ambient)
    return TangentVector(p, ambient - p.Y @ N, check=False)


def metric(u: TangentVector, v: TangentVector) -> float:
    """Canonical metric, ``tr(u^T (I - Y Y^T / 2) v)`` in ambient form."""
    _same_base(u, v)
    Y = u.base.Y
    return float(np.vdot(u.delta, v.delta) - 0.5 * np.vdot(Y.T @ u.delta, Y.T @ v.delta))


def norm(v: TangentVector) -> float:
    return float(np.sqrt(max(metric(v, v), 0.0)))


def generator_metric(B: SkewGenerator, C: SkewGenerator) -> float:
    return float(0.5 * np.vdot(B.B, C.B))


def zero_tangent(p: StiefelPoint) -> TangentVector:
    return TangentVector(p, np.zeros_like(p.Y), check=False)


# -- horizontal algebra -----------------------------------------------------


def m_index(sig: FlagSignature) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the free entries of a generator (upper off-diagonal blocks)."""
    mask = ~block_diagonal_mask(sig)
    rows, cols = np.nonzero(np.triu(mask))
    return rows, cols


def generator_from_coords(sig: FlagSignature, x: np.ndarray) -> SkewGenerator:
    """Inverse of ``generator_coords``; the canonical basis is metric-orthonormal."""
    rows, cols = m_index(sig)
    B = np.zeros((sig.n, sig.n))
    B[rows, cols] = x
    B[cols, rows] = -np.asarray(x)
    return SkewGenerator(sig, B, check=False)


def generator_coords(B: SkewGenerator) -> np.ndarray:
    rows, cols = m_index(B.sig)
    return B.B[rows, cols].copy()


def m_basis(sig: FlagSignature) -> list[SkewGenerator]:
    dim = len(m_index(sig)[0])
    eye = np.eye(dim)
    return [generator_from_coords(sig, eye[k]) for k in range(dim)]


def random_generator(sig: FlagSignature, seed) -> SkewGenerator:
    rng = np.random.default_rng(seed)
    return generator_from_coords(sig, rng.standard_normal(len(m_index(sig)[0])))


def random_tangent(p: StiefelPoint, seed) -> TangentVector:
    return push(p, random_generator(p.sig, seed))


# -- projection coordinates -------------------------------------------------


def _tol(Z) -> float:
    return PROJECTION_COORDS_TOL * (1.0 + max(float(np.linalg.norm(z)) for z in Z))


def check_tangent_projection_coords(P: ProjectionPoint, Z) -> bool:
    """Whether ``Z = (Z_1, ..., Z_d)`` is tangent at the nested projectors ``P``."""
    Z = [np.asarray(z, dtype=float) for z in Z]
    if len(Z) != P.sig.d:
        return False
    tol = _tol(Z)
    for i, (Pi, Zi) in enumerate(zip(P.P, Z)):
        if np.linalg.norm(Zi - Zi.T) > tol or abs(np.trace(Zi)) > tol:
            return False
        if np.linalg.norm(Zi @ Pi + Pi @ Zi - Zi) > tol:
            return False
        for j in range(i + 1, len(Z)):
            if np.linalg.norm(Z[j] @ Pi + P.P[j] @ Zi - Zi) > tol:
                return False
    return True


def check_tangent_reduced_coords(R: ReducedProjectionPoint, Z) -> bool:
    Z = [np.asarray(z, dtype=float) for z in Z]
    if len(Z) != R.sig.d:
        return False
    tol = _tol(Z)
    for i, (Ri, Zi) in enumerate(zip(R.R, Z)):
        if np.linalg.norm(Zi - Zi.T) > tol or abs(np.trace(Zi)) > tol:
            return False
        if np.linalg.norm(Ri @ Zi + Zi @ Ri - Zi) > tol:
            return False
        for j in range(i + 1, len(Z)):
            if np.linalg.norm(Zi @ R.R[j] + Ri @ Z[j]) > tol:
                return False
    return True


def projection_velocity(v: TangentVector) -> tuple[np.ndarray, ...]:
    """``Z_i = Y_i X_i^T + X_i Y_i^T`` over the leading ``n_i`` columns."""
    Y, X = v.base.Y, v.delta
    out = []
    for ni in v.sig.dims:
        YX = Y[:, :ni] @ X[:, :ni].T
        out.append(YX + YX.T)
    return tuple(out)


def reduced_velocity(v: TangentVector) -> tuple[np.ndarray, ...]:
    Y, X = v.base.Y, v.delta
    out = []
    for s in v.sig.block_slices():
        WX = Y[:, s] @ X[:, s].T
        out.append(WX + WX.T)
    return tuple(out)


def tangent_from_reduced_velocity(R: ReducedProjectionPoint, Z, base: StiefelPoint | None = None) -> TangentVector:
    """Stiefel tangent whose i-th column block is ``Z_i W_i``."""
    if not check_tangent_reduced_coords(R, Z):
        raise TangencyError("velocity is not tangent at the given reduced projection point")
    p = from_reduced(R) if base is None else base
    X = np.hstack([np.asarray(Zi) @ p.Y[:, s] for Zi, s in zip(Z, R.sig.block_slices())])
    return project_tangent(p, X)


def tangent_from_projection_velocity(P: ProjectionPoint, Z, base: StiefelPoint | None = None) -> TangentVector:
    """Stiefel tangent at ``from_projection(P)`` (or ``base``) inducing velocity ``Z``."""
    if not check_tangent_projection_coords(P, Z):
        raise TangencyError("velocity is not tangent at the given projection point")
    Zr, prev = [], 0.0
    for Zi in Z:
        Zr.append(np.asarray(Zi) - prev)
        prev = np.asarray(Zi)
    p = from_projection(P) if base is None else base
    X = np.hstack([Zi @ p.Y[:, s] for Zi, s in zip(Zr, P.sig.block_slices())])
    return project_tangent(p, X)


def metric_reduced(R: ReducedProjectionPoint, W, Z) -> float:
    """Sum of the Grassmannian metrics of the block velocities, ``sum_i tr(A_i^T B_i)``.

    This is the pull-back of the product metric on ``Gr(b_1) x ... x Gr(b_d)``.
    It coincides with :func:`metric` for ``d = 1``; for ``d > 1`` rotations
    between two interior blocks move both blocks and are counted twice.
    """
    total = 0.0
    for Ri, Wi, Zi, bi in zip(R.R, W, Z, R.sig.blocks):
        w, V = np.linalg.eigh((Ri + Ri.T) / 2)
        V = V[:, ::-1][:, :bi]
        total += float(np.vdot(np.asarray(Wi) @ V, np.asarray(Zi) @ V))
    return total
