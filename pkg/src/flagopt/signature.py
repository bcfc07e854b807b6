"""Flag signatures and the four point representations of a flag.

A flag of type ``(n_1, ..., n_d)`` in R^n is stored most economically as an
``n x n_d`` matrix with orthonormal columns (Stiefel coordinates).  The other
representations are a full orthogonal matrix (orthogonal coordinates) and two
unique, quotient-free forms built from orthogonal projectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

CONSTRUCT_TOL = 1e-12
PROJECTOR_TOL = 1e-10


class FlagError(ValueError):
    """Raised for invalid signatures or points that violate their invariants."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FlagSignature:
    """The integer type ``(n_1 < ... < n_d; n)`` of a flag manifold."""

    dims: tuple[int, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(k) for k in self.dims))
        object.__setattr__(self, "n", int(self.n))
        validate(self)

    @classmethod
    def parse(cls, dims: str | Sequence[int], n: int) -> "FlagSignature":
        if isinstance(dims, str):
            dims = [int(tok) for tok in dims.replace(";", ",").split(",") if tok.strip()]
        return cls(tuple(dims), n)

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def nd(self) -> int:
        return self.dims[-1]

    @property
    def blocks(self) -> tuple[int, ...]:
        """Block sizes ``b_1, ..., b_{d+1}`` (the last one is ``n - n_d``)."""
        edges = (0,) + self.dims + (self.n,)
        return tuple(b - a for a, b in zip(edges[:-1], edges[1:]))

    @property
    def offsets(self) -> tuple[int, ...]:
        """Column offsets ``0, n_1, ..., n_d, n`` delimiting the blocks."""
        return (0,) + self.dims + (self.n,)

    def block_slices(self, include_last: bool = False) -> list[slice]:
        off = self.offsets
        k = self.d + 1 if include_last else self.d
        return [slice(off[i], off[i + 1]) for i in range(k)]

    @property
    def dimension(self) -> int:
        return dimension(self)

    def __str__(self) -> str:
        return "Flag(%s; %d)" % (",".join(map(str, self.dims)), self.n)


def validate(sig: FlagSignature) -> None:
    dims, n = sig.dims, sig.n
    if len(dims) == 0:
        raise FlagError("a flag signature needs at least one subspace dimension")
    if dims[0] <= 0:
        raise FlagError("subspace dimensions must be positive, got %r" % (dims,))
    if any(b <= a for a, b in zip(dims[:-1], dims[1:])):
        raise FlagError("subspace dimensions must be strictly increasing, got %r" % (dims,))
    if dims[-1] >= n:
        raise FlagError("largest subspace dimension %d must be < n = %d" % (dims[-1], n))


def dimension(sig: FlagSignature) -> int:
    """Manifold dimension ``sum_{i<j} b_i b_j`` over the ``d+1`` blocks."""
    b = np.array(sig.blocks)
    return int((b.sum() ** 2 - (b**2).sum()) // 2)


def block_diagonal_mask(sig: FlagSignature) -> np.ndarray:
    """Boolean ``n x n`` mask of the diagonal blocks (the isotropy algebra)."""
    mask = np.zeros((sig.n, sig.n), dtype=bool)
    for s in sig.block_slices(include_last=True):
        mask[s, s] = True
    return mask


# -- points -----------------------------------------------------------------


def _orthonormality_error(Y: np.ndarray) -> float:
    return float(np.linalg.norm(Y.T @ Y - np.eye(Y.shape[1])))


@dataclass(frozen=True, eq=False)
class StiefelPoint:
    """A flag stored as an ``n x n_d`` orthonormal frame ``Y``.

    The first ``n_i`` columns span the i-th subspace.  ``Yperp`` optionally
    caches an orthonormal basis of the complement so that ``[Y, Yperp]`` is
    orthogonal; it is filled in lazily otherwise.
    """

    sig: FlagSignature
    Y: np.ndarray
    Yperp: np.ndarray | None = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        Y = _frozen(self.Y)
        if Y.shape != (self.sig.n, self.sig.nd):
            raise FlagError("Y has shape %s, expected %s" % (Y.shape, (self.sig.n, self.sig.nd)))
        object.__setattr__(self, "Y", Y)
        if self.check:
            err = _orthonormality_error(Y)
            if err > CONSTRUCT_TOL * max(1.0, np.sqrt(self.sig.nd)):
                raise FlagError("columns of Y are not orthonormal (error %.3g)" % err)
        if self.Yperp is not None:
            Yp = _frozen(self.Yperp)
            if Yp.shape != (self.sig.n, self.sig.n - self.sig.nd):
                raise FlagError("Yperp has shape %s" % (Yp.shape,))
            object.__setattr__(self, "Yperp", Yp)
            if self.check:
                err = _orthonormality_error(np.hstack([Y, Yp]))
                if err > CONSTRUCT_TOL * max(1.0, np.sqrt(self.sig.n)):
                    raise FlagError("[Y, Yperp] is not orthogonal (error %.3g)" % err)

    @cached_property
    def Q(self) -> np.ndarray:
        """The orthogonal completion ``[Y, Yperp]``."""
        return complete_basis(self).Q

    def block(self, i: int) -> np.ndarray:
        """The ``n x b_i`` block ``Y_i`` (0-based ``i``)."""
        return self.Y[:, self.sig.block_slices()[i]]


@dataclass(frozen=True, eq=False)
class OrthogonalPoint:
    sig: FlagSignature
    Q: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        Q = _frozen(self.Q)
        if Q.shape != (self.sig.n, self.sig.n):
            raise FlagError("Q has shape %s, expected square of size %d" % (Q.shape, self.sig.n))
        if self.check:
            err = _orthonormality_error(Q)
            if err > CONSTRUCT_TOL * max(1.0, np.sqrt(self.sig.n)):
                raise FlagError("Q is not orthogonal (error %.3g)" % err)
        object.__setattr__(self, "Q", Q)


def _check_projector(P: np.ndarray, rank: int, what: str) -> None:
    scale = max(1.0, np.sqrt(rank))
    if np.linalg.norm(P - P.T) > PROJECTOR_TOL * scale:
        raise FlagError("%s is not symmetric" % what)
    if np.linalg.norm(P @ P - P) > PROJECTOR_TOL * scale:
        raise FlagError("%s is not idempotent" % what)
    if abs(np.trace(P) - rank) > PROJECTOR_TOL * scale:
        raise FlagError("%s has trace %.6g, expected %d" % (what, np.trace(P), rank))


@dataclass(frozen=True, eq=False)
class ProjectionPoint:
    """Nested projectors ``P_1, ..., P_d`` with ``tr P_i = n_i``."""

    sig: FlagSignature
    P: tuple[np.ndarray, ...]
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        P = tuple(_frozen(p) for p in self.P)
        object.__setattr__(self, "P", P)
        if len(P) != self.sig.d:
            raise FlagError("expected %d projectors, got %d" % (self.sig.d, len(P)))
        if not self.check:
            return
        for i, (p, ni) in enumerate(zip(P, self.sig.dims)):
            _check_projector(p, ni, "P_%d" % (i + 1))
        for i in range(len(P)):
            for j in range(i + 1, len(P)):
                if np.linalg.norm(P[j] @ P[i] - P[i]) > PROJECTOR_TOL * max(1.0, np.sqrt(self.sig.dims[i])):
                    raise FlagError("P_%d P_%d != P_%d: projectors are not nested" % (j + 1, i + 1, i + 1))


@dataclass(frozen=True, eq=False)
class ReducedProjectionPoint:
    """Mutually annihilating projectors ``R_1, ..., R_d`` with ``tr R_i = b_i``."""

    sig: FlagSignature
    R: tuple[np.ndarray, ...]
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        R = tuple(_frozen(r) for r in self.R)
        object.__setattr__(self, "R", R)
        if len(R) != self.sig.d:
            raise FlagError("expected %d projectors, got %d" % (self.sig.d, len(R)))
        if not self.check:
            return
        for i, (r, bi) in enumerate(zip(R, self.sig.blocks)):
            _check_projector(r, bi, "R_%d" % (i + 1))
        for i in range(len(R)):
            for j in range(i + 1, len(R)):
                if np.linalg.norm(R[i] @ R[j]) > PROJECTOR_TOL * max(1.0, np.sqrt(self.sig.blocks[i])):
                    raise FlagError("R_%d R_%d != 0" % (i + 1, j + 1))


# -- construction and conversions -------------------------------------------


def qr_positive(A: np.ndarray) -> np.ndarray:
    """Thin QR factor of ``A`` normalised so that ``R`` has a positive diagonal.

    Column spans of every leading block are preserved, so applying this to a
    Stiefel frame never changes the flag it represents.
    """
    Q, R = np.linalg.qr(A)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def random_point(sig: FlagSignature, seed: int | np.random.Generator) -> StiefelPoint:
    """Uniformly distributed flag: orthonormalised standard normal ``n x n_d`` draw."""
    rng = np.random.default_rng(seed)
    Y = qr_positive(rng.standard_normal((sig.n, sig.nd)))
    return StiefelPoint(sig, Y)


def complete_basis(p: StiefelPoint) -> OrthogonalPoint:
    """Extend ``Y`` to an orthogonal ``[Y, Yperp]``; the first columns are ``Y`` itself."""
    if p.Yperp is not None:
        Yperp = p.Yperp
    else:
        Qfull, _ = np.linalg.qr(p.Y, mode="complete")
        Yperp = Qfull[:, p.sig.nd:]
    return OrthogonalPoint(p.sig, np.hstack([p.Y, Yperp]), check=False)


def from_orthogonal(q: OrthogonalPoint) -> StiefelPoint:
    nd = q.sig.nd
    return StiefelPoint(q.sig, q.Q[:, :nd], Yperp=q.Q[:, nd:], check=False)


def to_projection(p: StiefelPoint | OrthogonalPoint) -> ProjectionPoint:
    """Cumulative projectors ``P_i = Y_{:n_i} Y_{:n_i}^T``."""
    M = p.Y if isinstance(p, StiefelPoint) else p.Q
    P = tuple(M[:, :ni] @ M[:, :ni].T for ni in p.sig.dims)
    return ProjectionPoint(p.sig, P, check=False)


def to_reduced(p: StiefelPoint | OrthogonalPoint) -> ReducedProjectionPoint:
    """Block projectors ``R_i = W_i W_i^T`` with ``W_i`` the i-th column block."""
    M = p.Y if isinstance(p, StiefelPoint) else p.Q
    R = tuple(M[:, s] @ M[:, s].T for s in p.sig.block_slices())
    return ReducedProjectionPoint(p.sig, R, check=False)


def projection_to_reduced(p: ProjectionPoint) -> ReducedProjectionPoint:
    prev = np.zeros((p.sig.n, p.sig.n))
    R = []
    for Pi in p.P:
        R.append(Pi - prev)
        prev = Pi
    return ReducedProjectionPoint(p.sig, tuple(R), check=False)


def reduced_to_projection(r: ReducedProjectionPoint) -> ProjectionPoint:
    return ProjectionPoint(r.sig, tuple(np.cumsum(np.array(r.R), axis=0)), check=False)


def _sign_fix(V: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive."""
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def _range_basis(R: np.ndarray, rank: int) -> np.ndarray:
    w, V = np.linalg.eigh((R + R.T) / 2)
    return _sign_fix(V[:, ::-1][:, :rank])


def from_reduced(r: ReducedProjectionPoint) -> StiefelPoint:
    """Stack orthonormal bases of ``im R_1, ..., im R_d`` into a Stiefel frame."""
    ReducedProjectionPoint(r.sig, r.R)  # re-validate
    W = np.hstack([_range_basis(Ri, bi) for Ri, bi in zip(r.R, r.sig.blocks)])
    # blocks are orthogonal only up to roundoff; the triangular clean-up keeps the flag
    return StiefelPoint(r.sig, qr_positive(W))


def from_projection(p: ProjectionPoint) -> StiefelPoint:
    ProjectionPoint(p.sig, p.P)  # re-validate
    return from_reduced(projection_to_reduced(p))


def projection_to_orthogonal(p: ProjectionPoint) -> OrthogonalPoint:
    return complete_basis(from_projection(p))


def same_flag(a: StiefelPoint, b: StiefelPoint, tol: float = PROJECTOR_TOL) -> bool:
    """True iff the cumulative projectors of ``a`` and ``b`` agree to ``tol``."""
    if a.sig != b.sig:
        raise FlagError("cannot compare flags of different signatures %s and %s" % (a.sig, b.sig))
    for ni in a.sig.dims:
        Pa = a.Y[:, :ni] @ a.Y[:, :ni].T
        Pb = b.Y[:, :ni] @ b.Y[:, :ni].T
        if np.linalg.norm(Pa - Pb) > tol:
            return False
    return True


def random_block_orthogonal(sig: FlagSignature, seed, include_last: bool = False) -> np.ndarray:
    """Random element of the isotropy group ``O(b_1) x ... x O(b_d)`` (``x O(b_{d+1})``)."""
    rng = np.random.default_rng(seed)
    blocks = sig.blocks if include_last else sig.blocks[:-1]
    size = sum(blocks)
    K = np.zeros((size, size))
    start = 0
    for b in blocks:
        Qb, _ = np.linalg.qr(rng.standard_normal((b, b)))
        K[start:start + b, start:start + b] = Qb
        start += b
    return K
