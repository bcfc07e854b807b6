"""Randomized invariant checks behind ``flagopt check``.

Each check draws one random instance from the generator it is given and
returns a residual; the runner keeps the worst residual over all instances.
Sizes stay at desk scale (``n <= 60``).
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .calculus import (
    check_well_defined,
    gradient_from_partials,
    hessian_form,
    hessian_polarized,
    riemannian_gradient,
)
from .geometry import (
    Geodesic,
    _bracket_m,
    distance,
    exp_skew,
    spectral_form,
    transport,
)
from .objectives import (
    SQUARE,
    IDENTITY,
    eigenflag_objective,
    principal_flag_objective,
    random_symmetric,
    trace_family_objective,
    true_principal_flag,
)
from .signature import (
    FlagSignature,
    OrthogonalPoint,
    StiefelPoint,
    block_diagonal_mask,
    complete_basis,
    from_orthogonal,
    from_projection,
    from_reduced,
    random_block_orthogonal,
    random_point,
    to_projection,
    to_reduced,
)
from .tangent import (
    TangentVector,
    lift,
    metric,
    norm,
    project_tangent,
    push,
    random_generator,
    random_tangent,
    tangency_residual,
)

SINE = (math.sin, math.cos, lambda x: -math.sin(x))


class PropertyResult(NamedTuple):
    name: str
    max_residual: float
    tol: float
    passed: bool


class Check(NamedTuple):
    name: str
    tol: float
    fn: Callable[[np.random.Generator], float]


def random_signature(rng: np.random.Generator, n_max: int = 14, d: int | None = None) -> FlagSignature:
    n = int(rng.integers(3, n_max + 1))
    if d is None:
        d = int(rng.integers(1, min(4, n - 1) + 1))
    dims = np.sort(rng.choice(np.arange(1, n), size=d, replace=False))
    return FlagSignature(tuple(int(x) for x in dims), n)


def _objective(rng, sig):
    """Trace family mixing linear, quadratic and sine blocks on a scaled ``M``."""
    M = random_symmetric(sig.n, rng) / math.sqrt(sig.n)
    funcs = [(IDENTITY, SQUARE, SINE)[int(k)] for k in rng.integers(0, 3, size=sig.d)]
    return trace_family_objective(M, sig, funcs, name="mixed")


def _unit(v: TangentVector) -> TangentVector:
    return v * (1.0 / max(norm(v), 1e-300))


def _setup(rng, d=None, n_max=14):
    sig = random_signature(rng, n_max, d)
    p = random_point(sig, rng)
    return sig, p, _objective(rng, sig)


# -- calculus -------------------------------------------------------------------------


def gradient_fd(rng) -> float:
    sig, p, f = _setup(rng)
    v = _unit(random_tangent(p, rng))
    g = Geodesic.from_tangent(v)
    h = 1e-5
    fd = (f.value(g(h).Y) - f.value(g(-h).Y)) / (2 * h)
    grad = riemannian_gradient(f, p)
    an = metric(grad, v)
    return abs(fd - an) / max(abs(an), norm(grad), 1e-3)


def hessian_fd(rng) -> float:
    sig, p, f = _setup(rng)
    v = _unit(random_tangent(p, rng))
    g = Geodesic.from_tangent(v)
    h = 1e-3
    fd = (f.value(g(h).Y) - 2 * f.value(p.Y) + f.value(g(-h).Y)) / h**2
    an = hessian_form(f, p, v, v)
    return abs(fd - an) / max(abs(an), 1.0)


def gradient_tangent(rng) -> float:
    sig, p, f = _setup(rng)
    grad = riemannian_gradient(f, p)
    return tangency_residual(p, grad.delta) / max(1.0, float(np.linalg.norm(grad.delta)))


def gradient_duality(rng) -> float:
    sig, p, f = _setup(rng)
    v = random_tangent(p, rng)
    fY = f.euclidean_gradient(p.Y)
    lhs = metric(gradient_from_partials(p, fY), v)
    rhs = float(np.vdot(fY, v.delta))
    return abs(lhs - rhs) / max(1.0, abs(rhs))


def gradient_equivariance(rng) -> float:
    sig, p, f = _setup(rng)
    K = random_block_orthogonal(sig, rng)
    pK = StiefelPoint(sig, p.Y @ K, check=False)
    a = riemannian_gradient(f, pK).delta
    b = riemannian_gradient(f, p).delta @ K
    return float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b))))


def hessian_polarization(rng) -> float:
    sig, p, f = _setup(rng)
    u, v = random_tangent(p, rng), random_tangent(p, rng)
    a, b = hessian_form(f, p, u, v), hessian_polarized(f, p, u, v)
    scale = max(1.0, abs(hessian_form(f, p, u, u)), abs(hessian_form(f, p, v, v)))
    return abs(a - b) / scale


# -- tangent spaces ------------------------------------------------------------------


def projection_idempotent(rng) -> float:
    sig, p, _ = _setup(rng)
    A = rng.standard_normal(p.Y.shape)
    X = rng.standard_normal(p.Y.shape)
    PA = project_tangent(p, A).delta
    PPA = project_tangent(p, PA).delta
    sa = abs(float(np.vdot(PA, X)) - float(np.vdot(A, project_tangent(p, X).delta)))
    return max(float(np.linalg.norm(PPA - PA)), sa) / max(1.0, float(np.linalg.norm(A) * np.linalg.norm(X)))


def lift_push_roundtrip(rng) -> float:
    sig, p, _ = _setup(rng)
    v = random_tangent(p, rng)
    return float(np.linalg.norm(push(p, lift(v)).delta - v.delta)) / max(1.0, float(np.linalg.norm(v.delta)))


def ad_invariance(rng) -> float:
    sig = random_signature(rng, 20)
    B = random_generator(sig, rng).B
    H = random_block_orthogonal(sig, rng, include_last=True)
    C = H @ B @ H.T
    return max(float(np.max(np.abs(C[block_diagonal_mask(sig)]), initial=0.0)), float(np.max(np.abs(C + C.T))))


def metric_representative(rng) -> float:
    sig, p, _ = _setup(rng)
    u, v = random_tangent(p, rng), random_tangent(p, rng)
    K = random_block_orthogonal(sig, rng)
    pK = StiefelPoint(sig, p.Y @ K, check=False)
    a = metric(TangentVector(pK, u.delta @ K, check=False), TangentVector(pK, v.delta @ K, check=False))
    b = metric(u, v)
    return abs(a - b) / max(1.0, abs(b))


# -- coordinates -------------------------------------------------------------------------


def coordinate_roundtrip(rng) -> float:
    sig = random_signature(rng, 20)
    p = random_point(sig, rng)
    P = to_projection(p)
    worst = 0.0
    for q in (from_projection(P), from_reduced(to_reduced(p)), from_orthogonal(complete_basis(p))):
        for A, B in zip(to_projection(q).P, P.P):
            worst = max(worst, float(np.linalg.norm(A - B)))
    return worst


def projection_representative(rng) -> float:
    sig = random_signature(rng, 20)
    p = random_point(sig, rng)
    K = random_block_orthogonal(sig, rng)
    a = to_projection(StiefelPoint(sig, p.Y @ K, check=False)).P
    b = to_projection(p).P
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


# -- geodesics and transport ------------------------------------------------------------


def _geodesic(rng, n_max=14, d=None, unit=True):
    sig = random_signature(rng, n_max, d)
    p = random_point(sig, rng)
    v = random_tangent(p, rng)
    if unit:
        v = _unit(v)
    return sig, p, Geodesic.from_tangent(v)


def geodesic_orthonormality(rng) -> float:
    sig, p, g = _geodesic(rng, 60)
    t = float(rng.uniform(0.0, 10.0))
    Q = g.frame(t)
    return float(np.linalg.norm(Q.T @ Q - np.eye(sig.n)))


def geodesic_forms_agree(rng) -> float:
    sig, p, g = _geodesic(rng, 30)
    t = float(rng.uniform(0.0, 10.0))
    S = spectral_form(g.gen)
    nd = sig.nd
    a = (g.Q @ exp_skew(g.gen, t))[:, :nd]
    b = (g.Q @ S.exp(t))[:, :nd]
    return float(np.linalg.norm(a - b))


def transport_isometry(rng) -> float:
    sig, p, g = _geodesic(rng, 20)
    u, v = _unit(random_tangent(p, rng)), _unit(random_tangent(p, rng))
    t = float(rng.uniform(0.0, 3.0))
    tu, tv = transport(g, u, t), transport(g, v, t)
    return max(abs(metric(tu, tv) - metric(u, v)), abs(metric(tu, tu) - 1.0))


def transport_tangency(rng) -> float:
    sig, p, g = _geodesic(rng, 20)
    u = _unit(random_tangent(p, rng))
    tu = transport(g, u, float(rng.uniform(0.0, 3.0)))
    return tangency_residual(tu.base, tu.delta)


def distance_symmetric(rng) -> float:
    sig, p, g = _geodesic(rng, 20)
    a = complete_basis(p)
    b = OrthogonalPoint(sig, g.frame(float(rng.uniform(0.1, 1.0))), check=False)
    return max(abs(distance(a, b) - distance(b, a)), distance(a, a))


# -- Grassmannian (d = 1) reductions -------------------------------------------------


def _grassmann(rng):
    sig = random_signature(rng, 14, d=1)
    p = random_point(sig, rng)
    return sig, p, _objective(rng, sig)


def grassmann_gradient(rng) -> float:
    sig, p, f = _grassmann(rng)
    fY = f.euclidean_gradient(p.Y)
    closed = fY - p.Y @ (p.Y.T @ fY)
    return float(np.linalg.norm(riemannian_gradient(f, p).delta - closed)) / max(1.0, float(np.linalg.norm(fY)))


def grassmann_hessian(rng) -> float:
    sig, p, f = _grassmann(rng)
    u, v = random_tangent(p, rng), random_tangent(p, rng)
    fY = f.euclidean_gradient(p.Y)
    closed = f.hessian_bilinear(p.Y, u.delta, v.delta) - float(np.vdot(u.delta @ (p.Y.T @ fY), v.delta))
    return abs(hessian_form(f, p, u, v) - closed) / max(1.0, abs(closed))


def grassmann_geodesic(rng) -> float:
    sig, p, f = _grassmann(rng)
    v = random_tangent(p, rng)
    t = float(rng.uniform(0.0, 2.0))
    U, s, Vt = np.linalg.svd(v.delta, full_matrices=False)
    closed = p.Y @ Vt.T @ np.diag(np.cos(s * t)) @ Vt + U @ np.diag(np.sin(s * t)) @ Vt
    return float(np.linalg.norm(Geodesic.from_tangent(v)(t).Y - closed))


def grassmann_transport(rng) -> float:
    sig, p, f = _grassmann(rng)
    v, w = random_tangent(p, rng), random_tangent(p, rng)
    t = float(rng.uniform(0.0, 2.0))
    U, s, Vt = np.linalg.svd(v.delta, full_matrices=False)
    n = sig.n
    T = -p.Y @ Vt.T @ np.diag(np.sin(s * t)) @ U.T + U @ np.diag(np.cos(s * t)) @ U.T + (np.eye(n) - U @ U.T)
    closed = T @ w.delta
    got = transport(Geodesic.from_tangent(v), w, t).delta
    return float(np.linalg.norm(got - closed)) / max(1.0, float(np.linalg.norm(w.delta)))


def grassmann_bracket(rng) -> float:
    sig = random_signature(rng, 20, d=1)
    B, X = random_generator(sig, rng).B, random_generator(sig, rng).B
    return float(np.max(np.abs(_bracket_m(sig, B, X))))


def grassmann_distance(rng) -> float:
    sig = random_signature(rng, 20, d=1)
    p = random_point(sig, rng)
    v = random_tangent(p, rng)
    # keep every principal angle below pi/2
    v = v * (float(rng.uniform(0.1, 1.5)) / max(float(np.linalg.norm(v.delta, 2)), 1e-300))
    g = Geodesic.from_tangent(v)
    end = g(1.0)
    theta = scipy.linalg.subspace_angles(p.Y, end.Y)
    d = distance(complete_basis(p), OrthogonalPoint(sig, g.frame(1.0), check=False))
    return abs(d - float(np.sqrt(np.sum(theta**2))))


# -- objectives ----------------------------------------------------------------------


def objectives_well_defined(rng) -> float:
    sig = random_signature(rng, 20)
    M = random_symmetric(sig.n, rng)
    worst = 0.0
    for f in (principal_flag_objective(M, sig), eigenflag_objective(M, sig)):
        worst = max(worst, check_well_defined(f, sig, samples=1, seed=rng))
    return worst


def oracle_value(rng) -> float:
    sig = random_signature(rng, 30)
    M = random_symmetric(sig.n, rng)
    sol = true_principal_flag(M, sig)
    f = principal_flag_objective(M, sig)
    return abs(f.value(sol.point.Y) - sol.value) / max(1.0, abs(sol.value))


def ky_fan_bound(rng) -> float:
    """Positive part of ``f(Y) - f*``; zero whenever the bound holds."""
    sig = random_signature(rng, 30)
    M = random_symmetric(sig.n, rng)
    f = principal_flag_objective(M, sig)
    return max(0.0, f.value(random_point(sig, rng).Y) - true_principal_flag(M, sig).value)


CHECKS: tuple[Check, ...] = (
    Check("gradient vs geodesic finite difference", 1e-5, gradient_fd),
    Check("hessian diagonal vs second difference", 1e-4, hessian_fd),
    Check("gradient tangency", 1e-10, gradient_tangent),
    Check("gradient metric duality", 1e-10, gradient_duality),
    Check("gradient representative independence", 1e-10, gradient_equivariance),
    Check("hessian polarization", 1e-12, hessian_polarization),
    Check("projection idempotent and self-adjoint", 1e-10, projection_idempotent),
    Check("lift/push round trip", 1e-12, lift_push_roundtrip),
    Check("Ad_H invariance of m", 1e-12, ad_invariance),
    Check("metric representative independence", 1e-10, metric_representative),
    Check("coordinate round trips", 1e-10, coordinate_roundtrip),
    Check("projectors under block rotation", 1e-12, projection_representative),
    Check("geodesic orthonormality", 1e-12, geodesic_orthonormality),
    Check("exp_skew vs spectral geodesic", 1e-10, geodesic_forms_agree),
    Check("transport isometry", 1e-9, transport_isometry),
    Check("transport tangency", 1e-9, transport_tangency),
    Check("distance symmetric and zero on diagonal", 1e-10, distance_symmetric),
    Check("d=1 gradient closed form", 1e-12, grassmann_gradient),
    Check("d=1 hessian closed form", 1e-12, grassmann_hessian),
    Check("d=1 geodesic closed form", 1e-12, grassmann_geodesic),
    Check("d=1 transport closed form", 1e-12, grassmann_transport),
    Check("d=1 bracket_m identically zero", 0.0, grassmann_bracket),
    Check("d=1 distance vs principal angles", 1e-8, grassmann_distance),
    Check("objectives quotient well-defined", 1e-12, objectives_well_defined),
    Check("oracle value at oracle flag", 1e-10, oracle_value),
    Check("Ky Fan upper bound", 1e-10, ky_fan_bound),
)


def corrupted_tangent(rng) -> float:
    """Negative control: a raw ambient matrix fed in without projection."""
    sig, p, _ = _setup(rng)
    A = rng.standard_normal(p.Y.shape)
    return tangency_residual(p, A)


def run_check(check: Check, seed: int, instances: int) -> float:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), sum(map(ord, check.name))]))
    return max(check.fn(rng) for _ in range(instances))


def run_all(seed: int, instances: int = 100):
    results = []
    for c in CHECKS:
        r = run_check(c, seed, instances)
        results.append(PropertyResult(c.name, r, c.tol, bool(r <= c.tol)))
    # the control passes when the tangency check rejects every corrupted input
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    worst = min(corrupted_tangent(rng) for _ in range(instances))
    results.append(PropertyResult("negative control: unprojected tangent rejected", worst, 1e-10, bool(worst > 1e-10)))
    return results
