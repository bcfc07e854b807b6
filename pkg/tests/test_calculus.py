import math
import warnings

import numpy as np
import pytest

from flagopt.calculus import (
    ObjectiveFunction,
    QuotientWarning,
    SingularHessianError,
    _solve_sym,
    check_well_defined,
    directional_derivative,
    gradient_pairing,
    hessian_form,
    hessian_matrix,
    hessian_polarized,
    negate,
    newton_direction,
    riemannian_gradient,
)
from flagopt.geometry import Geodesic
from flagopt.objectives import eigenflag_objective, principal_flag_objective, random_symmetric, trace_family_objective
from flagopt.signature import FlagError, FlagSignature, StiefelPoint, random_block_orthogonal, random_point
from flagopt.tangent import m_basis, metric, push, random_tangent, tangency_residual

SINE = (math.sin, math.cos, lambda x: -math.sin(x))


def quadratic(sig, seed):
    M = random_symmetric(sig.n, seed) / math.sqrt(sig.n)
    return trace_family_objective(M, sig, [SINE, (lambda x: x * x, lambda x: 2 * x, lambda x: 2.0), SINE][: sig.d])


def circle_point(theta):
    return StiefelPoint(FlagSignature((1,), 2), [[math.cos(theta)], [math.sin(theta)]])


class TestGradient:
    def test_grassmann_formula(self, rng):
        sig = FlagSignature((3,), 8)
        f = quadratic(sig, 1)
        p = random_point(sig, rng)
        fY = f.euclidean_gradient(p.Y)
        assert np.linalg.norm(riemannian_gradient(f, p).delta - (fY - p.Y @ p.Y.T @ fY)) < 1e-14

    def test_zero_at_eigenbasis(self):
        M = np.diag([4.0, 2.0, 1.0, -1.0])
        sig = FlagSignature((2,), 4)
        p = StiefelPoint(sig, np.eye(4)[:, [1, 3]])
        assert np.linalg.norm(riemannian_gradient(principal_flag_objective(M, sig), p).delta) == 0.0

    @pytest.mark.parametrize("dims,n", [((2, 3, 5), 8), ((1,), 4), ((3, 7, 12), 60)])
    def test_matches_geodesic_finite_difference(self, dims, n, rng):
        sig = FlagSignature(dims, n)
        f = quadratic(sig, 3)
        p = random_point(sig, rng)
        grad = riemannian_gradient(f, p)
        for _ in range(5):
            v = random_tangent(p, rng)
            g = Geodesic.from_tangent(v)
            h = 1e-5
            fd = (f.value(g(h).Y) - f.value(g(-h).Y)) / (2 * h)
            assert abs(fd - metric(grad, v)) <= 1e-6 * max(1.0, abs(fd))

    def test_tangent_and_dual(self, sig_small, rng):
        f = quadratic(sig_small, 4)
        p = random_point(sig_small, rng)
        grad = riemannian_gradient(f, p)
        assert tangency_residual(p, grad.delta) < 1e-10
        for _ in range(5):
            T = random_tangent(p, rng)
            assert abs(gradient_pairing(f, p, T) - directional_derivative(f, p, T)) < 1e-10

    def test_equivariant_under_block_rotation(self, sig_small, rng):
        f = quadratic(sig_small, 5)
        p = random_point(sig_small, rng)
        K = random_block_orthogonal(sig_small, rng)
        a = riemannian_gradient(f, StiefelPoint(sig_small, p.Y @ K)).delta
        assert np.max(np.abs(a - riemannian_gradient(f, p).delta @ K)) < 1e-10

    def test_bad_gradient_shape(self, sig_small):
        f = ObjectiveFunction(lambda Y: 0.0, lambda Y: np.zeros((3, 3)), check=False)
        with pytest.raises(FlagError):
            riemannian_gradient(f, random_point(sig_small, 0))


class TestHessian:
    def test_grassmann_formula(self, rng):
        sig = FlagSignature((2,), 7)
        f = quadratic(sig, 6)
        p = random_point(sig, rng)
        u, v = random_tangent(p, rng), random_tangent(p, rng)
        fY = f.euclidean_gradient(p.Y)
        closed = f.hessian_bilinear(p.Y, u.delta, v.delta) - np.trace(u.delta.T @ v.delta @ p.Y.T @ fY)
        assert abs(hessian_form(f, p, u, v) - closed) < 1e-10

    def test_symmetric(self, sig_small, rng):
        f = quadratic(sig_small, 7)
        p = random_point(sig_small, rng)
        u, v = random_tangent(p, rng), random_tangent(p, rng)
        assert abs(hessian_form(f, p, u, v) - hessian_form(f, p, v, u)) < 1e-12

    def test_polarization(self, sig_small, rng):
        f = quadratic(sig_small, 8)
        p = random_point(sig_small, rng)
        u, v = random_tangent(p, rng), random_tangent(p, rng)
        assert abs(hessian_form(f, p, u, v) - hessian_polarized(f, p, u, v)) < 1e-12 * max(1, abs(hessian_form(f, p, u, u)))

    def test_second_finite_difference(self, sig_small, rng):
        f = quadratic(sig_small, 9)
        p = random_point(sig_small, rng)
        for _ in range(5):
            v = random_tangent(p, rng)
            g = Geodesic.from_tangent(v)
            h = 1e-3
            fd = (f.value(g(h).Y) - 2 * f.value(p.Y) + f.value(g(-h).Y)) / h**2
            an = hessian_form(f, p, v, v)
            assert abs(fd - an) <= 1e-4 * max(1.0, abs(an))

    def test_missing_second_derivative(self, sig_small, rng):
        base = quadratic(sig_small, 10)
        f = ObjectiveFunction(base.value, base.euclidean_gradient, sig=sig_small)
        p = random_point(sig_small, rng)
        v = random_tangent(p, rng)
        with pytest.raises(FlagError):
            hessian_form(f, p, v, v)
        assert abs(hessian_form(f, p, v, v, fd_fallback=True) - hessian_form(base, p, v, v)) < 1e-6

    def test_matrix_paths_agree(self, sig_small, rng):
        f = quadratic(sig_small, 11)
        slow = ObjectiveFunction(f.value, f.euclidean_gradient, euclidean_hessian=f.euclidean_hessian, check=False)
        p = random_point(sig_small, rng)
        H1, H2 = hessian_matrix(f, p), hessian_matrix(slow, p)
        assert np.max(np.abs(H1 - H2)) < 1e-12
        E = m_basis(sig_small)
        k, l = 3, 7
        assert abs(H1[k, l] - hessian_form(f, p, push(p, E[k]), push(p, E[l]))) < 1e-12


class TestNewton:
    def test_zero_gradient_gives_zero_direction(self):
        M = np.diag([3.0, 2.0, 1.0])
        sig = FlagSignature((1,), 3)
        p = StiefelPoint(sig, np.eye(3)[:, :1])
        assert not np.any(newton_direction(principal_flag_objective(M, sig), p).delta)

    def test_linear_system_residual(self, sig_small, rng):
        f = quadratic(sig_small, 12)
        p = random_point(sig_small, rng)
        X = newton_direction(f, p)
        grad = riemannian_gradient(f, p)
        for E in m_basis(sig_small)[:10]:
            T = push(p, E)
            assert abs(hessian_form(f, p, X, T) + metric(grad, T)) < 1e-8 * max(1.0, np.linalg.norm(grad.delta))

    def test_quadratic_convergence_on_circle(self):
        # minimise -y^T M y on the circle; theta is the angle from the top eigenvector
        M = np.diag([2.0, 1.0])
        f = negate(principal_flag_objective(M, FlagSignature((1,), 2)))
        theta = 0.3
        errors = [theta]
        for _ in range(3):
            p = circle_point(theta)
            X = newton_direction(f, p)
            g = Geodesic.from_tangent(X)
            Y = g(1.0).Y
            theta = math.atan2(Y[1, 0], Y[0, 0])
            theta = (theta + math.pi / 2) % math.pi - math.pi / 2  # the line, not the vector
            errors.append(abs(theta))
        for a, b in zip(errors, errors[1:]):
            assert b <= 4 * a**2 + 1e-15

    def test_singular_system_raises(self):
        with pytest.raises(SingularHessianError):
            _solve_sym(np.zeros((3, 3)), np.ones(3), 1e-8)


class TestWellDefined:
    def test_builtin_objectives_are_invariant(self, sig_small):
        M = random_symmetric(8, 1)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert check_well_defined(principal_flag_objective(M, sig_small), sig_small) < 1e-12
            assert check_well_defined(eigenflag_objective(M, sig_small), sig_small) < 1e-12

    def test_representative_dependent_objective_warns(self, sig_small):
        with pytest.warns(QuotientWarning):
            ObjectiveFunction(lambda Y: float(Y[0, 0]), lambda Y: np.eye(*Y.shape), sig=sig_small, name="entry")

    def test_negate_flips_everything(self, sig_small, rng):
        f = quadratic(sig_small, 13)
        g = negate(f)
        Y = random_point(sig_small, rng).Y
        X = rng.standard_normal(Y.shape)
        assert g.value(Y) == -f.value(Y)
        assert np.array_equal(g.euclidean_gradient(Y), -f.euclidean_gradient(Y))
        assert g.hessian_bilinear(Y, X, X) == -f.hessian_bilinear(Y, X, X)
