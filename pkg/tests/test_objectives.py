import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flagopt.calculus import check_well_defined, riemannian_gradient
from flagopt.geometry import Geodesic
from flagopt.objectives import (
    SymmetricMatrixProblem,
    eigenflag_objective,
    flag_distance,
    nearest_principal_solution,
    principal_flag_objective,
    principal_solution_distance,
    random_symmetric,
    symmetrize,
    trace_family_objective,
    true_principal_flag,
)
from flagopt.signature import FlagError, FlagSignature, StiefelPoint, qr_positive, random_point, same_flag
from flagopt.tangent import metric, random_tangent

from conftest import signatures

D321 = np.diag([3.0, 2.0, 1.0])
S12 = FlagSignature((1, 2), 3)
I32 = np.eye(3)[:, :2]


def fd_check(f, p, rng, h=1e-5):
    grad = riemannian_gradient(f, p)
    worst = 0.0
    for _ in range(5):
        v = random_tangent(p, rng)
        g = Geodesic.from_tangent(v)
        fd = (f.value(g(h).Y) - f.value(g(-h).Y)) / (2 * h)
        worst = max(worst, abs(fd - metric(grad, v)) / max(1.0, abs(fd)))
    return worst


class TestPrincipal:
    def test_identity_matrix_is_constant(self, sig_small, rng):
        f = principal_flag_objective(np.eye(8), sig_small)
        vals = {round(f.value(random_point(sig_small, rng).Y), 12) for _ in range(5)}
        assert vals == {5.0}

    def test_diagonal_sum(self):
        assert principal_flag_objective(D321, S12).value(I32) == 5.0

    def test_gradient_matches_finite_difference(self, sig_small, rng):
        f = principal_flag_objective(random_symmetric(8, 3), sig_small)
        assert fd_check(f, random_point(sig_small, rng), rng) < 1e-6

    def test_shape_mismatch(self, sig_small):
        with pytest.raises(FlagError):
            principal_flag_objective(np.eye(7), sig_small)

    def test_symmetrised_on_ingestion(self, rng):
        A = rng.standard_normal((5, 5))
        M = symmetrize(A)
        assert np.linalg.norm(M - M.T) <= 1e-12 * np.linalg.norm(M)
        prob = SymmetricMatrixProblem(A, FlagSignature((2,), 5))
        assert np.array_equal(prob.M, M)


class TestEigenflag:
    def test_coordinate_flag_value(self):
        assert eigenflag_objective(D321, S12).value(I32) == 13.0

    def test_zero_matrix(self, sig_small, rng):
        f = eigenflag_objective(np.zeros((8, 8)), sig_small)
        Y = random_point(sig_small, rng).Y
        assert f.value(Y) == 0.0
        assert not np.any(f.euclidean_gradient(Y))

    def test_gradient_block_formula(self, sig_small, rng):
        M = random_symmetric(8, 5)
        Y = random_point(sig_small, rng).Y
        G = eigenflag_objective(M, sig_small).euclidean_gradient(Y)
        for s in sig_small.block_slices():
            Yi = Y[:, s]
            assert np.allclose(G[:, s], 4 * np.trace(Yi.T @ M @ Yi) * M @ Yi, atol=1e-13)

    @given(signatures(n_max=9), st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_gradient_matches_finite_difference(self, sig, seed):
        rng = np.random.default_rng(seed)
        f = eigenflag_objective(random_symmetric(sig.n, rng), sig)
        assert fd_check(f, random_point(sig, rng), rng) < 1e-6

    def test_coordinate_flags_brute_force(self):
        f = eigenflag_objective(D321, S12)
        best = max(f.value(np.eye(3)[:, [i, j]]) for i in range(3) for j in range(3) if i != j)
        assert best == 13.0


class TestTraceFamily:
    def test_single_function_broadcasts(self, sig_small):
        M = random_symmetric(8, 1)
        a = trace_family_objective(M, sig_small, [(lambda x: x * x, lambda x: 2 * x, lambda x: 2.0)])
        Y = random_point(sig_small, 0).Y
        assert a.value(Y) == eigenflag_objective(M, sig_small).value(Y)

    def test_wrong_function_count(self, sig_small):
        ident = (lambda x: x, lambda x: 1.0, lambda x: 0.0)
        with pytest.raises(FlagError):
            trace_family_objective(np.eye(8), sig_small, [ident, ident])

    def test_hvp_matches_gradient_difference(self, sig_small, rng):
        f = trace_family_objective(random_symmetric(8, 2), sig_small, [(np.exp, np.exp, np.exp)])
        Y = random_point(sig_small, rng).Y / 3
        X = rng.standard_normal(Y.shape)
        h = 1e-6
        fd = (f.euclidean_gradient(Y + h * X) - f.euclidean_gradient(Y - h * X)) / (2 * h)
        assert np.linalg.norm(fd - f.euclidean_hvp(Y, X)) < 1e-6 * np.linalg.norm(fd)

    def test_custom_problem_needs_functions(self, sig_small):
        with pytest.raises(FlagError):
            SymmetricMatrixProblem(np.eye(8), sig_small, "custom")
        with pytest.raises(FlagError):
            SymmetricMatrixProblem(np.eye(8), sig_small, "cca")

    def test_builtins_are_quotient_invariant(self, sig_small):
        M = random_symmetric(8, 9)
        for family in ("principal", "eigenflag"):
            f = SymmetricMatrixProblem(M, sig_small, family).objective()
            assert check_well_defined(f, sig_small, samples=10) < 1e-12


class TestOracle:
    def test_diagonal(self):
        sol = true_principal_flag(D321, S12)
        assert sol.value == 5.0 and sol.unique
        assert same_flag(sol.point, StiefelPoint(S12, I32))

    def test_value_spectral_invariance(self, rng):
        sig = FlagSignature((2, 5), 9)
        M = random_symmetric(9, rng)
        Q = qr_positive(rng.standard_normal((9, 9)))
        a, b = true_principal_flag(M, sig).value, true_principal_flag(Q @ M @ Q.T, sig).value
        assert abs(a - b) < 1e-12 * max(1, abs(a))

    def test_degenerate_gap(self):
        sig = FlagSignature((1, 2), 4)
        sol = true_principal_flag(np.diag([5.0, 2.0, 2.0, 1.0]), sig)
        assert sol.value == 7.0
        assert not sol.unique

    def test_sign_convention(self, rng):
        sol = true_principal_flag(random_symmetric(10, rng), FlagSignature((3,), 10))
        Y = sol.point.Y
        first = Y[np.argmax(np.abs(Y) > 1e-14, axis=0), np.arange(3)]
        assert np.all(first > 0)

    def test_value_at_oracle_point(self, rng):
        sig = FlagSignature((3, 7, 12), 60)
        M = random_symmetric(60, rng)
        sol = true_principal_flag(M, sig)
        assert abs(principal_flag_objective(M, sig).value(sol.point.Y) - sol.value) < 1e-10 * abs(sol.value)

    def test_ky_fan_bound(self, rng):
        sig = FlagSignature((2, 5), 12)
        M = random_symmetric(12, rng)
        f, top = principal_flag_objective(M, sig), true_principal_flag(M, sig).value
        for _ in range(100):
            assert f.value(random_point(sig, rng).Y) <= top + 1e-10


class TestDistances:
    def test_zero_for_same_flag(self, sig_small, rng):
        p = random_point(sig_small, rng)
        assert flag_distance(p, p) == 0.0

    def test_coordinate_flags(self):
        a = StiefelPoint(S12, I32)
        b = StiefelPoint(S12, np.eye(3)[:, [1, 0]])
        # P_1 differs by two unit entries, P_2 agrees
        assert abs(flag_distance(a, b) - 1.0) < 1e-15

    def test_nearest_solution_is_optimal(self, rng):
        sig = FlagSignature((2, 4), 10)
        M = random_symmetric(10, rng)
        p = random_point(sig, rng)
        q = nearest_principal_solution(p, M)
        sol = true_principal_flag(M, sig)
        assert abs(principal_flag_objective(M, sig).value(q.Y) - sol.value) < 1e-10
        assert principal_solution_distance(sol.point, M) < 1e-12
        assert principal_solution_distance(p, M) <= flag_distance(p, sol.point) + 1e-12
