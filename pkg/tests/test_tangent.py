import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flagopt.signature import FlagError, FlagSignature, StiefelPoint, random_block_orthogonal, random_point, to_projection, to_reduced
from flagopt.tangent import (
    SkewGenerator,
    TangencyError,
    TangentVector,
    check_tangent_projection_coords,
    check_tangent_reduced_coords,
    generator_coords,
    generator_from_coords,
    generator_metric,
    lift,
    m_basis,
    metric,
    metric_reduced,
    norm,
    project_tangent,
    projection_velocity,
    push,
    random_generator,
    random_tangent,
    reduced_velocity,
    tangency_residual,
    tangent_from_projection_velocity,
    tangent_from_reduced_velocity,
)

from conftest import signatures

CIRCLE = FlagSignature((1,), 2)
E1 = StiefelPoint(CIRCLE, [[1.0], [0.0]])


def test_lift_on_the_circle():
    theta = 0.7
    B = lift(TangentVector(E1, [[0.0], [theta]])).B
    assert np.allclose(B, [[0, -theta], [theta, 0]], atol=0, rtol=0)


def test_lift_of_zero_is_zero(sig_small):
    p = random_point(sig_small, 0)
    assert not np.any(lift(TangentVector(p, np.zeros((8, 5)))).B)


def test_push_of_zero_is_zero(sig_small):
    p = random_point(sig_small, 0)
    assert not np.any(push(p, SkewGenerator(sig_small, np.zeros((8, 8)))).delta)


def test_tangent_equations_rejected(sig_small):
    p = random_point(sig_small, 0)
    with pytest.raises(TangencyError):
        TangentVector(p, p.Y)


def test_lift_refuses_unchecked_normal_vector(sig_small):
    p = random_point(sig_small, 0)
    with pytest.raises(TangencyError):
        lift(TangentVector(p, p.Y, check=False))


def test_generator_validation(sig_small):
    with pytest.raises(FlagError):
        SkewGenerator(sig_small, np.ones((8, 8)))
    inside = np.zeros((8, 8))
    inside[0, 1], inside[1, 0] = 1.0, -1.0  # rotation within the first block
    with pytest.raises(FlagError):
        SkewGenerator(sig_small, inside)


@given(signatures(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_lift_push_round_trips(sig, seed):
    p = random_point(sig, seed)
    B = random_generator(sig, seed + 1)
    v = push(p, B)
    assert np.max(np.abs(lift(v).B - B.B)) < 1e-12
    assert np.linalg.norm(push(p, lift(v)).delta - v.delta) < 1e-12
    assert tangency_residual(p, v.delta) < 1e-12


def test_grassmann_horizontal_space(rng):
    sig = FlagSignature((2,), 6)
    p = random_point(sig, rng)
    v = random_tangent(p, rng)
    assert np.linalg.norm(p.Y.T @ v.delta) < 1e-13


def test_projection_fixes_tangents_and_kills_Y(sig_small, rng):
    p = random_point(sig_small, rng)
    v = random_tangent(p, rng)
    assert np.linalg.norm(project_tangent(p, v.delta).delta - v.delta) < 1e-12
    assert np.linalg.norm(project_tangent(p, p.Y).delta) < 1e-12


def test_projection_residual_is_metric_orthogonal(sig_small, rng):
    p = random_point(sig_small, rng)
    A = rng.standard_normal(p.Y.shape)
    R = TangentVector(p, A - project_tangent(p, A).delta, check=False)
    for _ in range(20):
        assert abs(metric(R, random_tangent(p, rng))) < 1e-10


def test_projection_self_adjoint(sig_small, rng):
    p = random_point(sig_small, rng)
    A, X = rng.standard_normal((2,) + p.Y.shape)
    lhs = np.vdot(project_tangent(p, A).delta, X)
    rhs = np.vdot(A, project_tangent(p, X).delta)
    assert abs(lhs - rhs) < 1e-10


def test_metric_single_block():
    B = SkewGenerator(CIRCLE, [[0.0, -1.0], [1.0, 0.0]])
    assert generator_metric(B, B) == 1.0
    v = push(E1, B)
    assert metric(v, v) == 1.0


def test_metric_matches_generator_form(sig_small, rng):
    p = random_point(sig_small, rng)
    B, C = random_generator(sig_small, rng), random_generator(sig_small, rng)
    upper = sum(
        np.vdot(B.B[a, b], C.B[a, b])
        for i, a in enumerate(sig_small.block_slices(True))
        for b in sig_small.block_slices(True)[i + 1:]
    )
    assert abs(generator_metric(B, C) - upper) < 1e-12
    assert abs(metric(push(p, B), push(p, C)) - upper) < 1e-12


def test_metric_definite(sig_small, rng):
    p = random_point(sig_small, rng)
    v = random_tangent(p, rng)
    assert norm(v) > 0
    assert metric(0 * v, 0 * v) == 0


def test_metric_representative_independent(sig_small, rng):
    p = random_point(sig_small, rng)
    u, v = random_tangent(p, rng), random_tangent(p, rng)
    K = random_block_orthogonal(sig_small, rng)
    pK = StiefelPoint(sig_small, p.Y @ K)
    m = metric(TangentVector(pK, u.delta @ K), TangentVector(pK, v.delta @ K))
    assert abs(m - metric(u, v)) < 1e-10


def test_basis_spans_tangent_space(sig_small):
    p = random_point(sig_small, 0)
    pushed = np.array([push(p, E).delta.ravel() for E in m_basis(sig_small)])
    assert np.linalg.matrix_rank(pushed) == sig_small.dimension
    assert len(pushed) == sig_small.dimension


def test_coords_round_trip(sig_small, rng):
    x = rng.standard_normal(sig_small.dimension)
    assert np.array_equal(generator_coords(generator_from_coords(sig_small, x)), x)


def test_ad_invariance(sig_small, rng):
    B = random_generator(sig_small, rng).B
    H = random_block_orthogonal(sig_small, rng, include_last=True)
    SkewGenerator(sig_small, H @ B @ H.T)  # validates zero diagonal blocks to tolerance


def test_tangent_arithmetic_checks_base(sig_small):
    u = random_tangent(random_point(sig_small, 0), 1)
    v = random_tangent(random_point(sig_small, 2), 3)
    with pytest.raises(FlagError):
        u + v
    assert np.allclose((u - u).delta, 0)
    assert np.allclose((-u).delta, -u.delta)


class TestProjectionCoordinates:
    def test_zero_velocity_is_tangent(self, sig_small):
        P = to_projection(random_point(sig_small, 0))
        assert check_tangent_projection_coords(P, [np.zeros((8, 8))] * 3)

    def test_pushed_velocities_are_tangent(self, sig_small, rng):
        p = random_point(sig_small, rng)
        v = random_tangent(p, rng)
        assert check_tangent_projection_coords(to_projection(p), projection_velocity(v))
        assert check_tangent_reduced_coords(to_reduced(p), reduced_velocity(v))

    def test_projector_is_not_a_velocity(self, sig_small):
        P = to_projection(random_point(sig_small, 0))
        assert not check_tangent_projection_coords(P, P.P)

    def test_zero_velocity_gives_zero_tangent(self, sig_small):
        P = to_projection(random_point(sig_small, 0))
        assert np.linalg.norm(tangent_from_projection_velocity(P, [np.zeros((8, 8))] * 3).delta) == 0

    def test_circle_velocity(self):
        P = to_projection(E1)
        Z = np.array([[0.0, 1.0], [1.0, 0.0]])
        v = tangent_from_projection_velocity(P, [Z], base=E1)
        assert np.allclose(v.delta, [[0.0], [1.0]], atol=1e-15)

    def test_velocity_round_trip(self, sig_small, rng):
        p = random_point(sig_small, rng)
        v = random_tangent(p, rng)
        back = tangent_from_projection_velocity(to_projection(p), projection_velocity(v), base=p)
        for a, b in zip(projection_velocity(back), projection_velocity(v)):
            assert np.linalg.norm(a - b) < 1e-10
        back = tangent_from_reduced_velocity(to_reduced(p), reduced_velocity(v), base=p)
        assert np.linalg.norm(back.delta - v.delta) < 1e-10

    def test_non_tangent_velocity_raises(self, sig_small):
        P = to_projection(random_point(sig_small, 0))
        with pytest.raises(TangencyError):
            tangent_from_projection_velocity(P, P.P)

    def test_reduced_metric_agrees_on_grassmannians(self, rng):
        sig = FlagSignature((3,), 7)
        p = random_point(sig, rng)
        u, v = random_tangent(p, rng), random_tangent(p, rng)
        val = metric_reduced(to_reduced(p), reduced_velocity(u), reduced_velocity(v))
        assert abs(val - metric(u, v)) < 1e-10
