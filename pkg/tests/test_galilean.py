import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etclosure.galilean import (
    LagrangeVec14,
    MomentVec14,
    check_multiplier_derivatives,
    identity,
    matmul,
    pairing,
    recompose_moments,
    transform_lagrange,
    transform_lagrange_flat,
    velocity_from_moments,
    x_matrix,
)

from conftest import rand_fraction, small_rationals

F = Fraction
velocities = st.tuples(small_rationals, small_rationals, small_rationals)


def rand_vec(rng, k=3):
    return [rand_fraction(rng, 16) for _ in range(k)]


def rand_moments(rng):
    return MomentVec14.from_flat(rand_vec(rng, 14))


def rand_multipliers(rng):
    return LagrangeVec14.from_flat(rand_vec(rng, 14))


def matvec(X, x):
    return [sum((X[a][b] * x[b] for b in range(14)), F(0)) for a in range(14)]


def kinetic_moments(weights, velocities):
    """Moments of a discrete particle cloud: 1, c_i, c_i c_j, c^2, c^2 c_i."""
    Fm = sum(weights, F(0))
    Fi = [sum((w * c[i] for w, c in zip(weights, velocities)), F(0)) for i in range(3)]
    Fij = [[sum((w * c[i] * c[j] for w, c in zip(weights, velocities)), F(0)) for j in range(3)] for i in range(3)]
    c2 = [sum(x * x for x in c) for c in velocities]
    G = sum((w * s for w, s in zip(weights, c2)), F(0))
    Gi = [sum((w * s * c[i] for w, s, c in zip(weights, c2, velocities)), F(0)) for i in range(3)]
    return MomentVec14(Fm, Fi, Fij, G, Gi)


class TestGroup:
    def test_zero_velocity(self):
        assert x_matrix((0, 0, 0)) == identity()

    def test_inverse_example(self):
        v = (F(1), F(-2), F(1, 3))
        assert matmul(x_matrix([-x for x in v]), x_matrix(v)) == identity()

    def test_composition_example(self):
        assert matmul(x_matrix((1, 0, 0)), x_matrix((0, 1, 0))) == x_matrix((1, 1, 0))

    @given(velocities, velocities)
    @settings(max_examples=30, deadline=None)
    def test_composition(self, u, w):
        assert matmul(x_matrix(u), x_matrix(w)) == x_matrix([a + b for a, b in zip(u, w)])


class TestMoments:
    def test_example(self):
        hat = MomentVec14(2, (0, 0, 0), ((1, 0, 0), (0, 1, 0), (0, 0, 1)), 6, (0, 0, 0))
        out = recompose_moments(hat, (1, 0, 0))
        assert out.F == 2 and out.F_i == (2, 0, 0)
        assert out.F_ij == ((3, 0, 0), (0, 1, 0), (0, 0, 1))
        assert out.G == 8 and out.G_i == (10, 0, 0)

    def test_tensor_and_matrix_routes(self, rng):
        for _ in range(20):
            hat, v = rand_moments(rng), rand_vec(rng)
            assert recompose_moments(hat, v).flat() == matvec(x_matrix(v), hat.flat())

    def test_kinetic_oracle(self, rng):
        # shifting every particle by v must act on the moments like X(v)
        for _ in range(10):
            n = rng.randint(1, 5)
            weights = [abs(rand_fraction(rng)) + 1 for _ in range(n)]
            cs = [rand_vec(rng) for _ in range(n)]
            v = rand_vec(rng)
            shifted = kinetic_moments(weights, [[c[i] + v[i] for i in range(3)] for c in cs])
            assert recompose_moments(kinetic_moments(weights, cs), v) == shifted

    def test_velocity_recovered(self, rng):
        hat = rand_moments(rng)
        hat = MomentVec14(abs(hat.F) + 1, (0, 0, 0), hat.F_ij, hat.G, hat.G_i)
        v = tuple(rand_vec(rng))
        assert velocity_from_moments(recompose_moments(hat, v)) == v

    def test_zero_density(self):
        with pytest.raises(ZeroDivisionError):
            velocity_from_moments(MomentVec14.from_flat([0] * 14))


class TestMultipliers:
    def test_routes_agree(self, rng):
        for _ in range(20):
            m, v = rand_multipliers(rng), rand_vec(rng)
            assert transform_lagrange(m, v) == transform_lagrange_flat(m, v)

    def test_identity_and_heat_multiplier(self, rng):
        m = rand_multipliers(rng)
        assert transform_lagrange(m, (0, 0, 0)) == m
        assert transform_lagrange(m, rand_vec(rng)).lam_i == m.lam_i

    def test_round_trip(self, rng):
        for _ in range(20):
            m, v = rand_multipliers(rng), rand_vec(rng)
            assert transform_lagrange(transform_lagrange(m, v), [-x for x in v]) == m

    def test_pairing_is_frame_invariant(self, rng):
        for _ in range(20):
            m_abs, hat, v = rand_multipliers(rng), rand_moments(rng), rand_vec(rng)
            m_rel = transform_lagrange(m_abs, v)
            assert pairing(m_abs, recompose_moments(hat, v)) == pairing(m_rel, hat)

    def test_derivative_table(self, rng):
        for _ in range(5):
            ok, detail = check_multiplier_derivatives(rand_multipliers(rng), rand_vec(rng))
            assert ok, detail
