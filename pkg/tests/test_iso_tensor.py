import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etclosure.iso_tensor import (
    ConcretePoly,
    IsoScalarPoly,
    IsoVectorPoly,
    OddRank,
    ParityError,
    TensorState,
    dfact,
    iso_dmu_k,
    pairings,
    sym_delta_contract,
    tensor_invariant,
)
from etclosure.scalar_field import LAM, MU, ScalarFn

from conftest import rand_fraction

F = Fraction


def brute_sym_delta(indices):
    """Full symmetrization of a product of Kronecker deltas, by averaging
    over every permutation of the index slots."""
    n = len(indices)
    total = 0
    count = 0
    for perm in itertools.permutations(range(n)):
        term = 1
        for k in range(0, n, 2):
            if indices[perm[k]] != indices[perm[k + 1]]:
                term = 0
                break
        total += term
        count += 1
    return F(total, count)


def brute_contract(slots):
    """Sum over all 3^(2m) index assignments of delta^(a...) times the slots."""
    legs = sum(1 if kind == "v" else 2 for kind, _ in slots)
    total = F(0)
    cache = {}
    for idx in itertools.product(range(3), repeat=legs):
        key = tuple(sorted(idx))
        if key not in cache:
            cache[key] = brute_sym_delta(idx)
        d = cache[key]
        if not d:
            continue
        val = d
        pos = 0
        for kind, obj in slots:
            if kind == "v":
                val *= obj[idx[pos]]
                pos += 1
            else:
                val *= obj[idx[pos]][idx[pos + 1]]
                pos += 2
        total += val
    return total


def rand_vec(rng):
    return tuple(rand_fraction(rng, 9) for _ in range(3))


def rand_sym(rng):
    m = [[F(0)] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            m[i][j] = m[j][i] = rand_fraction(rng, 9)
    return tuple(map(tuple, m))


def rand_state(rng, mu=F(1, 3), lam=F(2)):
    return TensorState(mu, lam, rand_vec(rng), rand_sym(rng), rand_vec(rng))


class TestPairings:
    @pytest.mark.parametrize("m", range(6))
    def test_count_is_double_factorial(self, m):
        ps = pairings(m)
        assert len(ps) == dfact(2 * m - 1)
        assert len(set(ps)) == len(ps)
        for p in ps:
            assert sorted(x for pair in p for x in pair) == list(range(2 * m))

    def test_small_cases(self):
        assert pairings(0) == [()]
        assert len(pairings(2)) == 3
        assert len(pairings(3)) == 15

    def test_double_factorial(self):
        assert [dfact(n) for n in (-1, 0, 1, 2, 3, 5, 7)] == [1, 1, 1, 2, 3, 15, 105]


class TestSymDelta:
    def test_vector_fourth_power(self):
        lam = (F(1), F(2), F(-3))
        assert sym_delta_contract([("v", lam)] * 4) == sum(x * x for x in lam) ** 2

    def test_two_matrices(self):
        M = ((F(1), F(2), F(0)), (F(2), F(-1), F(3)), (F(0), F(3), F(5)))
        tr = sum(M[i][i] for i in range(3))
        MM = sum(M[i][j] * M[i][j] for i in range(3) for j in range(3))
        assert sym_delta_contract([("M", M), ("M", M)]) == F(1, 3) * (tr ** 2 + 2 * MM)
        assert brute_contract([("M", M), ("M", M)]) == F(1, 3) * (tr ** 2 + 2 * MM)

    def test_heat_flux_symmetrization(self):
        q = (F(1), F(0), F(0))
        e1 = (F(1), F(0), F(0))
        assert sym_delta_contract([("v", e1), ("v", e1), ("v", e1), ("v", q)]) == 1

    def test_odd_rank(self):
        with pytest.raises(OddRank):
            sym_delta_contract([("v", (1, 0, 0))])

    def test_empty(self):
        assert sym_delta_contract([]) == 1

    @pytest.mark.parametrize("p,q,r", [(2, 0, 0), (1, 0, 1), (0, 1, 0), (0, 2, 0), (2, 1, 0),
                                       (1, 1, 1), (0, 0, 4), (2, 0, 2), (0, 1, 2), (3, 0, 1)])
    def test_against_index_sum_oracle(self, rng, p, q, r):
        s = rand_state(rng)
        slots = [("v", s.mu_vec)] * p + [("M", s.mu_mat)] * q + [("v", s.lam_vec)] * r
        assert sym_delta_contract(slots) == brute_contract(slots)


class TestInvariantRoutes:
    """Graph contraction and Gaussian-moment expansion must agree."""

    @given(st.integers(0, 3), st.integers(0, 2), st.integers(0, 3), st.integers(0, 10 ** 6))
    @settings(max_examples=40, deadline=None)
    def test_scalar_routes_agree(self, p, q, r, seed):
        import random
        if (p + r) % 2:
            p += 1
        s = rand_state(random.Random(seed))
        poly = IsoScalarPoly({(p, q, r): ScalarFn.const(1)})
        assert poly.expand().evaluate(s) == poly.evaluate(s)

    @given(st.integers(0, 3), st.integers(0, 2), st.integers(0, 2), st.integers(0, 10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_vector_routes_agree(self, p, q, r, seed):
        import random
        if (p + r) % 2 == 0:
            r += 1
        s = rand_state(random.Random(seed))
        poly = IsoVectorPoly({(p, q, r): ScalarFn.const(1)})
        assert [P.evaluate(s) for P in poly.expand()] == poly.evaluate(s)

    def test_trace_term(self):
        P = IsoScalarPoly({(0, 1, 0): 1}).expand()
        expect = ConcretePoly.variable(("M", 0, 0)) + ConcretePoly.variable(("M", 1, 1)) \
            + ConcretePoly.variable(("M", 2, 2))
        assert P == expect

    def test_half_mu_squared(self):
        P = IsoScalarPoly({(2, 0, 0): 1}).expand()
        expect = ConcretePoly()
        for i in range(3):
            expect = expect + ConcretePoly.variable(("m", i)).mul_var(("m", i)).scale(F(1, 2))
        assert P == expect

    def test_mu_dot_lambda(self):
        c = ScalarFn.monomial(3, 0, -2)
        P = IsoScalarPoly({(1, 0, 1): c}).expand()
        expect = ConcretePoly()
        for i in range(3):
            expect = expect + ConcretePoly.variable(("m", i)).mul_var(("l", i)).scale(c)
        assert P == expect

    def test_invariant_table_cached_and_consistent(self):
        assert tensor_invariant(0, 2, 0) is tensor_invariant(0, 2, 0)

    def test_parity(self):
        with pytest.raises(ParityError):
            IsoScalarPoly({(1, 0, 0): 1})
        with pytest.raises(ParityError):
            IsoVectorPoly({(1, 0, 1): 1})


class TestDerivatives:
    def test_trace_derivative(self):
        tr = IsoScalarPoly({(0, 1, 0): 1}).expand()
        assert tr.diff(("M", 0, 0)) == ConcretePoly.constant(1)
        assert tr.diff(("M", 0, 1)).is_zero()

    def test_lambda_derivative_of_coefficient(self):
        c = ScalarFn.monomial(1, 1, -3)
        P = IsoScalarPoly({(1, 0, 1): c}).expand()
        assert P.diff(LAM) == IsoScalarPoly({(1, 0, 1): c.diff(LAM)}).expand()

    def test_off_diagonal_convention(self):
        # d/dM_ij with the symmetric convention is half the plain partial
        P = IsoScalarPoly({(0, 2, 0): 1, (2, 1, 0): 1}).expand()
        for (i, j), idx in {(0, 1): 4, (0, 2): 5, (1, 2): 7}.items():
            assert P.partial(idx) == P.diff(("M", i, j)).scale(2)
        assert P.partial(3) == P.diff(("M", 0, 0))

    def test_off_diagonal_is_component_derivative(self, rng):
        # symmetric derivative of mu_ab mu_ab (full double sum) is 2 mu_ij
        P = IsoScalarPoly({(0, 2, 0): 2}).expand()
        s = rand_state(rng)
        tr = sum(s.mu_mat[i][i] for i in range(3))
        # (0,2,0) with coefficient 2 expands to (1/3)(tr^2 + 2 mu:mu)
        val = P.diff(("M", 0, 1)).evaluate(s)
        assert val == F(4, 3) * s.mu_mat[0][1]
        assert P.diff(("M", 0, 0)).evaluate(s) == F(2, 3) * tr + F(4, 3) * s.mu_mat[0][0]

    @pytest.mark.parametrize("key", [(1, 0, 1), (2, 1, 0), (3, 0, 1), (1, 1, 1), (2, 0, 2), (4, 0, 0)])
    def test_iso_dmu_k_matches_concrete(self, key):
        c = ScalarFn.monomial(F(5, 7), 2, -1)
        H = IsoScalarPoly({key: c})
        V = iso_dmu_k(H)
        expanded = H.expand()
        for k, Pk in enumerate(V.expand()):
            assert Pk == expanded.diff(("m", k))

    def test_iso_dmu_k_examples(self):
        c = ScalarFn.monomial(1, 0, -1)
        assert iso_dmu_k(IsoScalarPoly({(1, 0, 1): c})) == IsoVectorPoly({(0, 0, 1): c})
        assert iso_dmu_k(IsoScalarPoly({(0, 2, 0): 1, (0, 0, 2): c})).is_zero()

    def test_truncate_and_homogeneous(self):
        P = IsoScalarPoly({(0, 0, 0): 1, (0, 1, 0): 1, (0, 2, 0): 1}).expand()
        assert P.truncate(1) == IsoScalarPoly({(0, 0, 0): 1, (0, 1, 0): 1}).expand()
        assert P.homogeneous_part(2) == IsoScalarPoly({(0, 2, 0): 1}).expand()


class TestState:
    def test_components_round_trip(self, rng):
        s = rand_state(rng)
        assert TensorState.from_components(s.mu, s.lam, s.components()) == s

    def test_equilibrium(self):
        assert TensorState.equilibrium(1, 2).is_equilibrium()
