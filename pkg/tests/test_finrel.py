import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cospectral.errors import (
    DomainError,
    EmptySet,
    NotAPermutation,
    NotASubrelation,
    NotInFullGroup,
    NotSaturated,
    NotSymmetric,
)
from cospectral.finrel import (
    FiniteRelation,
    FullGroupElement,
    build_relation_from_permutations,
    ergodic_components,
    fiber_norms,
    fiber_projection,
    fiber_space,
    fiberwise_normalize,
    lambda_nu_matrix,
    lazy_nu,
    mass_transport_check,
    random_model,
    random_transport_function,
    restricted_norm_series,
    return_probabilities,
    tfae_witnesses,
    trace_identity_gap,
    translation,
    uniform_generator_nu,
    zeta_E,
)
from cospectral.spectral import SparseOperator, operator_norm

SHIFT = [1, 2, 3, 0]
SHIFT2 = [2, 3, 0, 1]


def cyclic_model():
    R = build_relation_from_permutations(4, [SHIFT])
    S = FiniteRelation.from_classes(4, [[0, 2], [1, 3]])
    return R, S, fiber_space(R, S)


def sorted_classes(rel):
    return sorted(sorted(c) for c in rel.classes)


class TestRelations:
    def test_four_cycle(self):
        assert sorted_classes(build_relation_from_permutations(4, [SHIFT])) == [[0, 1, 2, 3]]

    def test_involution(self):
        assert sorted_classes(build_relation_from_permutations(4, [[1, 0, 3, 2]])) == [[0, 1], [2, 3]]

    def test_two_perms(self):
        R = build_relation_from_permutations(6, [[1, 2, 0, 3, 4, 5], [0, 1, 2, 4, 3, 5]])
        assert sorted_classes(R) == [[0, 1, 2], [3, 4], [5]]

    def test_not_permutation(self):
        with pytest.raises(NotAPermutation):
            build_relation_from_permutations(3, [[0, 0, 1]])

    def test_equal_partitions_compare_equal(self):
        assert FiniteRelation([5, 5, 2]) == FiniteRelation([0, 0, 1])

    def test_refines(self):
        R = FiniteRelation.full(4)
        S = FiniteRelation([0, 0, 1, 1])
        assert S.refines(R) and not R.refines(S)
        assert FiniteRelation.trivial(4).refines(S)

    def test_components(self):
        assert len(ergodic_components(FiniteRelation.full(5))) == 1
        assert sorted_classes(FiniteRelation([0, 0, 1, 1])) == [[0, 1], [2, 3]]
        assert len(ergodic_components(FiniteRelation.trivial(5))) == 5

    def test_full_group(self):
        R = FiniteRelation([0, 0, 1, 1])
        FullGroupElement([1, 0, 3, 2], R)
        with pytest.raises(NotInFullGroup):
            FullGroupElement([2, 1, 0, 3], R)
        g = FullGroupElement(SHIFT)
        assert [g(g.inverse()(x)) for x in range(4)] == [0, 1, 2, 3]


class TestMassTransport:
    def test_diagonal(self):
        R = FiniteRelation.full(3)
        res = mass_transport_check(R, lambda x, y: 1.0 if x == y else 0.0)
        assert tuple(res) == (1.0, 1.0) and res.mode == "exact"

    def test_one_class(self):
        assert tuple(mass_transport_check(FiniteRelation.full(3), lambda x, y: 1.0)) == (3.0, 3.0)

    def test_random_involution(self):
        R = build_relation_from_permutations(4, [[1, 0, 3, 2]])
        f = random_transport_function(R, np.random.default_rng(0))
        assert mass_transport_check(R, f).discrepancy <= 1e-12

    def test_off_relation(self):
        R = FiniteRelation([0, 0, 1])
        f = np.zeros((3, 3))
        f[0, 2] = 1.0
        with pytest.raises(DomainError):
            mass_transport_check(R, f)

    def test_asymmetric_f_balances(self):
        # f(x,y) = x: the two sides differ pointwise but not after integration
        R = FiniteRelation([0, 0, 0, 1, 1])
        res = mass_transport_check(R, lambda x, y: float(x))
        assert res.lhs == pytest.approx(res.rhs, abs=0)

    def test_compensated_mode(self):
        R = FiniteRelation([x % 7 for x in range(300)])
        f = random_transport_function(R, np.random.default_rng(1))
        res = mass_transport_check(R, f)
        assert res.mode == "compensated" and res.discrepancy <= 1e-12

    def test_hundred_random_relations(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            R, _, _ = random_model(rng, n_max=64)
            f = random_transport_function(R, rng)
            assert mass_transport_check(R, f).discrepancy <= 1e-12


class TestFiberSpace:
    def test_cyclic(self):
        _, _, fiber = cyclic_model()
        assert fiber.size == 8 and fiber.total_weight == 2
        assert fiber.fiber_sizes() == [2, 2, 2, 2]

    def test_s_equals_r(self):
        R = FiniteRelation([0, 0, 1])
        fiber = fiber_space(R, R)
        assert fiber.size == 3 and fiber.total_weight == 1

    def test_trivial_s(self):
        fiber = fiber_space(FiniteRelation.full(5), FiniteRelation.trivial(5))
        assert fiber.total_weight == 5

    def test_not_subrelation(self):
        with pytest.raises(NotASubrelation):
            fiber_space(FiniteRelation([0, 0, 1, 1]), FiniteRelation.full(4))

    def test_total_weight_formula(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            R, S, _ = random_model(rng)
            fiber = fiber_space(R, S)
            direct = sum(len({S.class_id[y] for y in R.class_of(x)}) for x in range(R.n))
            assert fiber.total_weight == Fraction(direct, R.n)


class TestLambda:
    def test_identity(self):
        _, _, fiber = cyclic_model()
        op = lambda_nu_matrix(fiber, [(FullGroupElement.identity(4), 1.0)])
        assert np.array_equal(op.dense(), np.eye(8))

    def test_shift(self):
        _, _, fiber = cyclic_model()
        op = lambda_nu_matrix(fiber, uniform_generator_nu([SHIFT]))
        m = op.dense()
        assert op.symmetric
        assert np.allclose(m.sum(axis=0), 1) and np.allclose(m.sum(axis=1), 1)
        assert np.allclose(m @ np.ones(8), np.ones(8))
        assert operator_norm(op).value == pytest.approx(1.0)

    def test_double_shift_blocks(self):
        _, _, fiber = cyclic_model()
        op = lambda_nu_matrix(fiber, [(SHIFT2, 0.5), (SHIFT2, 0.5)])
        m = op.dense()
        # the S-class coordinate is never changed
        for i, (_, c) in enumerate(fiber.pairs):
            for j, (_, d) in enumerate(fiber.pairs):
                if m[i, j]:
                    assert c == d
        assert np.max(np.abs(np.linalg.eigvalsh(m))) == pytest.approx(1.0)

    def test_translation_is_permutation(self):
        _, _, fiber = cyclic_model()
        t = translation(fiber, FullGroupElement(SHIFT)).dense()
        assert np.array_equal(t.sum(axis=0), np.ones(8)) and np.array_equal(t.sum(axis=1), np.ones(8))
        assert set(np.unique(t)) <= {0.0, 1.0}

    def test_not_in_full_group(self):
        R = FiniteRelation([0, 0, 1, 1])
        fiber = fiber_space(R, R)
        with pytest.raises(NotInFullGroup):
            lambda_nu_matrix(fiber, uniform_generator_nu([SHIFT]))

    def test_not_symmetric(self):
        _, _, fiber = cyclic_model()
        with pytest.raises(NotSymmetric):
            lambda_nu_matrix(fiber, [(SHIFT, 1.0)])

    def test_random_models(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            R, S, nu = random_model(rng)
            op = lambda_nu_matrix(fiber_space(R, S), nu)
            assert op.is_symmetric()
            assert np.max(np.abs(np.linalg.eigvalsh(op.dense()))) <= 1 + 1e-9


class TestZeta:
    def test_whole_space(self):
        R = FiniteRelation.full(3)
        fiber = fiber_space(R, R)
        z = zeta_E(fiber, range(3))
        assert np.allclose(z, 1.0) and fiber.norm(z) == pytest.approx(1.0, abs=1e-12)

    def test_cyclic_half(self):
        _, S, fiber = cyclic_model()
        z = zeta_E(fiber, [0, 1])
        nonzero = {fiber.pairs[i]: v for i, v in enumerate(z) if v}
        assert nonzero == {(0, S.class_id[0]): pytest.approx(math.sqrt(2)), (1, S.class_id[1]): pytest.approx(math.sqrt(2))}
        assert fiber.norm(z) == pytest.approx(1.0, abs=1e-12)

    def test_single_point(self):
        fiber = fiber_space(FiniteRelation.full(5), FiniteRelation.trivial(5))
        z = zeta_E(fiber, [2])
        assert np.count_nonzero(z) == 1 and z.max() == pytest.approx(math.sqrt(5))

    def test_empty(self):
        _, _, fiber = cyclic_model()
        with pytest.raises(EmptySet):
            zeta_E(fiber, [])


class TestNormSeries:
    def test_identity(self):
        op = SparseOperator.from_matrix(np.eye(3))
        s = restricted_norm_series(op, np.array([1.0, 0, 0]), 5)
        assert np.allclose(s.s, 1.0)

    def test_eigenvector(self):
        op = SparseOperator.from_matrix(np.diag([0.6, 0.2]))
        assert np.allclose(restricted_norm_series(op, np.array([1.0, 0.0]), 6).s, 0.6)

    def test_cyclic_increasing(self):
        _, _, fiber = cyclic_model()
        op = lambda_nu_matrix(fiber, uniform_generator_nu([SHIFT]))
        s = restricted_norm_series(op, zeta_E(fiber, [0, 1]), 20, weight=fiber.weight).s
        assert np.all(np.diff(s) > 0) and s[-1] < 1
        # every moment is 1/2 here, so s_k = 2^(-1/2k)
        assert np.allclose(s, 0.5 ** (1 / (2 * np.arange(1, 21))))

    def test_projection(self):
        _, _, fiber = cyclic_model()
        op = lambda_nu_matrix(fiber, uniform_generator_nu([SHIFT]))
        proj = fiber_projection(fiber, [0, 2])
        out = restricted_norm_series(op, zeta_E(fiber, [0, 2]), 4, weight=fiber.weight, projection=proj)
        assert out.restricted_norm == pytest.approx(1.0)

    def test_not_saturated(self):
        _, _, fiber = cyclic_model()
        with pytest.raises(NotSaturated):
            fiber_projection(fiber, [0, 1])


class TestTraceIdentity:
    def test_random_models(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            R, S, nu = random_model(rng)
            assert trace_identity_gap(R, S, nu, 50) <= 1e-12

    def test_point_returns_are_probabilities(self):
        R, S, _ = cyclic_model()
        p = return_probabilities(R, S, uniform_generator_nu([SHIFT]), 5)
        # the shift walk on four points sits on even points at even times
        assert np.allclose(p, 1.0)


class TestFiberwiseNormalize:
    def test_already_unit(self):
        _, _, fiber = cyclic_model()
        xi = np.full(8, 1 / math.sqrt(2))
        assert np.allclose(fiberwise_normalize(fiber, xi), xi)

    def test_zero(self):
        _, _, fiber = cyclic_model()
        v = fiberwise_normalize(fiber, np.zeros(8))
        assert np.array_equal(v, fiber.diagonal())
        assert np.allclose(fiber_norms(fiber, v), 1.0)

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_random(self, seed):
        rng = np.random.default_rng(seed)
        R, S, _ = random_model(rng, n_max=16)
        fiber = fiber_space(R, S)
        v = fiberwise_normalize(fiber, rng.normal(size=fiber.size) * rng.random())
        assert np.allclose(fiber_norms(fiber, v), 1.0, atol=1e-12)
        assert np.allclose(fiberwise_normalize(fiber, v), v, atol=1e-12)


class TestWitnesses:
    def test_s_equals_r(self):
        R = build_relation_from_permutations(4, [SHIFT])
        fiber = fiber_space(R, R)
        rep = tfae_witnesses(fiber, uniform_generator_nu([SHIFT]), 1e-6)
        assert rep.fired and rep.iterations == 0
        assert max(rep.atom_l2) == pytest.approx(0, abs=1e-12)
        assert max(rep.reiter_l1) == pytest.approx(0, abs=1e-12)
        assert rep.fiberwise_residual == pytest.approx(0, abs=1e-12)

    def test_cyclic(self):
        _, _, fiber = cyclic_model()
        rep = tfae_witnesses(fiber, uniform_generator_nu([SHIFT]), 1e-6)
        assert rep.fired and rep.iterations < 50
        assert rep.l2_residual < 1e-6
        assert rep.cauchy_schwarz_ok

    def test_random_cauchy_schwarz(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            R, S, nu = random_model(rng, n_max=20)
            rep = tfae_witnesses(fiber_space(R, S), nu, 1e-3, budget=2000)
            for d1, d2 in zip(rep.reiter_l1, rep.atom_l2):
                assert d1 <= 2 * d2 + 1e-12
            assert set(rep.to_dict()) >= {"fired", "l2_residual", "reiter_l1"}

    def test_lazy_nu_mass(self):
        nu = lazy_nu(uniform_generator_nu([SHIFT]), 4)
        assert sum(p for _, p in nu) == pytest.approx(1.0)
