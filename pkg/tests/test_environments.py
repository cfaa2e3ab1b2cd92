import numpy as np
import pytest

from cospectral import hashing
from cospectral.environments import (
    BernoulliShiftEnv,
    ClusterIndex,
    Membership,
    PercolationEnv,
    UnionFind,
    monotone_coupled_envs,
    percolation_membership,
    smallpieces_membership,
    u_infinity_proxy,
    u_infinity_rate,
)
from cospectral.errors import UnsortedLevels, ValidationError
from cospectral.groups import FreeAbelianGroup, FreeGroup
from cospectral.spectral import explore_ball
from cospectral.groups import Trivial
from cospectral.walks import StepDistribution

F2 = FreeGroup(2)
Z2 = FreeAbelianGroup(2)


def ball_edges(group, radius):
    """Every (vertex, positive letter) pair inside a ball, by explicit enumeration."""
    ball = explore_ball(group, Trivial(group), StepDistribution.uniform(group), radius)
    return [(rep, l) for rep in ball.reps for l in range(1, group.generator_count + 1)]


def survival_oracle(p, branches=3, root_branches=4):
    """Survival probability of the open cluster of the root on the 4-regular tree."""
    q = 0.0
    for _ in range(10_000):
        q = (1 - p + p * q) ** branches
    return 1 - (1 - p + p * q) ** root_branches


class TestUnionFind:
    def test_basic(self):
        uf = UnionFind()
        for x in range(5):
            uf.add(x)
        uf.union(0, 1)
        uf.union(3, 4)
        uf.union(1, 4)
        assert uf.connected(0, 3) and not uf.connected(0, 2)
        assert uf.find(uf.find(3)) == uf.find(3)

    def test_order_independent(self):
        pairs = [(0, 1), (2, 3), (1, 2), (5, 6)]
        parts = []
        for order in (pairs, pairs[::-1]):
            uf = ClusterIndex(3)
            for x in range(7):
                uf.add(x)
            for a, b in order:
                uf.union(a, b)
            parts.append(sorted({frozenset(y for y in range(7) if uf.connected(x, y)) for x in range(7)}, key=min))
        assert parts[0] == parts[1]


class TestSmallPieces:
    def env_with_root(self, value):
        for seed in range(100):
            env = BernoulliShiftEnv(0.5, seed)
            if env.coordinate(F2, ()) == value:
                return env
        raise AssertionError("no seed found")

    def test_identity_in_e(self):
        assert smallpieces_membership(self.env_with_root(True), F2, ())

    def test_zero_coordinate(self):
        env = self.env_with_root(True)
        for w in [(1,), (2,), (1, 2), (-1, -2), (2, 2, 1)]:
            expected = env.coordinate(F2, F2.inverse(w))
            assert smallpieces_membership(env, F2, w) == expected
        assert any(not smallpieces_membership(env, F2, w) for w in [(1,), (2,), (-1,), (-2,), (1, 1), (2, 1)])

    def test_outside_e(self):
        env = self.env_with_root(False)
        assert smallpieces_membership(env, F2, ())
        assert not any(smallpieces_membership(env, F2, w) for w in [(1,), (1, 2), (-2,), (2, -1, -1)])

    def test_reveal_determinism(self):
        rng = np.random.default_rng(0)
        env = BernoulliShiftEnv(0.3, 42)
        words = [tuple(int(x) for x in rng.choice([1, 2, -1, -2], size=rng.integers(0, 6))) for _ in range(200)]
        first = [env.coordinate(F2, w) for w in words]
        again = BernoulliShiftEnv(0.3, 42)
        assert [again.coordinate(F2, w) for w in reversed(words)] == first[::-1]
        assert [env.coordinate(F2, w) for w in words] == first

    def test_bias_checked(self):
        with pytest.raises(ValidationError):
            BernoulliShiftEnv(1.5, 0)


class TestPercolation:
    def test_p_one(self):
        env = PercolationEnv(F2, 1.0, 0)
        for w in [(), (1,), (1, 2, -1), (2, 2, 2)]:
            assert percolation_membership(env, w, 4) is Membership.CONNECTED

    def test_p_zero(self):
        env = PercolationEnv(F2, 0.0, 0)
        assert percolation_membership(env, (), 3) is Membership.CONNECTED
        for w in [(1,), (1, 2), (-2, -1, -1)]:
            assert percolation_membership(env, w, 3) is Membership.DISCONNECTED

    def test_too_far(self):
        env = PercolationEnv(F2, 1.0, 0)
        assert percolation_membership(env, (1, 1, 1), 2) is Membership.UNDECIDED

    def test_z2_seeded_example(self):
        # first seed whose p=1/2 sample joins (0,0) to (-1,-1) inside the radius-2 ball
        target = (1, 2)
        for seed in range(1000):
            env = PercolationEnv(Z2, 0.5, seed)
            if percolation_membership(env, target, 2) is Membership.CONNECTED:
                break
        else:
            raise AssertionError("no seed found")
        assert percolation_membership(env, target, 1) is Membership.UNDECIDED
        # an explicit open path of two steps exists
        inv = Z2.inverse(target)
        paths = [((-1,), (-2,)), ((-2,), (-1,))]
        def open_path(path):
            v = ()
            for (l,) in path:
                if not env.is_open(v, l):
                    return False
                v = Z2.normal_form(v + (l,))
            return Z2.normal_form(v) == Z2.normal_form(inv)
        assert any(open_path(p) for p in paths)

    def test_undirected_consistency(self):
        env = PercolationEnv(F2, 0.5, 3)
        for v, l in ball_edges(F2, 3):
            u = F2.normal_form(v + (l,))
            assert env.is_open(v, l) == env.is_open(u, -l)

    def test_window_monotone(self):
        group = F2
        decided = 0
        for seed in range(40):
            env = PercolationEnv(group, 0.45, seed)
            for w in [(1,), (1, 2), (2, -1), (-1, -1, 2), (2, 2)]:
                prev = percolation_membership(env, w, 3)
                for W in (4, 5, 6):
                    cur = percolation_membership(env, w, W)
                    if prev is not Membership.UNDECIDED:
                        assert cur is prev
                        decided += 1
                    prev = cur
        assert decided > 0

    def test_enclosed_cluster_small(self):
        env = PercolationEnv(F2, 0.0, 1)
        c = env.cluster(3)
        assert c.enclosed and len(c.members) == 1 and not c.touches_boundary


class TestUInfinity:
    def test_extremes(self):
        for W in (1, 3, 6):
            assert u_infinity_proxy(PercolationEnv(F2, 1.0, 0), W)
            assert not u_infinity_proxy(PercolationEnv(F2, 0.0, 0), W)

    def test_agrees_with_cluster(self):
        for seed in range(30):
            env = PercolationEnv(F2, 0.5, seed)
            assert u_infinity_proxy(env, 5) == env.cluster(5).touches_boundary

    def test_supercritical_rate(self):
        rate = u_infinity_rate(F2, 0.6, 12, 2000, 0)
        oracle = survival_oracle(0.6)
        assert rate >= 0.5
        # the proxy overestimates survival; finite-window excess stays small at W=12
        assert oracle - 0.02 <= rate <= oracle + 0.05

    def test_window_checked(self):
        with pytest.raises(ValidationError):
            u_infinity_proxy(PercolationEnv(F2, 0.5, 0), 0)


class TestCoupling:
    def test_extreme_levels(self):
        lo, hi = monotone_coupled_envs(F2, [0.0, 1.0], 5)
        edges = ball_edges(F2, 3)
        assert not any(lo.is_open(v, l) for v, l in edges)
        assert all(hi.is_open(v, l) for v, l in edges)

    def test_nested_on_ball(self):
        levels = [0.1, 0.3, 0.5, 0.7, 0.9]
        envs = monotone_coupled_envs(F2, levels, 11)
        edges = ball_edges(F2, 4)
        opens = [{e for e in edges if env.is_open(*e)} for env in envs]
        for a, b in zip(opens, opens[1:]):
            assert a <= b
        assert 0 < len(opens[2]) < len(edges)

    def test_unsorted(self):
        with pytest.raises(UnsortedLevels):
            monotone_coupled_envs(F2, [0.5, 0.2], 0)

    def test_same_uniforms(self):
        a, b = monotone_coupled_envs(F2, [0.2, 0.8], 9)
        assert a.edge_uniform((1, 2), -1) == b.edge_uniform((1, 2), -1)
        assert a.edge_uniform((), 1) == hashing.edge_uniform(a.seed, F2.key_hash(()), 1)
