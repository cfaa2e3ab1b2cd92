"""Membership targets: which positions of a walk count as a hit.

A target is a small immutable description; ``bind`` attaches per-chunk
state to a :class:`BatchWalker` and returns an object with ``update`` (called
after every letter) and ``query`` (called at even times).  ``query`` returns
``(lower, upper)`` boolean arrays; ``upper`` is ``None`` unless the target
can be undecided.
"""

import numpy as np

from .. import hashing
from ..environments import Membership, PercolationEnv
from ..errors import UnsupportedKind, ValidationError
from ..groups import (
    CyclicGenerator,
    FiniteIndexCosetTable,
    FreeGroup,
    KernelOfHom,
    SubgroupOracle,
    Trivial,
    Whole,
)
from .batch import BatchWalker


class MembershipTarget:
    name = "target"
    needs_hash = False
    bracketed = False

    def bind(self, walker, skeys, cap):
        raise NotImplementedError

    def query_word(self, group, word, skey):
        """Scalar reference implementation used by cross-checks."""
        raise NotImplementedError


class _Bound:
    def __init__(self, walker):
        self.walker = walker
        self.eligible = np.ones(walker.n, dtype=bool)

    def update(self, letters, info):
        pass


class SubgroupTarget(MembershipTarget):
    """Hit when the walk lies in the subgroup Lambda."""

    def __init__(self, sub: SubgroupOracle, name=None):
        self.sub = sub
        self.name = name or sub.kind
        if isinstance(sub, CyclicGenerator) and not isinstance(sub.group, FreeGroup):
            raise UnsupportedKind("CyclicGenerator subgroups require a free ambient group")

    def bind(self, walker, skeys, cap):
        sub = self.sub
        if isinstance(sub, Trivial):
            return _TrivialBound(walker)
        if isinstance(sub, Whole):
            return _WholeBound(walker)
        if isinstance(sub, KernelOfHom):
            return _KernelBound(walker, sub.hom, cap)
        if isinstance(sub, CyclicGenerator):
            return _CyclicBound(walker, sub.generator)
        if isinstance(sub, FiniteIndexCosetTable):
            return _TableBound(walker, sub)
        raise UnsupportedKind(f"no batch membership for subgroup kind {sub.kind!r}")

    def query_word(self, group, word, skey):
        return self.sub.contains(word)


class _TrivialBound(_Bound):
    def query(self):
        return self.walker.is_identity(), None


class _WholeBound(_Bound):
    def query(self):
        return np.ones(self.walker.n, dtype=bool), None


class _KernelBound(_Bound):
    def __init__(self, walker, hom, cap):
        super().__init__(walker)
        gc = hom.source.generator_count
        imgs = {l: hom.image_of_letter(l) for l in hom.source.letters()}
        width = max(1, max(len(w) for w in imgs.values()))
        self.offset = gc
        self.table = np.zeros((2 * gc + 1, width), dtype=np.int64)
        for l, w in imgs.items():
            self.table[l + gc, : len(w)] = w
        self.image = BatchWalker(hom.target, walker.n, cap * width)

    def update(self, letters, info):
        rows = self.table[letters + self.offset]
        for j in range(rows.shape[1]):
            col = rows[:, j]
            if col.any():
                self.image.apply(col)

    def query(self):
        return self.image.is_identity(), None


class _CyclicBound(_Bound):
    def __init__(self, walker, generator):
        super().__init__(walker)
        self.generator = generator
        self.others = np.zeros(walker.n, dtype=np.int64)

    def update(self, letters, info):
        if info[0] is None:
            return
        pr, pl, qr, ql = info[0]
        np.subtract.at(self.others, pr[np.abs(pl) != self.generator], 1)
        np.add.at(self.others, qr[np.abs(ql) != self.generator], 1)

    def query(self):
        return self.others == 0, None


class _TableBound(_Bound):
    def __init__(self, walker, sub):
        super().__init__(walker)
        gc = sub.group.generator_count
        self.offset = gc
        self.table = np.zeros((sub.index, 2 * gc + 1), dtype=np.int64)
        for c in range(sub.index):
            for l in sub.group.letters():
                self.table[c, l + gc] = sub.act(c, l)
            self.table[c, gc] = c
        self.coset = np.zeros(walker.n, dtype=np.int64)

    def update(self, letters, info):
        self.coset = self.table[self.coset, letters + self.offset]

    def query(self):
        return self.coset == 0, None


def _env_keys(skeys, tag):
    return hashing.derive_array(skeys, tag)


class RestrictedTarget(MembershipTarget):
    """Hit when the walk is in Lambda *and* the current point lies in E.

    E is a Bernoulli(``bias``) coordinate set, freshly sampled per path: the
    point ``g.x`` is in E iff the coordinate of ``x`` at ``g^-1`` is 1.
    """

    needs_hash = True

    def __init__(self, sub: SubgroupOracle, bias: float, name=None):
        if not 0.0 <= bias <= 1.0:
            raise ValidationError("restriction bias must lie in [0, 1]")
        self.inner = SubgroupTarget(sub)
        self.bias = bias
        self.name = name or f"{sub.kind}|E"

    def bind(self, walker, skeys, cap):
        return _RestrictedBound(walker, self.inner.bind(walker, skeys, cap), _env_keys(skeys, hashing.TAG_RESTRICT), self.bias)

    def query_word(self, group, word, skey):
        env = hashing.derive(skey, hashing.TAG_RESTRICT)
        in_e = hashing.coordinate_uniform(env, group.key_hash(group.inverse(word))) < self.bias
        return in_e and self.inner.query_word(group, word, skey)


class _RestrictedBound(_Bound):
    def __init__(self, walker, inner, env_keys, bias):
        super().__init__(walker)
        self.inner = inner
        self.env_keys = env_keys
        self.bias = bias

    def update(self, letters, info):
        self.inner.update(letters, info)

    def query(self):
        hit, _ = self.inner.query()
        u = hashing.coordinate_uniform_array(self.env_keys, self.walker.inverse_hash())
        return hit & (u < self.bias), None


class SmallPiecesTarget(MembershipTarget):
    """Subrelation that is all of R on E = {x(e)=1} and trivial off E.

    ``condition`` restricts the sample to starting points in E (``"E"``) or
    in its complement (``"Ec"``); ineligible paths are not counted.
    """

    needs_hash = True

    def __init__(self, p: float, condition=None, name=None):
        if condition not in (None, "E", "Ec"):
            raise ValidationError("condition must be None, 'E' or 'Ec'")
        if not 0.0 <= p <= 1.0:
            raise ValidationError("bias must lie in [0, 1]")
        self.p = p
        self.condition = condition
        self.name = name or ("smallpieces" + (f"|{condition}" if condition else ""))

    def env_seed(self, skey):
        return hashing.derive(skey, hashing.TAG_SHIFT)

    def bind(self, walker, skeys, cap):
        return _SmallPiecesBound(walker, _env_keys(skeys, hashing.TAG_SHIFT), self)

    def query_word(self, group, word, skey):
        from ..environments import BernoulliShiftEnv, smallpieces_membership

        return smallpieces_membership(BernoulliShiftEnv(self.p, self.env_seed(skey)), group, word)


class _SmallPiecesBound(_Bound):
    def __init__(self, walker, env_keys, target):
        super().__init__(walker)
        self.env_keys = env_keys
        self.p = target.p
        ident = walker.group.key_hash(())
        self.in_e = hashing.coordinate_uniform_array(env_keys, np.full(walker.n, ident, dtype=np.uint64)) < self.p
        if target.condition == "E":
            self.eligible = self.in_e.copy()
        elif target.condition == "Ec":
            self.eligible = ~self.in_e

    def query(self):
        u = hashing.coordinate_uniform_array(self.env_keys, self.walker.inverse_hash())
        return np.where(self.in_e, u < self.p, self.walker.is_identity()), None


class PercolationTarget(MembershipTarget):
    """Cluster subrelation of Bernoulli bond percolation, bracketed by a window.

    ``lower`` counts decided connections only; ``upper`` also counts
    undecided positions.  All percolation targets share one environment
    seed per path, so targets at different ``p`` are monotonically coupled.
    """

    needs_hash = True
    bracketed = True

    def __init__(self, p: float, window: int, name=None, max_vertices=None):
        if not 0.0 <= p <= 1.0:
            raise ValidationError("edge bias must lie in [0, 1]")
        if window < 0:
            raise ValidationError("window must be >= 0")
        self.p = p
        self.window = int(window)
        self.max_vertices = max_vertices
        self.name = name or f"percolation(p={p},W={window})"

    def env(self, group, skey):
        kw = {} if self.max_vertices is None else {"max_vertices": self.max_vertices}
        return PercolationEnv(group, self.p, hashing.derive(skey, hashing.TAG_PERC), **kw)

    def bind(self, walker, skeys, cap):
        return _PercolationBound(walker, skeys, self)

    def query_word(self, group, word, skey):
        from ..environments import percolation_membership

        return percolation_membership(self.env(group, skey), word, self.window)


class _PercolationBound(_Bound):
    def __init__(self, walker, skeys, target):
        super().__init__(walker)
        self.envs = [target.env(walker.group, int(k)) for k in skeys]
        self.window = target.window

    def query(self):
        hashes = self.walker.inverse_hash()
        lengths = self.walker.word_length()
        lower = np.zeros(self.walker.n, dtype=bool)
        upper = np.zeros(self.walker.n, dtype=bool)
        for i, env in enumerate(self.envs):
            m = env.membership_from_hash(int(hashes[i]), int(lengths[i]), self.window)
            lower[i] = m is Membership.CONNECTED
            upper[i] = m is not Membership.DISCONNECTED
        return lower, upper
