"""Marked groups with solvable word problem, homomorphisms and subgroup oracles.

Words are tuples of nonzero signed integers: ``+i`` is generator ``i`` and
``-i`` its inverse (1-based), which is also the serialized form.  Walks act
by right multiplication, so cosets are right cosets ``Lambda g``.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

from . import hashing
from .errors import IndexOutOfRange, UnsupportedKind, ValidationError, WordTooLong

Word = Tuple[int, ...]

IDENTITY: Word = ()
DEFAULT_MAX_LENGTH = 10**6


def as_word(letters) -> Word:
    w = tuple(int(l) for l in letters)
    if any(l == 0 for l in w):
        raise IndexOutOfRange("letter 0 is not a generator (letters are 1-based, signed)")
    return w


def invert(w: Sequence[int]) -> Word:
    return tuple(-l for l in reversed(w))


class MarkedGroup:
    """A finitely generated group with a normal-form oracle."""

    family = "abstract"

    def __init__(self, generator_count: int, max_length: int = DEFAULT_MAX_LENGTH):
        self.generator_count = int(generator_count)
        self.max_length = int(max_length)

    # subclasses implement these three on already-validated words
    def _normal_form(self, w: Word) -> Word:
        raise NotImplementedError

    def _mul_nf(self, a: Word, b: Word) -> Word:
        """Product of two words already in normal form (no validation)."""
        return self._normal_form(a + b)

    def element_key(self, w: Word):
        """Canonical hashable value of the element represented by ``w``."""
        raise NotImplementedError

    def word_length(self, w: Word) -> int:
        """Distance from the identity in the Cayley graph of the marked generators."""
        raise NotImplementedError

    def key_hash(self, w: Word) -> int:
        """Stable 64-bit hash of the element (agrees with the walk engine's batch hash)."""
        raise NotImplementedError

    def _length_nf(self, nf: Word) -> int:
        return self.word_length(nf)

    def _hash_nf(self, nf: Word) -> int:
        return self.key_hash(nf)

    def check(self, w) -> Word:
        w = as_word(w)
        if len(w) > self.max_length:
            raise WordTooLong(f"word of length {len(w)} exceeds cap {self.max_length}")
        for l in w:
            if abs(l) > self.generator_count:
                raise IndexOutOfRange(
                    f"generator index {abs(l)} out of range for {self!r} "
                    f"({self.generator_count} generators)"
                )
        return w

    def normal_form(self, w) -> Word:
        return self._normal_form(self.check(w))

    def multiply(self, w1, w2) -> Word:
        return self._normal_form(self.check(self.check(w1) + self.check(w2)))

    def inverse(self, w) -> Word:
        return self._normal_form(invert(self.check(w)))

    def is_identity(self, w) -> bool:
        return self.normal_form(w) == IDENTITY

    def generators(self):
        return [(i,) for i in range(1, self.generator_count + 1)]

    def letters(self):
        """All signed generator letters, positive first."""
        g = range(1, self.generator_count + 1)
        return [i for i in g] + [-i for i in g]

    def components(self):
        """Flattened (offset, factor) pairs; a non-product group is its own factor."""
        return [(0, self)]

    def __eq__(self, other):
        return type(self) is type(other) and self._params() == other._params()

    def __hash__(self):
        return hash((type(self).__name__, self._params()))

    def _params(self):
        return (self.generator_count,)


class FreeGroup(MarkedGroup):
    family = "free"

    def __init__(self, rank: int, max_length: int = DEFAULT_MAX_LENGTH):
        if rank < 1:
            raise ValidationError("free group rank must be >= 1")
        super().__init__(rank, max_length)
        self.rank = rank

    def __repr__(self):
        return f"Free({self.rank})"

    def _normal_form(self, w):
        out = []
        for l in w:
            if out and out[-1] == -l:
                out.pop()
            else:
                out.append(l)
        return tuple(out)

    def _mul_nf(self, a, b):
        j = 0
        n = min(len(a), len(b))
        while j < n and a[-1 - j] == -b[j]:
            j += 1
        return a[: len(a) - j] + b[j:]

    def element_key(self, w):
        return self.normal_form(w)

    def word_length(self, w):
        return len(self.normal_form(w))

    def key_hash(self, w):
        return hashing.free_key_hash(self.normal_form(w))

    def _length_nf(self, nf):
        return len(nf)

    def _hash_nf(self, nf):
        return hashing.free_key_hash(nf)


class _AbelianGroup(MarkedGroup):
    """Shared code for Z^d and Z/n: normal form is the sorted exponent word."""

    moduli: Tuple[int, ...] = ()

    def exponents(self, w: Word) -> Tuple[int, ...]:
        e = [0] * self.generator_count
        for l in w:
            e[abs(l) - 1] += 1 if l > 0 else -1
        return tuple(x % m if m else x for x, m in zip(e, self.moduli))

    def from_exponents(self, e) -> Word:
        out = []
        for i, x in enumerate(e, start=1):
            out.extend([i if x > 0 else -i] * abs(x))
        return tuple(out)

    def _normal_form(self, w):
        return self.from_exponents(self.exponents(w))

    def element_key(self, w):
        return self.exponents(self.check(w))

    def word_length(self, w):
        e = self.exponents(self.check(w))
        return sum(min(x, m - x) if m else abs(x) for x, m in zip(e, self.moduli))

    def key_hash(self, w):
        return hashing.abelian_key_hash(self.exponents(self.check(w)))


class FreeAbelianGroup(_AbelianGroup):
    family = "free_abelian"

    def __init__(self, dim: int, max_length: int = DEFAULT_MAX_LENGTH):
        if dim < 1:
            raise ValidationError("free abelian rank must be >= 1")
        super().__init__(dim, max_length)
        self.dim = dim
        self.moduli = (0,) * dim

    def __repr__(self):
        return f"FreeAbelian({self.dim})"


class CyclicGroup(_AbelianGroup):
    family = "cyclic"

    def __init__(self, order: int, max_length: int = DEFAULT_MAX_LENGTH):
        if order < 1:
            raise ValidationError("cyclic group order must be >= 1")
        super().__init__(1, max_length)
        self.order = order
        self.moduli = (order,)

    def __repr__(self):
        return f"CyclicFinite({self.order})"

    def _params(self):
        return (self.order,)


class DirectProduct(MarkedGroup):
    """Direct product; generators of factor j follow those of factors < j."""

    family = "direct_product"

    def __init__(self, factors: Sequence[MarkedGroup], max_length: int = DEFAULT_MAX_LENGTH):
        flat = []
        for f in factors:
            flat.extend(g for _, g in f.components())
        if not flat:
            raise ValidationError("direct product needs at least one factor")
        super().__init__(sum(f.generator_count for f in flat), max_length)
        self.factors = tuple(flat)
        self.offsets = []
        off = 0
        for f in flat:
            self.offsets.append(off)
            off += f.generator_count

    def __repr__(self):
        return "DirectProduct([" + ", ".join(map(repr, self.factors)) + "])"

    def _params(self):
        return self.factors

    def components(self):
        return list(zip(self.offsets, self.factors))

    def split(self, w: Word):
        parts = [[] for _ in self.factors]
        for l in w:
            a = abs(l)
            for j in range(len(self.factors) - 1, -1, -1):
                if a > self.offsets[j]:
                    off = self.offsets[j]
                    parts[j].append(l - off if l > 0 else l + off)
                    break
        return [tuple(p) for p in parts]

    def _normal_form(self, w):
        out = []
        for part, f, off in zip(self.split(w), self.factors, self.offsets):
            out.extend(l + off if l > 0 else l - off for l in f._normal_form(part))
        return tuple(out)

    def element_key(self, w):
        return tuple(f.element_key(p) for f, p in zip(self.factors, self.split(self.check(w))))

    def word_length(self, w):
        return sum(f.word_length(p) for f, p in zip(self.factors, self.split(self.check(w))))

    def key_hash(self, w):
        parts = self.split(self.check(w))
        return hashing.combine_hashes([f.key_hash(p) for f, p in zip(self.factors, parts)])


# -- module-level operations -------------------------------------------------


def normal_form(group: MarkedGroup, w) -> Word:
    return group.normal_form(w)


def multiply(group: MarkedGroup, w1, w2) -> Word:
    return group.multiply(w1, w2)


@dataclass(frozen=True)
class GroupHomomorphism:
    source: MarkedGroup
    target: MarkedGroup
    images: Tuple[Word, ...]

    def __post_init__(self):
        if len(self.images) != self.source.generator_count:
            raise ValidationError(
                f"homomorphism needs {self.source.generator_count} images, got {len(self.images)}"
            )
        object.__setattr__(
            self, "images", tuple(self.target.normal_form(im) for im in self.images)
        )
        object.__setattr__(
            self, "_inv_images", tuple(self.target.inverse(im) for im in self.images)
        )

    def image_of_letter(self, l: int) -> Word:
        return self.images[l - 1] if l > 0 else self._inv_images[-l - 1]

    def __call__(self, w) -> Word:
        return evaluate_hom(self, w)


def evaluate_hom(hom: GroupHomomorphism, w) -> Word:
    w = hom.source.check(w)
    target = hom.target
    if isinstance(target, _AbelianGroup):
        # accumulate exponents; avoids building a long image word
        e = [0] * target.generator_count
        for l in w:
            for m in hom.image_of_letter(l):
                e[abs(m) - 1] += 1 if m > 0 else -1
        return target.from_exponents(
            tuple(x % mod if mod else x for x, mod in zip(e, target.moduli))
        )
    out = []
    for l in w:
        out.extend(hom.image_of_letter(l))
    return target.normal_form(tuple(out))


# -- subgroups ----------------------------------------------------------------


class SubgroupOracle:
    """Membership and right-coset keys for a subgroup Lambda of ``group``."""

    kind = "abstract"

    def __init__(self, group: MarkedGroup):
        self.group = group

    def contains(self, w) -> bool:
        return self.coset_key(w) == self.coset_key(IDENTITY)

    def coset_key(self, w):
        raise NotImplementedError

    def _key_nf(self, nf: Word):
        """Coset key of a word already in normal form."""
        return self.coset_key(nf)


class Trivial(SubgroupOracle):
    kind = "trivial"

    def contains(self, w):
        return self.group.normal_form(w) == IDENTITY

    def coset_key(self, w):
        return self.group.normal_form(w)

    def _key_nf(self, nf):
        return nf


class Whole(SubgroupOracle):
    kind = "whole"

    def contains(self, w):
        self.group.check(w)
        return True

    def coset_key(self, w):
        self.group.check(w)
        return ()


class KernelOfHom(SubgroupOracle):
    kind = "kernel"

    def __init__(self, hom: GroupHomomorphism):
        super().__init__(hom.source)
        self.hom = hom

    def contains(self, w):
        return evaluate_hom(self.hom, w) == IDENTITY

    def coset_key(self, w):
        # the kernel is normal, so the right coset is determined by the image
        return evaluate_hom(self.hom, w)


class CyclicGenerator(SubgroupOracle):
    """The cyclic subgroup <a_i> of a free group."""

    kind = "cyclic_generator"

    def __init__(self, group: MarkedGroup, generator: int):
        super().__init__(group)
        self.generator = int(generator)
        if not 1 <= self.generator <= group.generator_count:
            raise IndexOutOfRange(f"generator index {generator} out of range")
        self._require_free()

    def _require_free(self):
        if not isinstance(self.group, FreeGroup):
            raise UnsupportedKind("CyclicGenerator subgroups require a free ambient group")

    def coset_key(self, w):
        self._require_free()
        return self._key_nf(self.group.normal_form(w))

    def _key_nf(self, nf):
        j = 0
        while j < len(nf) and abs(nf[j]) == self.generator:
            j += 1
        return nf[j:]

    def contains(self, w):
        self._require_free()
        return all(abs(l) == self.generator for l in self.group.normal_form(w))


class FiniteIndexCosetTable(SubgroupOracle):
    """Finite-index subgroup given by its right-coset table.

    ``table[c][i-1]`` is the coset reached from coset ``c`` by right
    multiplication with generator ``i``; coset 0 is the subgroup itself.
    """

    kind = "coset_table"

    def __init__(self, group: MarkedGroup, table):
        super().__init__(group)
        self.table = tuple(tuple(int(x) for x in row) for row in table)
        n = len(self.table)
        if n == 0:
            raise ValidationError("coset table is empty")
        for row in self.table:
            if len(row) != group.generator_count:
                raise ValidationError("coset table row length must equal generator count")
            if any(not 0 <= x < n for x in row):
                raise ValidationError("coset table entry out of range")
        inv = [[None] * group.generator_count for _ in range(n)]
        for c, row in enumerate(self.table):
            for i, d in enumerate(row):
                if inv[d][i] is not None:
                    raise ValidationError("coset table column is not a permutation")
                inv[d][i] = c
        self.inverse_table = tuple(tuple(r) for r in inv)

    @property
    def index(self):
        return len(self.table)

    def act(self, coset: int, l: int) -> int:
        return self.table[coset][l - 1] if l > 0 else self.inverse_table[coset][-l - 1]

    def coset_key(self, w):
        c = 0
        for l in self.group.check(w):
            c = self.act(c, l)
        return c


def subgroup_contains(sub: SubgroupOracle, w) -> bool:
    return sub.contains(w)


def coset_key(sub: SubgroupOracle, w):
    return sub.coset_key(w)
