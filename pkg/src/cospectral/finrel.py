"""Exact finite models of an inclusion S <= R of equivalence relations.

Points are ``0..n-1`` with uniform measure ``1/n``.  The fiber space R/S is
the finite set of pairs ``(x, c)`` with ``c`` an S-class inside the R-class
of ``x``; each pair carries weight ``1/n``.  Vectors on R/S are plain numpy
arrays indexed like ``FiberSpace.pairs`` and inner products are weighted by
``1/n``.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

from .environments import UnionFind
from .errors import (
    DomainError,
    EmptySet,
    NotAPermutation,
    NotASubrelation,
    NotInFullGroup,
    NotSaturated,
    NotSymmetric,
    ValidationError,
)
from .spectral import SparseOperator, almost_invariant_from_power, operator_norm

EXACT_LIMIT = 256
PROB_TOL = 1e-12


@dataclass(frozen=True)
class FiniteRelation:
    n: int
    class_id: Tuple[int, ...]

    def __init__(self, class_id):
        # relabel classes by first occurrence so equal partitions compare equal
        relabel: Dict[int, int] = {}
        ids = tuple(relabel.setdefault(int(c), len(relabel)) for c in class_id)
        object.__setattr__(self, "n", len(ids))
        object.__setattr__(self, "class_id", ids)

    @classmethod
    def trivial(cls, n):
        return cls(range(n))

    @classmethod
    def full(cls, n):
        return cls([0] * n)

    @classmethod
    def from_classes(cls, n, classes):
        ids = [-1] * n
        for j, c in enumerate(classes):
            for x in c:
                ids[x] = j
        if min(ids, default=0) < 0:
            raise ValidationError("classes do not cover every point")
        return cls(ids)

    @property
    def classes(self) -> List[List[int]]:
        out: Dict[int, List[int]] = {}
        for x, c in enumerate(self.class_id):
            out.setdefault(c, []).append(x)
        return list(out.values())

    def related(self, x, y) -> bool:
        return self.class_id[x] == self.class_id[y]

    def class_of(self, x) -> List[int]:
        c = self.class_id[x]
        return [y for y in range(self.n) if self.class_id[y] == c]

    def refines(self, other: "FiniteRelation") -> bool:
        """Is every class of ``self`` inside a class of ``other``?"""
        seen: Dict[int, int] = {}
        for c, d in zip(self.class_id, other.class_id):
            if seen.setdefault(c, d) != d:
                return False
        return True

    def saturation(self, points) -> List[int]:
        cs = {self.class_id[x] for x in points}
        return [x for x in range(self.n) if self.class_id[x] in cs]

    def is_invariant(self, points) -> bool:
        pts = set(points)
        return set(self.saturation(pts)) == pts


def check_permutation(perm, n=None) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    n = len(perm) if n is None else n
    if perm.shape != (n,) or sorted(perm.tolist()) != list(range(n)):
        raise NotAPermutation(f"not a permutation of 0..{n - 1}: {perm.tolist()}")
    return perm


def build_relation_from_permutations(n, perms) -> FiniteRelation:
    """Orbit relation of the group generated by ``perms``."""
    uf = UnionFind()
    for x in range(n):
        uf.add(x)
    for p in perms:
        p = check_permutation(p, n)
        for x in range(n):
            uf.union(x, int(p[x]))
    return FiniteRelation([uf.find(x) for x in range(n)])


@dataclass(frozen=True)
class FullGroupElement:
    perm: Tuple[int, ...]

    def __init__(self, perm, relation: FiniteRelation = None):
        p = check_permutation(perm)
        if relation is not None:
            if len(p) != relation.n:
                raise NotInFullGroup("permutation size differs from the relation")
            if any(not relation.related(x, int(p[x])) for x in range(len(p))):
                raise NotInFullGroup("permutation moves a point out of its class")
        object.__setattr__(self, "perm", tuple(int(x) for x in p))

    def __call__(self, x):
        return self.perm[x]

    def inverse(self) -> "FullGroupElement":
        inv = [0] * len(self.perm)
        for x, y in enumerate(self.perm):
            inv[y] = x
        return FullGroupElement(inv)

    @classmethod
    def identity(cls, n):
        return cls(range(n))


@dataclass(frozen=True)
class MassTransport:
    lhs: float
    rhs: float
    mode: str  # "exact" (rational sums) or "compensated" (fsum)

    def __iter__(self):
        return iter((self.lhs, self.rhs))

    @property
    def discrepancy(self):
        return abs(self.lhs - self.rhs)


def mass_transport_check(R: FiniteRelation, f) -> MassTransport:
    """Both sides of ``int sum_y f(x,y) = int sum_y f(y,x)`` over R-pairs.

    ``f`` is a callable on pairs ``(x, y)`` with ``y ~ x`` or an ``n x n``
    array vanishing off the relation.  Sums are exact (rationals) for
    ``n <= 256`` and compensated beyond.
    """
    n = R.n
    if not callable(f):
        arr = np.asarray(f, dtype=float)
        if arr.shape != (n, n):
            raise DomainError(f"f must be {n}x{n}")
        for x in range(n):
            for y in range(n):
                if arr[x, y] != 0 and not R.related(x, y):
                    raise DomainError(f"f is nonzero off the relation at ({x}, {y})")
        f = lambda x, y, a=arr: float(a[x, y])  # noqa: E731
    classes = [R.class_of(x) for x in range(n)]
    out = [f(x, y) for x in range(n) for y in classes[x]]
    back = [f(y, x) for x in range(n) for y in classes[x]]
    if n <= EXACT_LIMIT:
        lhs = sum(map(Fraction, out), Fraction(0)) / n
        rhs = sum(map(Fraction, back), Fraction(0)) / n
        return MassTransport(float(lhs), float(rhs), "exact")
    return MassTransport(math.fsum(out) / n, math.fsum(back) / n, "compensated")


def relation_mask(R: FiniteRelation) -> np.ndarray:
    """0/1 matrix of the relation."""
    ids = np.asarray(R.class_id)
    return (ids[:, None] == ids[None, :]).astype(float)


def random_transport_function(R: FiniteRelation, rng: np.random.Generator) -> np.ndarray:
    """Uniform random values on R-pairs, zero off the relation."""
    return rng.random((R.n, R.n)) * relation_mask(R)


@dataclass
class FiberSpace:
    R: FiniteRelation
    S: FiniteRelation
    pairs: List[Tuple[int, int]]  # (x, S-class id)
    index: Dict[Tuple[int, int], int] = field(repr=False)

    @property
    def n(self):
        return self.R.n

    @property
    def size(self):
        return len(self.pairs)

    @property
    def weight(self):
        return 1.0 / self.n

    @property
    def total_weight(self):
        return Fraction(self.size, self.n)

    def fiber_sizes(self):
        sizes = [0] * self.n
        for x, _ in self.pairs:
            sizes[x] += 1
        return sizes

    def fiber(self, x):
        return [i for i, (y, _) in enumerate(self.pairs) if y == x]

    def diagonal(self) -> np.ndarray:
        """The section ``(x, c) -> 1_{x in c}``."""
        return np.array([1.0 if self.S.class_id[x] == c else 0.0 for x, c in self.pairs])

    def inner(self, u, v):
        return float(np.vdot(v, u).real) / self.n

    def norm(self, u):
        return math.sqrt(max(self.inner(u, u), 0.0))


def fiber_space(R: FiniteRelation, S: FiniteRelation) -> FiberSpace:
    if R.n != S.n:
        raise NotASubrelation("relations live on different point sets")
    if not S.refines(R):
        raise NotASubrelation("S is not contained in R")
    s_in_r: Dict[int, List[int]] = {}
    for x in range(R.n):
        cs = s_in_r.setdefault(R.class_id[x], [])
        if S.class_id[x] not in cs:
            cs.append(S.class_id[x])
    pairs = [(x, c) for x in range(R.n) for c in s_in_r[R.class_id[x]]]
    return FiberSpace(R, S, pairs, {p: i for i, p in enumerate(pairs)})


def _check_nu(fiber: FiberSpace, nu):
    atoms = [(g if isinstance(g, FullGroupElement) else FullGroupElement(g), float(p)) for g, p in nu]
    if abs(sum(p for _, p in atoms) - 1.0) > PROB_TOL:
        raise ValidationError("step probabilities must sum to 1")
    for g, _ in atoms:
        if len(g.perm) != fiber.n or any(not fiber.R.related(x, g(x)) for x in range(fiber.n)):
            raise NotInFullGroup("atom does not lie in the full group of R")
    mass: Dict[tuple, float] = {}
    for g, p in atoms:
        mass[g.perm] = mass.get(g.perm, 0.0) + p
    for perm, p in mass.items():
        if abs(mass.get(FullGroupElement(perm).inverse().perm, 0.0) - p) > PROB_TOL:
            raise NotSymmetric()
    return atoms


def translation(fiber: FiberSpace, g: FullGroupElement) -> SparseOperator:
    """Permutation matrix of ``(lambda(g) xi)(x, c) = xi(g^-1 x, c)``."""
    ginv = g.inverse()
    rows = np.arange(fiber.size)
    cols = np.array([fiber.index[(ginv(x), c)] for x, c in fiber.pairs], dtype=np.int64)
    return SparseOperator(fiber.size, rows, cols, np.ones(fiber.size))


def lambda_nu_matrix(fiber: FiberSpace, nu) -> SparseOperator:
    """``sum_g nu(g) lambda(g)`` for ``nu`` a list of (permutation, probability)."""
    atoms = _check_nu(fiber, nu)
    rows, cols, w = [], [], []
    for g, p in atoms:
        t = translation(fiber, g)
        rows.append(t.rows)
        cols.append(t.cols)
        w.append(np.full(fiber.size, p))
    op = SparseOperator(fiber.size, np.concatenate(rows), np.concatenate(cols), np.concatenate(w))
    op.symmetric = op.is_symmetric()
    return op


def uniform_generator_nu(perms):
    """Uniform measure on the given permutations and their inverses."""
    gens = [FullGroupElement(p) for p in perms]
    w = 1.0 / (2 * len(gens))
    return [(g, w) for g in gens] + [(g.inverse(), w) for g in gens]


def lazy_nu(nu, n):
    return [(g, 0.5 * float(p)) for g, p in nu] + [(FullGroupElement.identity(n), 0.5)]


def zeta_E(fiber: FiberSpace, E) -> np.ndarray:
    """``(1/sqrt(mu(E))) 1_{x in c cap E}``: a unit vector in L^2(R/S)."""
    E = set(E)
    if not E:
        raise EmptySet("E must be nonempty")
    scale = 1.0 / math.sqrt(len(E) / fiber.n)
    S = fiber.S
    return np.array(
        [scale if (x in E and S.class_id[x] == c) else 0.0 for x, c in fiber.pairs]
    )


@dataclass
class FiberProjection:
    """Right multiplication by ``1_E`` for an S-invariant set E: keep (x, c) with c inside E."""

    fiber: FiberSpace
    E: frozenset
    mask: np.ndarray

    def apply(self, xi):
        return np.asarray(xi) * self.mask


def fiber_projection(fiber: FiberSpace, E) -> FiberProjection:
    E = frozenset(E)
    if not fiber.S.is_invariant(E):
        raise NotSaturated("E must be a union of S-classes")
    in_e = {fiber.S.class_id[x] for x in E}
    mask = np.array([c in in_e for _, c in fiber.pairs], dtype=float)
    return FiberProjection(fiber, E, mask)


@dataclass
class NormSeries:
    s: np.ndarray  # s[k-1] = <op^{2k} zeta, zeta>^{1/2k}
    moments: np.ndarray  # <op^{2k} zeta, zeta>
    restricted_norm: float = None


def restricted_norm_series(op: SparseOperator, zeta, K: int, weight=1.0, projection=None) -> NormSeries:
    """Exact moments ``<op^{2k} zeta, zeta>`` for k = 1..K and their 2k-th roots.

    ``weight`` is the (uniform) measure of each coordinate.  With a
    ``projection``, also returns ``||R(1_E) op||`` by power iteration on the
    compressed operator.
    """
    if not op.symmetric:
        raise NotSymmetric("operator is not symmetric")
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (op.dimension,):
        raise ValidationError("vector does not match operator dimension")
    moments = np.empty(K)
    v = zeta
    for k in range(K):
        v = op.matvec(v)
        moments[k] = weight * float(v @ v)
    ks = np.arange(1, K + 1)
    s = np.power(np.maximum(moments, 0.0), 1.0 / (2 * ks))
    rnorm = None
    if projection is not None:
        rnorm = operator_norm(op.restrict(projection.mask)).value
    return NormSeries(s, moments, rnorm)


def fiber_norms(fiber: FiberSpace, xi) -> np.ndarray:
    xi = np.asarray(xi)
    sq = np.zeros(fiber.n)
    for (x, _), v in zip(fiber.pairs, xi):
        sq[x] += abs(v) ** 2
    return np.sqrt(sq)


def fiberwise_normalize(fiber: FiberSpace, xi) -> np.ndarray:
    """Rescale each fiber to unit norm; fibers of norm < 1/2 become the diagonal section."""
    xi = np.asarray(xi, dtype=float)
    norms = fiber_norms(fiber, xi)
    diag = fiber.diagonal()
    out = np.empty_like(xi)
    for i, (x, _) in enumerate(fiber.pairs):
        out[i] = xi[i] / norms[x] if norms[x] >= 0.5 else diag[i]
    return out


def ergodic_components(R: FiniteRelation) -> List[List[int]]:
    """Invariant pieces of a finite relation: its classes."""
    return R.classes


def point_chain(n, nu) -> np.ndarray:
    """Transition matrix ``P[y, z] = nu({g : g(y) = z})`` on points."""
    P = np.zeros((n, n))
    for g, p in nu:
        perm = g.perm if isinstance(g, FullGroupElement) else tuple(g)
        for y in range(n):
            P[y, perm[y]] += float(p)
    return P


def return_probabilities(R: FiniteRelation, S: FiniteRelation, nu, K: int) -> np.ndarray:
    """``out[k-1, x]`` = probability that the walk from x is in [x]_S at time 2k.

    Direct iteration of the point chain; independent of the fiber-space code.
    """
    n = R.n
    P = point_chain(n, nu)
    same = np.array([[S.related(x, z) for z in range(n)] for x in range(n)], dtype=float)
    out = np.empty((K, n))
    M = np.eye(n)
    P2 = P @ P
    for k in range(K):
        M = M @ P2
        out[k] = (M * same).sum(axis=1)
    return out


def trace_identity_gap(R: FiniteRelation, S: FiniteRelation, nu, K: int) -> float:
    """Largest gap over k <= K between ``<op^{2k} xi_0, xi_0>`` and the mean point return probability."""
    fiber = fiber_space(R, S)
    op = lambda_nu_matrix(fiber, nu)
    series = restricted_norm_series(op, fiber.diagonal(), K, weight=fiber.weight)
    direct = return_probabilities(R, S, nu, K).mean(axis=1)
    return float(np.abs(series.moments - direct).max())


@dataclass
class WitnessReport:
    iterations: int
    fired: bool
    l2_residual: float  # ||op^2 xi - xi|| for the lazy operator
    atom_l2: List[float]  # ||lambda(g) xi - xi||_2 per atom
    reiter_l1: List[float]  # ||lambda(g) f - f||_1 with f = |xi|^2
    fiberwise_residual: float  # ||lambda(nu) v - v||_2 for the fiberwise-normalized v
    fiberwise_atom_l2: List[float]
    cauchy_schwarz_ok: bool

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "fired": self.fired,
            "l2_residual": self.l2_residual,
            "atom_l2": self.atom_l2,
            "reiter_l1": self.reiter_l1,
            "fiberwise_residual": self.fiberwise_residual,
            "fiberwise_atom_l2": self.fiberwise_atom_l2,
            "cauchy_schwarz_ok": self.cauchy_schwarz_ok,
        }


def tfae_witnesses(fiber: FiberSpace, nu, tol: float, budget: int = 10_000) -> WitnessReport:
    """Almost-invariant, Reiter and fiberwise-unit witnesses built from ``zeta_X``."""
    atoms = _check_nu(fiber, nu)
    n = fiber.n
    op = lambda_nu_matrix(fiber, lazy_nu(atoms, n))
    # unit vector in the weighted space -> unit Euclidean vector
    root_w = math.sqrt(fiber.weight)
    zeta = zeta_E(fiber, range(n)) * root_w
    res = almost_invariant_from_power(op, zeta, tol, budget)
    xi = res.vector / root_w
    f = np.abs(xi) ** 2
    atom_l2, reiter = [], []
    ok = True
    for g, _ in atoms:
        t = translation(fiber, g)
        d2 = fiber.norm(t.matvec(xi) - xi)
        d1 = float(np.abs(t.matvec(f) - f).sum()) * fiber.weight
        atom_l2.append(d2)
        reiter.append(d1)
        ok &= d1 <= 2 * d2 + 1e-12
    v = fiberwise_normalize(fiber, xi)
    plain = lambda_nu_matrix(fiber, atoms)
    fw_atoms = [fiber.norm(translation(fiber, g).matvec(v) - v) for g, _ in atoms]
    return WitnessReport(
        iterations=res.iterations,
        fired=res.fired,
        l2_residual=res.residual,
        atom_l2=atom_l2,
        reiter_l1=reiter,
        fiberwise_residual=fiber.norm(plain.matvec(v) - v),
        fiberwise_atom_l2=fw_atoms,
        cauchy_schwarz_ok=bool(ok),
    )


def random_model(rng: np.random.Generator, n_max=32, n_perms=2):
    """Random (R, S, nu): R generated by random permutations, S a random refinement."""
    n = int(rng.integers(2, n_max + 1))
    perms = [rng.permutation(n) for _ in range(n_perms)]
    R = build_relation_from_permutations(n, perms)
    labels = {}
    ids = []
    for x in range(n):
        # split each R-class into up to 3 random pieces
        key = (R.class_id[x], int(rng.integers(0, 3)))
        ids.append(labels.setdefault(key, len(labels)))
    S = FiniteRelation(ids)
    return R, S, uniform_generator_nu(perms)
