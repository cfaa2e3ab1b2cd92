"""Lazily revealed random environments supplying subrelation membership.

Coordinates are never stored up front: each bit is a pure function of
``(seed, key)`` and is revealed (and memoized) on first query, so two
queries of the same coordinate always agree regardless of order.
"""

import enum
from collections import deque
from dataclasses import dataclass
from typing import FrozenSet, List

from . import hashing
from .errors import EnvironmentWindowExceeded, UnsortedLevels, ValidationError
from .groups import IDENTITY, MarkedGroup

DEFAULT_MAX_VERTICES = 2_000_000


class Membership(enum.Enum):
    CONNECTED = "connected"
    DISCONNECTED = "disconnected"
    UNDECIDED = "undecided"


class UnionFind:
    """Union by size with path halving."""

    def __init__(self):
        self.parent = {}
        self.size = {}

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x, y):
        self.add(x)
        self.add(y)
        x, y = self.find(x), self.find(y)
        if x == y:
            return x
        if self.size[x] < self.size[y]:
            x, y = y, x
        self.parent[y] = x
        self.size[x] += self.size[y]
        return x

    def connected(self, x, y):
        return x in self.parent and y in self.parent and self.find(x) == self.find(y)

    def __contains__(self, x):
        return x in self.parent


class ClusterIndex(UnionFind):
    """Union-find over revealed vertices (keyed by element hash) in a window."""

    def __init__(self, window):
        super().__init__()
        self.window = window


class BernoulliShiftEnv:
    """Bernoulli(p) coordinates indexed by group elements."""

    def __init__(self, p: float, seed: int):
        if not 0.0 <= p <= 1.0:
            raise ValidationError("bias must lie in [0, 1]")
        self.p = p
        self.seed = int(seed) & hashing.MASK
        self.revealed = {}

    def bit(self, key_hash: int) -> bool:
        b = self.revealed.get(key_hash)
        if b is None:
            b = self.revealed[key_hash] = hashing.coordinate_uniform(self.seed, key_hash) < self.p
        return b

    def coordinate(self, group: MarkedGroup, w) -> bool:
        return self.bit(group.key_hash(w))


def smallpieces_membership(env: BernoulliShiftEnv, group: MarkedGroup, current) -> bool:
    """Is the walk's current point ``g.x`` in the same small-pieces class as ``x``?

    The class of ``x`` is everything in its orbit inside ``E = {x(e) = 1}``
    when ``x`` is in E, and ``{x}`` alone otherwise.
    """
    if env.coordinate(group, IDENTITY):
        return env.coordinate(group, group.inverse(current))
    return group.is_identity(current)


@dataclass(frozen=True)
class Cluster:
    window: int
    members: FrozenSet[int]
    escapes: bool
    touches_boundary: bool

    @property
    def enclosed(self):
        return not self.escapes


class PercolationEnv:
    """Bernoulli(p) bond percolation on the Cayley graph of the marked generators.

    The edge ``{v, v*s_i}`` carries the uniform variable
    ``edge_uniform(seed, hash(v), i)`` and is open iff it is below ``p``;
    environments sharing a seed are therefore monotonically coupled in p.
    """

    def __init__(self, group: MarkedGroup, p: float, seed: int, max_vertices=DEFAULT_MAX_VERTICES):
        if not 0.0 <= p <= 1.0:
            raise ValidationError("edge bias must lie in [0, 1]")
        self.group = group
        self.p = p
        self.seed = int(seed) & hashing.MASK
        self.max_vertices = max_vertices
        self.revealed = {}
        self._clusters = {}

    def edge_key(self, v, letter):
        """Canonical (vertex-hash, generator) key of the edge from ``v`` along ``letter``."""
        if letter > 0:
            return self.group.key_hash(v), letter
        return self.group.key_hash(self.group._normal_form(v + (letter,))), -letter

    def edge_uniform(self, v, letter) -> float:
        h, i = self.edge_key(v, letter)
        return hashing.edge_uniform(self.seed, h, i)

    def is_open(self, v, letter) -> bool:
        key = self.edge_key(v, letter)
        b = self.revealed.get(key)
        if b is None:
            b = self.revealed[key] = hashing.edge_uniform(self.seed, *key) < self.p
        return b

    def _neighbours(self, v, hv, hashes):
        """Yield ``(u, hash(u), open)`` for each letter, reusing known hashes."""
        g = self.group
        for l in g.letters():
            u = g._mul_nf(v, (l,))
            hu = hashes.get(u)
            if hu is None:
                hu = g._hash_nf(u)
            key = (hv, l) if l > 0 else (hu, -l)
            b = self.revealed.get(key)
            if b is None:
                b = self.revealed[key] = hashing.edge_uniform(self.seed, *key) < self.p
            yield u, hu, b

    def cluster(self, window: int) -> Cluster:
        """Explore the open cluster of the identity inside the radius-``window`` ball."""
        if window in self._clusters:
            return self._clusters[window]
        g = self.group
        index = ClusterIndex(window)
        root = g._hash_nf(IDENTITY)
        index.add(root)
        hashes = {IDENTITY: root}
        queue = deque([IDENTITY])
        escapes = touches = False
        while queue:
            v = queue.popleft()
            hv = hashes[v]
            if g._length_nf(v) == window:
                touches = True
            for u, hu, is_open in self._neighbours(v, hv, hashes):
                if not is_open:
                    continue
                if g._length_nf(u) > window:
                    escapes = True
                    continue
                if hu not in index:
                    hashes[u] = hu
                    queue.append(u)
                    if len(index.parent) >= self.max_vertices:
                        raise EnvironmentWindowExceeded(
                            f"cluster exploration exceeded {self.max_vertices} vertices"
                        )
                index.union(hv, hu)
        members = frozenset(index.parent)
        c = self._clusters[window] = Cluster(window, members, escapes, touches)
        return c

    def membership_from_hash(self, inverse_hash: int, length: int, window: int) -> Membership:
        if length > window:
            return Membership.UNDECIDED
        c = self.cluster(window)
        if inverse_hash in c.members:
            return Membership.CONNECTED
        return Membership.DISCONNECTED if c.enclosed else Membership.UNDECIDED


def percolation_membership(env: PercolationEnv, current, window: int) -> Membership:
    """Is the identity joined to ``current^-1`` by open edges inside the window?"""
    g = env.group
    inv = g.inverse(current)
    return env.membership_from_hash(g.key_hash(inv), g.word_length(inv), window)


def u_infinity_proxy(env: PercolationEnv, window: int) -> bool:
    """Does the identity's open cluster reach distance ``window``?

    Depth-first with early exit; gives the same answer as
    ``env.cluster(window).touches_boundary`` without exploring the whole cluster.
    """
    if window < 1:
        raise ValidationError("window must be >= 1")
    g = env.group
    hashes = {IDENTITY: g._hash_nf(IDENTITY)}
    stack = [IDENTITY]
    while stack:
        v = stack.pop()
        if g._length_nf(v) >= window:
            return True
        for u, hu, is_open in env._neighbours(v, hashes[v], hashes):
            if is_open and u not in hashes and g._length_nf(u) <= window:
                hashes[u] = hu
                stack.append(u)
    return False


def monotone_coupled_envs(group: MarkedGroup, p_list, seed: int) -> List[PercolationEnv]:
    """Environments at several biases sharing the same edge uniforms."""
    p_list = list(p_list)
    if any(a > b for a, b in zip(p_list, p_list[1:])):
        raise UnsortedLevels("percolation levels must be sorted ascending")
    return [PercolationEnv(group, p, seed) for p in p_list]


def u_infinity_rate(group: MarkedGroup, p: float, window: int, N: int, seed: int) -> float:
    """Fraction of the ``N`` per-sample environments whose origin cluster reaches ``window``.

    Sample ``i`` uses the same environment as path ``i`` of a percolation
    walk with the same seed, so the rate is coupled to the hit counts.
    """
    hits = 0
    for i in range(N):
        env_seed = hashing.derive(hashing.sample_key(seed, i), hashing.TAG_PERC)
        hits += u_infinity_proxy(PercolationEnv(group, p, env_seed), window)
    return hits / N if N else 0.0
