"""Deterministic spectral estimates on truncated coset graphs.

Balls of the right-coset graph are explored breadth-first; the Markov
operator is restricted to the ball with Dirichlet truncation (mass leaving
the ball is dropped), so its norm is a lower bound for the norm on the
whole coset space.
"""

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, List, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    BallTooLarge,
    NotLambdaFixed,
    NotLazy,
    NotSymmetric,
    NotUnitary,
    RTooSmall,
    SupportMismatch,
    ValidationError,
)
from .groups import IDENTITY, MarkedGroup, SubgroupOracle, _AbelianGroup
from .walks.distribution import StepDistribution

BOUNDARY = -1
DEFAULT_MAX_STATES = 5_000_000
SYM_TOL = 1e-12


@dataclass
class CosetBall:
    """Radius-``radius`` ball around the base coset ``Lambda e`` in BFS order."""

    group: MarkedGroup
    sub: SubgroupOracle
    radius: int
    keys: List[Any]
    reps: List[tuple]
    dist: np.ndarray
    atoms: List[tuple]
    adjacency: np.ndarray  # (states, atoms); BOUNDARY where the step leaves the ball
    index: dict = field(repr=False, default_factory=dict)

    @property
    def size(self):
        return len(self.keys)

    def state_of(self, key):
        return self.index.get(key)

    def sub_ball(self, r):
        return np.flatnonzero(self.dist <= r)


def explore_ball(group, sub, nu: StepDistribution, radius: int, max_states=DEFAULT_MAX_STATES) -> CosetBall:
    if radius < 0:
        raise ValidationError("radius must be >= 0")
    atoms = nu.support
    for w in atoms:
        group.check(w)
    base = sub.coset_key(IDENTITY)
    keys, reps, dist = [base], [IDENTITY], [0]
    index = {base: 0}
    adj = []
    queue = deque([0])
    frontier = []
    while queue:
        s = queue.popleft()
        if dist[s] == radius:
            frontier.append(s)
            continue
        row = []
        for w in atoms:
            rep = group._mul_nf(reps[s], w)
            key = sub._key_nf(rep)
            j = index.get(key)
            if j is None:
                j = index[key] = len(keys)
                keys.append(key)
                reps.append(rep)
                dist.append(dist[s] + 1)
                queue.append(j)
                if len(keys) > max_states:
                    # every state within dist[s] is already known
                    raise BallTooLarge(
                        f"ball exceeds {max_states} states at radius {dist[s] + 1}", partial=dist[s]
                    )
            row.append(j)
        adj.append((s, row))
    adjacency = np.full((len(keys), len(atoms)), BOUNDARY, dtype=np.int64)
    for s, row in adj:
        adjacency[s] = row
    for s in frontier:
        for a, w in enumerate(atoms):
            j = index.get(sub._key_nf(group._mul_nf(reps[s], w)))
            if j is not None:
                adjacency[s, a] = j
    return CosetBall(group, sub, radius, keys, reps, np.array(dist), list(atoms), adjacency, index)


@dataclass
class SparseOperator:
    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        self._csr = sp.csr_matrix(
            (self.weights, (self.rows, self.cols)), shape=(self.dimension, self.dimension)
        )
        self._csr.sum_duplicates()
        self._csr.sort_indices()

    @classmethod
    def from_matrix(cls, m, symmetric=None):
        coo = sp.coo_matrix(m)
        op = cls(coo.shape[0], coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(float))
        op.symmetric = op.is_symmetric() if symmetric is None else symmetric
        return op

    @property
    def csr(self):
        return self._csr

    def dense(self):
        return self._csr.toarray()

    def matvec(self, v):
        return self._csr @ v

    def is_symmetric(self, tol=SYM_TOL):
        diff = self._csr - self._csr.T
        return diff.nnz == 0 or abs(diff).max() <= tol

    def row_sums(self):
        return np.asarray(self._csr.sum(axis=1)).ravel()

    def diagonal(self):
        return self._csr.diagonal()

    def restrict(self, mask):
        """Compression ``P op P`` onto the coordinates where ``mask`` is true."""
        d = sp.diags(np.asarray(mask, dtype=float))
        m = (d @ self._csr @ d).tocoo()
        return SparseOperator(self.dimension, m.row, m.col, m.data, self.symmetric)

    def to_edge_csv(self):
        coo = self._csr.tocoo()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for i, j, x in zip(coo.row, coo.col, coo.data):
            w.writerow([int(i), int(j), repr(float(x))])
        return buf.getvalue()


def build_markov(ball: CosetBall, nu: StepDistribution) -> SparseOperator:
    """Truncated ``sum_g nu(g) lambda(g)`` on the ball (boundary mass dropped)."""
    if list(nu.support) != list(ball.atoms):
        raise SupportMismatch("ball was explored with a different step support")
    probs = nu.probabilities
    rows, cols, w = [], [], []
    for a in range(len(ball.atoms)):
        dst = ball.adjacency[:, a]
        keep = dst != BOUNDARY
        rows.append(np.flatnonzero(keep))
        cols.append(dst[keep])
        w.append(np.full(int(keep.sum()), probs[a]))
    op = SparseOperator(ball.size, np.concatenate(rows), np.concatenate(cols), np.concatenate(w))
    op.symmetric = op.is_symmetric()
    return op


@dataclass
class NormEstimate:
    value: float
    iterations: int
    residual: float
    converged: bool

    def to_dict(self):
        return {
            "value": float(self.value),
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "converged": bool(self.converged),
        }


def operator_norm(op: SparseOperator, tol=1e-12, max_iter=100_000) -> NormEstimate:
    """Largest singular value by power iteration on ``op^2`` from the all-ones vector."""
    if not op.symmetric:
        raise NotSymmetric("operator is not symmetric")
    n = op.dimension
    if n == 0:
        return NormEstimate(0.0, 0, 0.0, True)
    v = np.ones(n) / math.sqrt(n)
    theta_old = -1.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        w1 = op.matvec(v)
        theta = float(w1 @ w1)  # <v, op^2 v>
        if theta == 0.0:
            return NormEstimate(0.0, it, 0.0, True)
        w2 = op.matvec(w1)
        residual = float(np.linalg.norm(w2 - theta * v))
        if abs(theta - theta_old) < tol:
            return NormEstimate(math.sqrt(theta), it, residual, True)
        theta_old = theta
        v = w2 / np.linalg.norm(w2)
    return NormEstimate(math.sqrt(max(theta_old, 0.0)), max_iter, residual, False)


@dataclass
class SweepResult:
    radii: List[int]
    sizes: List[int]
    norms: List[NormEstimate]
    complete: bool  # False when the state cap cut the sweep short
    message: str = ""
    operator: Optional[SparseOperator] = field(default=None, repr=False)  # on the largest ball

    @property
    def converged(self):
        return all(n.converged for n in self.norms)

    def rows(self):
        for r, m, est in zip(self.radii, self.sizes, self.norms):
            yield {"radius": int(r), "states": int(m), **est.to_dict()}


def norm_sweep(group, sub, nu: StepDistribution, radii, max_states=DEFAULT_MAX_STATES, tol=1e-12,
               max_iter=100_000) -> SweepResult:
    """Truncated norms over the balls ``B_r`` for each ``r`` in ``radii``.

    The largest ball is explored once; smaller balls are BFS prefixes of it.
    If the state cap is hit, the sweep covers only radii up to the largest
    fully explored one and ``complete`` is False.
    """
    radii = sorted(set(int(r) for r in radii))
    if not radii:
        raise ValidationError("radii must be nonempty")
    complete, message = True, ""
    try:
        ball = explore_ball(group, sub, nu, radii[-1], max_states)
    except BallTooLarge as e:
        complete, message = False, str(e)
        radii = [r for r in radii if r <= e.partial]
        if not radii:
            return SweepResult([], [], [], False, message)
        ball = explore_ball(group, sub, nu, radii[-1], max_states)
    op = build_markov(ball, nu)
    sizes, norms = [], []
    for r in radii:
        m = int(np.searchsorted(ball.dist, r, side="right"))
        sub_op = SparseOperator.from_matrix(op.csr[:m, :m], symmetric=op.symmetric)
        sizes.append(m)
        norms.append(operator_norm(sub_op, tol, max_iter))
    return SweepResult(radii, sizes, norms, complete, message, op)


@dataclass
class RadialOracle:
    rank: int
    p_exact: List[Fraction]  # p_exact[j] = P(X_{2j} = e), j = 0..K
    eigen_bound: float
    lazy: bool = False

    @property
    def p(self):
        return np.array([float(x) for x in self.p_exact])


def _chain_counts(deg, root_stay, root_out, K):
    """Integer path counts returning to 0 for the radial chain of a degree-``deg`` graph.

    At level 0 there are ``root_stay`` loops and ``root_out`` outward edges;
    every other level has one edge back and ``deg - 1`` outward.
    """
    steps = 2 * K
    counts = [1] + [0] * (steps + 1)
    returns = [1]
    for n in range(1, steps + 1):
        new = [0] * (steps + 2)
        new[0] += counts[0] * root_stay
        new[1] += counts[0] * root_out
        for d in range(1, n):
            c = counts[d]
            if c:
                new[d + 1] += c * (deg - 1)
                new[d - 1] += c
        counts = new
        returns.append(counts[0])
    return [Fraction(c, deg**n) for n, c in enumerate(returns)]


def _lazy_mix(p_all):
    return [
        sum((Fraction(math.comb(m, j), 2**m) * p_all[j] for j in range(m + 1)), Fraction(0))
        for m in range(len(p_all))
    ]


def _chain_top(deg, root_stay, root_out, R):
    diag = np.zeros(R + 1)
    diag[0] = root_stay / deg
    off = np.full(R, math.sqrt((deg - 1) / deg**2))
    off[0] = math.sqrt(root_out / deg**2)
    return scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(R, R), eigvals_only=True)[0]


def radial_oracle_free(rank: int, K: int, R: int, lazy=False) -> RadialOracle:
    """Exact return probabilities of the uniform walk on the free group of ``rank``.

    The distance from the root is a birth-death chain (up with probability
    (2r-1)/2r, down with 1/2r, forced up at the root).  Counts are kept as
    integers, so ``p_exact`` is exact.  ``eigen_bound`` is the top eigenvalue
    of the symmetrized chain on {0..R}, which increases to sqrt(2r-1)/r.
    """
    if rank < 2:
        raise ValidationError("rank must be >= 2")
    if R < 2 * K:
        raise RTooSmall(f"chain length R={R} < 2K={2 * K}")
    deg = 2 * rank
    p_all = _chain_counts(deg, 0, deg, K)
    if lazy:
        p_all = _lazy_mix(p_all)
    top = _chain_top(deg, 0, deg, R)
    bound = 0.5 + 0.5 * top if lazy else top
    return RadialOracle(rank, p_all[::2], float(bound), lazy)


def radial_oracle_cyclic(rank: int, K: int, R: int, lazy=False) -> RadialOracle:
    """Exact coset return probabilities for the subgroup generated by the first letter.

    The Schreier graph of that subgroup is a root carrying two loops with
    trees hanging off it, so distance from the root is again an exact
    birth-death chain; ``p_exact[j]`` is the probability of being back in
    the subgroup at time ``2j``.
    """
    if rank < 2:
        raise ValidationError("rank must be >= 2")
    if R < 2 * K:
        raise RTooSmall(f"chain length R={R} < 2K={2 * K}")
    deg = 2 * rank
    p_all = _chain_counts(deg, 2, deg - 2, K)
    if lazy:
        p_all = _lazy_mix(p_all)
    top = _chain_top(deg, 2, deg - 2, R)
    bound = 0.5 + 0.5 * top if lazy else top
    return RadialOracle(rank, p_all[::2], float(bound), lazy)


def exact_return_series(op: SparseOperator, start: int, K: int) -> np.ndarray:
    """``out[k-1] = <op^{2k} e_start, e_start> = ||op^k e_start||^2`` for k = 1..K.

    On a coset ball of radius at least K this is the exact probability of
    being back in the subgroup at time 2k, since such paths never leave the
    ball.
    """
    if not op.symmetric:
        raise NotSymmetric("operator is not symmetric")
    v = np.zeros(op.dimension)
    v[start] = 1.0
    out = np.empty(K)
    for k in range(K):
        v = op.matvec(v)
        out[k] = float(v @ v)
    return out


@dataclass
class AlmostInvariantResult:
    vector: np.ndarray
    residual: float
    iterations: int
    fired: bool
    log_a: np.ndarray
    best_residual: float
    best_iteration: int

    @property
    def a(self):
        return np.exp(self.log_a)

    def to_dict(self):
        return {
            "fired": bool(self.fired),
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "best_residual": float(self.best_residual),
            "best_iteration": int(self.best_iteration),
        }


def almost_invariant_from_power(op: SparseOperator, zeta, eps: float, budget: int = 10_000):
    """Normalized powers ``op^n zeta`` until ``(a_{n+2} + a_n - 2a_{n+1}) / a_n < eps^2``.

    Here ``a_n = ||op^n zeta||^2``.  Iterates are renormalized each step and
    ``a_n`` is tracked in log space.  When the rule never fires within
    ``budget`` the best iterate is returned with ``fired=False``; this means
    the truncated norm is too small for almost-invariant vectors.
    """
    if not op.symmetric:
        raise NotSymmetric("operator is not symmetric")
    if op.dimension and op.diagonal().min() < 0.5 - SYM_TOL:
        raise NotLazy("operator must come from a lazy step distribution (diagonal >= 1/2)")
    u = np.asarray(zeta, dtype=float).copy()
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValidationError("start vector must have unit norm")
    log_a = [0.0]
    best = (math.inf, 0, u)
    for n in range(budget + 1):
        w1 = op.matvec(u)
        w2 = op.matvec(w1)
        r1 = float(w1 @ w1)
        r2 = float(w2 @ w2)
        stat = r2 + 1.0 - 2.0 * r1
        residual = float(np.linalg.norm(w2 - u))
        if residual < best[0]:
            best = (residual, n, u)
        if stat < eps * eps:
            return AlmostInvariantResult(u, residual, n, True, np.array(log_a), best[0], best[1])
        if r1 == 0.0 or n == budget:
            break
        log_a.append(log_a[-1] + math.log(r1))
        u = w1 / math.sqrt(r1)
    res, it, vec = best
    return AlmostInvariantResult(vec, res, n, False, np.array(log_a), res, it)


@dataclass
class FolnerResult:
    found: bool
    states: Optional[np.ndarray]
    radius: Optional[int]
    ratios: List[float]  # worst ratio per sub-ball radius, r = 0..searched

    def to_dict(self):
        return {
            "found": self.found,
            "radius": self.radius,
            "size": None if self.states is None else int(len(self.states)),
            "ratios": [float(x) for x in self.ratios],
        }


def folner_ratio(ball: CosetBall, states, gamma) -> float:
    """``|gamma F  symdiff  F| / |F|`` for a set of ball states, by direct key counting."""
    g, sub = ball.group, ball.sub
    F = {ball.keys[s] for s in states}
    moved = {sub.coset_key(g._normal_form(ball.reps[s] + tuple(gamma))) for s in states}
    return len(moved ^ F) / len(F)


def folner_search(ball: CosetBall, phi, eps: float) -> FolnerResult:
    """First sub-ball ``B_r`` with ``max_gamma |gamma B_r symdiff B_r| / |B_r| < eps``.

    Translates leaving the explored ball count toward the symmetric difference.
    """
    phi = [ball.group.check(w) for w in phi]
    ratios = []
    for r in range(ball.radius + 1):
        states = ball.sub_ball(r)
        worst = max((folner_ratio(ball, states, gamma) for gamma in phi), default=0.0)
        ratios.append(worst)
        if worst < eps:
            return FolnerResult(True, states, r, ratios)
    return FolnerResult(False, None, None, ratios)


# -- weak mean ergodic averages --------------------------------------------


def represent(group: MarkedGroup, matrices, w) -> np.ndarray:
    """Matrix of the word ``w`` under a representation given on generators.

    Powers are taken by repeated squaring (``matrix_power``) syllable by
    syllable, which keeps rounding error logarithmic in the exponent.
    """
    mats = [np.asarray(m) for m in matrices]
    dim = mats[0].shape[0]
    dtype = np.result_type(*mats)
    out = np.eye(dim, dtype=dtype)
    nf = group.normal_form(w)
    if isinstance(group, _AbelianGroup):
        for i, e in enumerate(group.exponents(nf)):
            if e:
                out = out @ np.linalg.matrix_power(mats[i], e)
        return out
    j = 0
    while j < len(nf):
        l = nf[j]
        run = 1
        while j + run < len(nf) and nf[j + run] == l:
            run += 1
        m = mats[abs(l) - 1]
        if l < 0:
            m = m.conj().T
        out = out @ np.linalg.matrix_power(m, run)
        j += run
    return out


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_average_bound(angle: float, n: int) -> float:
    """``2 / (n |1 - e^{i angle}|)``: bound on the Cesaro average of a rotated unit vector."""
    return 2.0 / (n * abs(1 - complex(math.cos(angle), math.sin(angle))))


def fixed_space_projection(matrices) -> np.ndarray:
    """Orthogonal projection onto the common fixed space of the generators."""
    mats = [np.asarray(m) for m in matrices]
    dim = mats[0].shape[0]
    stacked = np.vstack([m - np.eye(dim) for m in mats])
    basis = scipy.linalg.null_space(stacked, rcond=1e-10)
    return basis @ basis.conj().T


@dataclass
class MeanErgodicResult:
    averages: List[np.ndarray]
    projection: np.ndarray
    deviations: List[float]

    @property
    def norms(self):
        return [float(np.linalg.norm(a)) for a in self.averages]


def interval_folner_sets(n_max: int):
    """``F_n = {a^0, ..., a^(n-1)}`` for n = 1..n_max, as words in the first generator."""
    return [[(1,) * j for j in range(n)] for n in range(1, n_max + 1)]


def mean_ergodic_average(group, matrices, xi, folner_sets, lambda_words=()) -> MeanErgodicResult:
    """Averages ``(1/|F|) sum_{g in F} pi(g) xi`` over each finite set ``F``.

    Each ``F`` is given by one representative word per coset; ``xi`` must be
    fixed by the subgroup generated by ``lambda_words``.
    """
    mats = [np.asarray(m) for m in matrices]
    if len(mats) != group.generator_count:
        raise ValidationError("need one matrix per generator")
    for m in mats:
        if np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0])) > 1e-10:
            raise NotUnitary("representation matrix is not unitary within 1e-10")
    xi = np.asarray(xi)
    for w in lambda_words:
        if np.linalg.norm(represent(group, mats, w) @ xi - xi) > 1e-10:
            raise NotLambdaFixed("vector is not fixed by the subgroup")
    P = fixed_space_projection(mats)
    target = P @ xi
    averages, deviations = [], []
    cache = {}

    def image(w):
        w = tuple(w)
        if w not in cache:
            cache[w] = represent(group, mats, w) @ xi
        return cache[w]

    for F in folner_sets:
        F = list(F)
        if not F:
            raise ValidationError("empty Folner set")
        vecs = np.array([image(w) for w in F])
        avg = vecs.sum(axis=0) / len(F)
        averages.append(avg)
        deviations.append(float(np.linalg.norm(avg - target)))
    return MeanErgodicResult(averages, target, deviations)
