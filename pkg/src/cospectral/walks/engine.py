"""Monte Carlo sampling of return series.

Sample ``i`` draws step ``t`` from ``step_uniform(sample_key(seed, i), t)``,
so every path depends on ``(seed, i)`` only.  Samples are processed in
fixed-size chunks and hit counts are summed as integers, which makes the
result independent of chunk scheduling and worker count.
"""

import bisect
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import hashing
from ..errors import ValidationError
from .batch import BatchWalker
from .distribution import StepDistribution
from .series import ReturnSeries

CHUNK = 1 << 15


def _atom_table(nu: StepDistribution):
    atoms = nu.support
    width = max(1, nu.max_atom_length())
    table = np.zeros((len(atoms), width), dtype=np.int64)
    for a, w in enumerate(atoms):
        table[a, : len(w)] = w
    cum = np.cumsum(nu.probabilities)
    cum[-1] = 1.0
    return table, cum


def choose_atoms(cum, u):
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, len(cum) - 1)


def choose_atom_scalar(cum, u):
    return min(bisect.bisect_right(cum.tolist(), u), len(cum) - 1)


def _run_chunk(args):
    group, table, cum, targets, K, seed, i0, i1 = args
    n = i1 - i0
    skeys = hashing.sample_keys(seed, np.arange(i0, i1, dtype=np.uint64))
    cap = 2 * K * table.shape[1]
    walker = BatchWalker(group, n, cap, track_hash=any(t.needs_hash for t in targets))
    bound = [t.bind(walker, skeys, cap) for t in targets]
    lower = np.zeros((len(targets), K), dtype=np.int64)
    upper = np.zeros((len(targets), K), dtype=np.int64)
    eligible = np.array([int(b.eligible.sum()) for b in bound], dtype=np.int64)
    for t in range(2 * K):
        atoms = choose_atoms(cum, hashing.step_uniform_array(skeys, t))
        letters = table[atoms]
        for j in range(letters.shape[1]):
            col = letters[:, j]
            if not col.any():
                continue
            info = walker.apply(col)
            for b in bound:
                b.update(col, info)
        if t % 2 == 1:
            k = t // 2
            for j, b in enumerate(bound):
                lo, up = b.query()
                lower[j, k] = np.count_nonzero(lo & b.eligible)
                upper[j, k] = np.count_nonzero((lo if up is None else up) & b.eligible)
    return lower, upper, eligible


def coupled_series(group, targets, nu: StepDistribution, K: int, N: int, seed: int, workers: int = 1):
    """Evaluate every target on the same ``N`` sampled paths of ``2K`` steps."""
    if K < 1 or N < 1:
        raise ValidationError("K and N must be >= 1")
    if nu.group != group:
        raise ValidationError("step distribution lives on a different group")
    nu.require_symmetric()
    targets = list(targets)
    table, cum = _atom_table(nu)
    jobs = [
        (group, table, cum, targets, K, int(seed), i0, min(i0 + CHUNK, N))
        for i0 in range(0, N, CHUNK)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]
    lower = sum(r[0] for r in results)
    upper = sum(r[1] for r in results)
    eligible = sum(r[2] for r in results)
    out = []
    for j, t in enumerate(targets):
        out.append(
            ReturnSeries(
                hits=lower[j],
                samples=int(eligible[j]),
                hits_upper=upper[j] if t.bracketed else None,
                label=t.name,
                seed=int(seed),
            )
        )
    return out


def sample_return_series(group, target, nu, K, N, seed, workers=1) -> ReturnSeries:
    return coupled_series(group, [target], nu, K, N, seed, workers)[0]


def sample_path(group, nu: StepDistribution, steps: int, seed: int, i: int):
    """Scalar replay of path ``i``: the list of positions after each step."""
    table, cum = _atom_table(nu)
    atoms = nu.support
    skey = hashing.sample_key(seed, i)
    pos = ()
    out = []
    for t in range(steps):
        a = choose_atom_scalar(cum, hashing.step_uniform(skey, t))
        pos = group.multiply(pos, atoms[a])
        out.append(pos)
    return out
