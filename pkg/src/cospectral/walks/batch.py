"""Vectorized walker state: one row per sample path.

Free factors keep the reduced word as a stack (cancellation against the top
letter is amortized O(1) per step); abelian factors keep exponent vectors.
Free factors also maintain the polynomial hash of the *inverse* element,
which is what the environments index their coordinates by.
"""

import numpy as np

from .. import hashing
from ..groups import DirectProduct, FreeGroup


def _powers(cap):
    out = np.empty(cap + 1, dtype=np.uint64)
    x = 1
    for i in range(cap + 1):
        out[i] = x
        x = (x * hashing.BASE) & hashing.MASK
    return out


class FreeFactor:
    def __init__(self, group, n, cap, track_hash):
        self.group = group
        self.cap = cap
        self.stack = np.zeros((n, max(cap, 1)), dtype=np.int32)
        self.length = np.zeros(n, dtype=np.int64)
        self.track_hash = track_hash
        if track_hash:
            self.poly = np.zeros(n, dtype=np.uint64)
            self.bpow = _powers(cap)

    def apply(self, letters, mask):
        """Right-multiply masked rows by one local letter each.

        Returns (popped_rows, popped_letters, pushed_rows, pushed_letters).
        """
        rows = np.flatnonzero(mask)
        ll = letters[rows]
        ln = self.length[rows]
        top = self.stack[rows, np.maximum(ln - 1, 0)]
        cancel = (ln > 0) & (top == -ll)
        pr, pl = rows[cancel], top[cancel]
        self.length[pr] -= 1
        qr, ql = rows[~cancel], ll[~cancel]
        pos = self.length[qr]
        if pos.size and pos.max() >= self.cap:
            raise OverflowError("walker stack capacity exceeded")
        self.stack[qr, pos] = ql
        if self.track_hash:
            self.poly[pr] -= hashing.letter_code_array(-pl) * self.bpow[self.length[pr]]
            self.poly[qr] += hashing.letter_code_array(-ql) * self.bpow[pos]
        self.length[qr] += 1
        return pr, pl, qr, ql

    def is_identity(self):
        return self.length == 0

    def word_length(self):
        return self.length.copy()

    def inverse_hash(self):
        return hashing.free_poly_finish_array(self.poly, self.length)

    def words(self, rows):
        return [tuple(int(x) for x in self.stack[r, : self.length[r]]) for r in rows]


class AbelianFactor:
    def __init__(self, group, n):
        self.group = group
        self.moduli = np.array(group.moduli, dtype=np.int64)
        self.exps = np.zeros((n, group.generator_count), dtype=np.int64)

    def apply(self, letters, mask):
        rows = np.flatnonzero(mask)
        ll = letters[rows]
        coord = np.abs(ll) - 1
        self.exps[rows, coord] += np.sign(ll)
        m = self.moduli[coord]
        finite = m > 0
        if finite.any():
            r, c = rows[finite], coord[finite]
            self.exps[r, c] %= m[finite]
        return None

    def is_identity(self):
        return ~np.any(self.exps, axis=1)

    def word_length(self):
        e = self.exps
        dist = np.where(self.moduli > 0, np.minimum(e, self.moduli - e), np.abs(e))
        return dist.sum(axis=1)

    def inverse_hash(self):
        inv = np.where(self.moduli > 0, (-self.exps) % np.maximum(self.moduli, 1), -self.exps)
        return hashing.abelian_key_hash_array(inv)

    def words(self, rows):
        return [self.group.from_exponents(tuple(int(x) for x in self.exps[r])) for r in rows]


class BatchWalker:
    """Positions of ``n`` walks on ``group``, updated letter by letter."""

    def __init__(self, group, n, cap, track_hash=False):
        self.group = group
        self.n = n
        self.factors = []
        for off, f in group.components():
            if isinstance(f, FreeGroup):
                fac = FreeFactor(f, n, cap, track_hash)
            else:
                fac = AbelianFactor(f, n)
            self.factors.append((off, f.generator_count, fac))

    def apply(self, letters):
        """Apply signed global letters (0 = no-op).  Returns per-factor update info."""
        a = np.abs(letters)
        s = np.sign(letters)
        info = []
        for off, gc, fac in self.factors:
            mask = (a > off) & (a <= off + gc)
            if not mask.any():
                info.append(None)
                continue
            info.append(fac.apply(s * (a - off), mask))
        return info

    def is_identity(self):
        out = np.ones(self.n, dtype=bool)
        for _, _, fac in self.factors:
            out &= fac.is_identity()
        return out

    def word_length(self):
        return sum(fac.word_length() for _, _, fac in self.factors)

    def inverse_hash(self):
        """``group.key_hash(inverse(position))`` for every row."""
        parts = [fac.inverse_hash() for _, _, fac in self.factors]
        if isinstance(self.group, DirectProduct):
            return hashing.combine_hashes_array(parts, self.n)
        return parts[0]

    def words(self, rows=None):
        """Normal-form words of the given rows (debugging and cross-checks)."""
        rows = range(self.n) if rows is None else rows
        rows = list(rows)
        per = [fac.words(rows) for _, _, fac in self.factors]
        out = []
        for j in range(len(rows)):
            w = []
            for (off, _, _), ws in zip(self.factors, per):
                w.extend(l + off if l > 0 else l - off for l in ws[j])
            out.append(tuple(w))
        return out
