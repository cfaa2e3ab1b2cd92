"""Return-probability series and their serialization."""

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

Z95 = 1.959963984540054


def wilson_interval(hits, n, z=Z95):
    hits = np.asarray(hits, dtype=float)
    if n == 0:
        return np.zeros_like(hits), np.ones_like(hits)
    p = hits / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lo = np.where(hits == 0, 0.0, np.clip(center - half, 0.0, 1.0))
    hi = np.where(hits == n, 1.0, np.clip(center + half, 0.0, 1.0))
    # rounding can push a bound a hair past p itself
    return np.minimum(lo, p), np.maximum(hi, p)


@dataclass
class ReturnSeries:
    """Hit counts at even times 2, 4, ..., 2K over ``samples`` paths.

    ``hits[k-1]`` counts paths in the target at time ``2k``.  For bracketed
    targets ``hits`` is the lower count and ``hits_upper`` the upper one.
    """

    hits: np.ndarray
    samples: int
    hits_upper: Optional[np.ndarray] = None
    label: str = ""
    seed: Optional[int] = None
    k: np.ndarray = field(init=False)

    def __post_init__(self):
        self.hits = np.asarray(self.hits, dtype=np.int64)
        if self.hits_upper is not None:
            self.hits_upper = np.asarray(self.hits_upper, dtype=np.int64)
        self.k = np.arange(1, len(self.hits) + 1)

    @property
    def K(self):
        return len(self.hits)

    @property
    def times(self):
        return 2 * self.k

    @property
    def p_hat(self):
        return self.hits / self.samples if self.samples else np.zeros(self.K)

    @property
    def p_hat_upper(self):
        if self.hits_upper is None:
            return None
        return self.hits_upper / self.samples if self.samples else np.zeros(self.K)

    @property
    def stderr(self):
        p = self.p_hat
        return np.sqrt(p * (1 - p) / max(self.samples, 1))

    @property
    def ci(self):
        return wilson_interval(self.hits, self.samples)

    def rows(self):
        lo, hi = self.ci
        for j in range(self.K):
            row = {
                "k": int(self.k[j]),
                "hits": int(self.hits[j]),
                "samples": int(self.samples),
                "p_hat": float(self.p_hat[j]),
                "ci_lo": float(lo[j]),
                "ci_hi": float(hi[j]),
            }
            if self.hits_upper is not None:
                row["hits_upper"] = int(self.hits_upper[j])
            yield row

    def to_csv(self) -> str:
        cols = ["k", "hits", "samples", "p_hat", "ci_lo", "ci_hi"]
        if self.hits_upper is not None:
            cols.append("hits_upper")
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({c: repr(v) if isinstance(v, float) else v for c, v in row.items()})
        return buf.getvalue()

    def to_dict(self):
        d = {"label": self.label, "samples": int(self.samples), "seed": self.seed, "rows": list(self.rows())}
        return d
