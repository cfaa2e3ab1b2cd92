"""Fitting the exponential decay rate of a return series."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ValidationError, WindowTooShort, ZeroProbabilityInWindow
from .series import ReturnSeries

MODELS = ("loglinear", "loglinear-polycorrected", "ratio")
# local-limit exponent for nonamenable returns
POLY_EXPONENT = 1.5


@dataclass
class RadiusEstimate:
    value: float
    stderr: float
    method: str
    window: Tuple[int, int]
    truncated: bool = False
    seed: Optional[int] = None
    residuals: List[float] = field(default_factory=list)

    def to_dict(self):
        return {
            "value": float(self.value),
            "stderr": float(self.stderr),
            "method": self.method,
            "window": [int(self.window[0]), int(self.window[1])],
            "truncated": bool(self.truncated),
            "seed": self.seed,
        }


def default_window(K):
    return (max(1, K // 2), K)


def fit_decay(k, p, window=None, model="loglinear-polycorrected", seed=None) -> RadiusEstimate:
    """Fit ``rho`` in ``p_{2k} ~ C rho^{2k}`` (times ``k^-3/2`` when polycorrected).

    ``k`` are half-step indices and ``p`` the matching probabilities.  Zeros
    inside the window truncate it to its positive prefix.
    """
    if model not in MODELS:
        raise ValidationError(f"unknown model {model!r}; expected one of {MODELS}")
    k = np.asarray(k, dtype=np.int64)
    p = np.asarray(p, dtype=float)
    lo, hi = window if window is not None else default_window(int(k.max()))
    if hi - lo + 1 < 3:
        raise WindowTooShort(f"window [{lo}, {hi}] has fewer than 3 points")
    sel = (k >= lo) & (k <= hi)
    if sel.sum() < 3:
        raise WindowTooShort(f"window [{lo}, {hi}] has fewer than 3 points in the series")
    kw, pw = k[sel], p[sel]
    truncated = False
    zeros = np.flatnonzero(pw <= 0)
    if zeros.size:
        truncated = True
        kw, pw = kw[: zeros[0]], pw[: zeros[0]]
        if kw.size < 3:
            raise ZeroProbabilityInWindow(
                f"only {kw.size} positive points in window [{lo}, {hi}]; enlarge N or shrink window"
            )
    x = 2.0 * kw
    y = np.log(pw)
    if model == "ratio":
        r = np.diff(y) / np.diff(x)
        slope = r.mean()
        se = r.std(ddof=1) / np.sqrt(r.size) if r.size > 1 else 0.0
        resid = r - slope
    else:
        if model == "loglinear-polycorrected":
            y = y + POLY_EXPONENT * np.log(kw)
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        slope = coef[1]
        resid = y - A @ coef
        dof = max(x.size - 2, 1)
        s2 = float(resid @ resid) / dof
        sxx = float(((x - x.mean()) ** 2).sum())
        se = np.sqrt(s2 / sxx)
    rho = float(np.exp(slope))
    return RadiusEstimate(
        value=min(max(rho, 0.0), 1.0),
        stderr=float(rho * se),
        method=model,
        window=(int(kw[0]), int(kw[-1])),
        truncated=truncated,
        seed=seed,
        residuals=[float(v) for v in resid],
    )


def fit_radius(series: ReturnSeries, window=None, model="loglinear-polycorrected") -> RadiusEstimate:
    return fit_decay(series.k, series.p_hat, window, model, seed=series.seed)


def fit_asymptotic(k, p, kmin=6, seed=None) -> RadiusEstimate:
    """Extrapolated rate for exact (noise-free) series.

    Fits ``log p_{2k} + 1.5 log k = c + 2k log rho + a/k + b/k^2`` over
    ``k >= kmin``; the correction terms absorb the subleading terms of the
    local limit expansion, which the two-parameter fits leave as bias.
    """
    k = np.asarray(k, dtype=float)
    p = np.asarray(p, dtype=float)
    sel = (k >= kmin) & (p > 0)
    if sel.sum() < 5:
        raise WindowTooShort(f"need at least 5 positive points with k >= {kmin}")
    kw, pw = k[sel], p[sel]
    y = np.log(pw) + POLY_EXPONENT * np.log(kw)
    A = np.column_stack([np.ones_like(kw), 2 * kw, 1 / kw, 1 / kw**2])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rho = float(np.exp(coef[1]))
    return RadiusEstimate(
        value=min(max(rho, 0.0), 1.0),
        stderr=0.0,
        method="asymptotic",
        window=(int(kw[0]), int(kw[-1])),
        seed=seed,
        residuals=[float(v) for v in resid],
    )
