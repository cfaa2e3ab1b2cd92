"""Monte Carlo estimation of (co)spectral radii from sampled walks."""

from .distribution import StepDistribution, make_lazy
from .engine import coupled_series, sample_path, sample_return_series
from .fit import RadiusEstimate, default_window, fit_asymptotic, fit_decay, fit_radius
from .series import ReturnSeries, wilson_interval
from .targets import (
    MembershipTarget,
    PercolationTarget,
    RestrictedTarget,
    SmallPiecesTarget,
    SubgroupTarget,
)

__all__ = [
    "StepDistribution",
    "make_lazy",
    "coupled_series",
    "sample_path",
    "sample_return_series",
    "RadiusEstimate",
    "default_window",
    "fit_asymptotic",
    "fit_decay",
    "fit_radius",
    "ReturnSeries",
    "wilson_interval",
    "MembershipTarget",
    "PercolationTarget",
    "RestrictedTarget",
    "SmallPiecesTarget",
    "SubgroupTarget",
]
