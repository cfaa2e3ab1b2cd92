"""Cospectral radii of subgroups and subrelations: walks, truncated operators, finite models."""

from .errors import ComputationError, CospectralError, ValidationError
from .groups import (
    CyclicGenerator,
    CyclicGroup,
    DirectProduct,
    FiniteIndexCosetTable,
    FreeAbelianGroup,
    FreeGroup,
    GroupHomomorphism,
    KernelOfHom,
    Trivial,
    Whole,
    coset_key,
    evaluate_hom,
    multiply,
    normal_form,
    subgroup_contains,
)
from .walks import StepDistribution, coupled_series, fit_radius, make_lazy, sample_return_series

__version__ = "0.1.0"

__all__ = [
    "ComputationError",
    "CospectralError",
    "ValidationError",
    "CyclicGenerator",
    "CyclicGroup",
    "DirectProduct",
    "FiniteIndexCosetTable",
    "FreeAbelianGroup",
    "FreeGroup",
    "GroupHomomorphism",
    "KernelOfHom",
    "Trivial",
    "Whole",
    "coset_key",
    "evaluate_hom",
    "multiply",
    "normal_form",
    "subgroup_contains",
    "StepDistribution",
    "coupled_series",
    "fit_radius",
    "make_lazy",
    "sample_return_series",
]
