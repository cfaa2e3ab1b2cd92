"""Step distributions on a marked group."""

from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import numpy as np

from ..errors import NotSymmetric, ValidationError
from ..groups import IDENTITY, MarkedGroup, Word

SUM_TOL = 1e-12


@dataclass(frozen=True)
class StepDistribution:
    """Finitely supported probability measure on ``group``.

    Atoms are merged by normal form and kept in first-seen order, so the
    inverse-CDF sampling in the walk engine is reproducible.
    """

    group: MarkedGroup
    atoms: Tuple[Tuple[Word, float], ...]

    def __init__(self, group, atoms):
        merged = {}
        for w, p in atoms:
            p = float(Fraction(p)) if isinstance(p, str) else float(p)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"atom probability {p} outside [0, 1]")
            nf = group.normal_form(w)
            merged[nf] = merged.get(nf, 0.0) + p
        total = sum(merged.values())
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "atoms", tuple((w, p) for w, p in merged.items() if p > 0))

    @classmethod
    def uniform(cls, group: MarkedGroup):
        """Uniform measure on the generators and their inverses."""
        letters = group.letters()
        return cls(group, [((l,), 1.0 / len(letters)) for l in letters])

    @property
    def support(self):
        return [w for w, _ in self.atoms]

    @property
    def probabilities(self):
        return np.array([p for _, p in self.atoms])

    def mass(self, w) -> float:
        nf = self.group.normal_form(w)
        return sum(p for a, p in self.atoms if a == nf)

    def is_symmetric(self, tol=SUM_TOL) -> bool:
        masses = dict(self.atoms)
        return all(
            abs(masses.get(self.group.inverse(w), 0.0) - p) <= tol for w, p in self.atoms
        )

    def require_symmetric(self):
        if not self.is_symmetric():
            raise NotSymmetric()
        return self

    def is_lazy(self) -> bool:
        return self.mass(IDENTITY) >= 0.5 - SUM_TOL

    def max_atom_length(self) -> int:
        return max((len(w) for w in self.support), default=0)


def make_lazy(nu: StepDistribution) -> StepDistribution:
    """Return the lazy version (nu + delta_e) / 2."""
    nu.require_symmetric()
    atoms = [(w, 0.5 * p) for w, p in nu.atoms] + [(IDENTITY, 0.5)]
    return StepDistribution(nu.group, atoms)
