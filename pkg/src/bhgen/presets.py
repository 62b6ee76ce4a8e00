"""Parameterisations of the B-cell lifetime and offspring laws used by the figure generators."""

from __future__ import annotations

from .distributions import LifetimeDistribution, OffspringDistribution
from .engine import ProcessSpec

# murine B cells stimulated with CpG DNA: lognormal, mean 9.3 h, sd 2.54 h
B_CELL_LIFETIME = LifetimeDistribution.lognormal(9.3, 2.54)
DIE_OR_DOUBLE = OffspringDistribution.from_mapping({0: 0.2, 2: 0.8})
ALWAYS_TWO = OffspringDistribution.from_mapping({2: 1.0})
TYPE2_FRACTION = 1.0 / 6.0


def single_type_spec(p_label_loss: float = 0.0, initial_count: int = 1) -> ProcessSpec:
    """Single-type process: die w.p. 1/5, divide into two w.p. 4/5."""
    return ProcessSpec.single(B_CELL_LIFETIME, DIE_OR_DOUBLE, p_label_loss, initial_count)


def two_type_spec(ordering: str, p_label_loss: float = 0.0, initial_count: int = 1) -> ProcessSpec:
    """Two-type process; each child of a type-1 cell is type 2 w.p. 1/6.

    ``alpha1_less``: both types always have two offspring.
    ``alpha2_less``: type-2 cells die w.p. 2/5, otherwise divide in two.
    """
    off1 = OffspringDistribution.binomial_split(ALWAYS_TWO, TYPE2_FRACTION)
    if ordering == "alpha1_less":
        off2 = ALWAYS_TWO
    elif ordering == "alpha2_less":
        off2 = OffspringDistribution.from_mapping({0: 0.4, 2: 0.6})
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    return ProcessSpec.two_type(B_CELL_LIFETIME, B_CELL_LIFETIME, off1, off2,
                                p_label_loss, initial_count)
