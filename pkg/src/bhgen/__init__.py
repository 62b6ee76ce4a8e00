"""Age-dependent (Bellman-Harris) branching processes with generation counting.

Simulate single- and two-type populations, calibrate Malthusian parameters
and asymptotic constants, solve the renewal equations for exact moments,
and estimate average generation from label dilution.
"""

from .calibration import Constants, TwoTypeConstants, single_type_constants, solve_malthus, two_type_constants
from .distributions import LifetimeDistribution, OffspringDistribution, RngStream
from .engine import ProcessSpec, Snapshot, Trajectory, simulate
from .estimator import average_generation, label_estimate, normalized_point
from .oracle import moment_grids

__version__ = "0.1.0"

__all__ = [
    "Constants", "TwoTypeConstants", "single_type_constants", "solve_malthus", "two_type_constants",
    "LifetimeDistribution", "OffspringDistribution", "RngStream",
    "ProcessSpec", "Snapshot", "Trajectory", "simulate",
    "average_generation", "label_estimate", "normalized_point", "moment_grids",
]
