"""Average generation, the label-loss estimator, and normalised prefactors.

Undefined values are returned as ``None``; they are written to CSV as
empty fields, never as zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .calibration import Constants, TwoTypeConstants
from .engine import Snapshot


class SpecMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorPoint:
    t: float
    cell_type: int
    avg_gen: float | None
    label_est: float | None
    w_z: float | None
    w_g: float | None


def average_generation(s: Snapshot, cell_type: int = 1) -> float | None:
    z = s.Z[cell_type - 1]
    if z == 0:
        return None
    return s.G[cell_type - 1] / z


def label_estimate_from_fraction(fraction: float, p: float, t: float) -> float | None:
    """-(1/(p t)) log(fraction)."""
    if not (p > 0 and t > 0):
        raise ValueError("label estimate needs p > 0 and t > 0")
    if fraction <= 0:
        return None
    return -math.log(fraction) / (p * t)


def label_estimate(s: Snapshot, p: float, cell_type: int = 1) -> float | None:
    z = s.Z[cell_type - 1]
    zp = s.Zpos[cell_type - 1]
    if z == 0 or zp == 0:
        return None
    if zp == z:
        return 0.0
    return label_estimate_from_fraction(zp / z, p, s.t)


def _scaling(consts: Constants | TwoTypeConstants, cell_type: int) -> tuple[float, float, float]:
    if isinstance(consts, TwoTypeConstants):
        return consts.scaling(cell_type)
    if cell_type != 1:
        raise ValueError("single-type constants only describe cell type 1")
    return consts.alpha, consts.c, consts.c * consts.h * consts.alpha_prime


def normalized_point(s: Snapshot, consts: Constants | TwoTypeConstants, cell_type: int = 1,
                     p: float | None = None, spec_hash: str | None = None) -> EstimatorPoint:
    """Estimator quantities at one snapshot.

    w_z = Z / (n0 c e^{rate t}) and w_g = G / (n0 d t e^{rate t}), where
    (rate, c, d) are the single-type or cross-type scalings and n0 is the
    initial type-1 count the constants were built for.
    """
    if spec_hash is not None and consts.spec_hash is not None and spec_hash != consts.spec_hash:
        raise SpecMismatchError(f"constants built for spec {consts.spec_hash}, snapshot from {spec_hash}")
    rate, c, d = _scaling(consts, cell_type)
    n0 = consts.n_initial
    i = cell_type - 1
    growth = math.exp(rate * s.t)
    w_z = s.Z[i] / (n0 * c * growth)
    w_g = s.G[i] / (n0 * d * s.t * growth) if s.t > 0 else None
    est = None
    if p is not None and s.t > 0:
        # with p = 0 labels are never lost, so Zpos = Z and the estimate is exactly 0
        est = label_estimate(s, p, cell_type)
    return EstimatorPoint(s.t, cell_type, average_generation(s, cell_type), est, w_z, w_g)


def slope_target(consts: Constants | TwoTypeConstants, cell_type: int = 1) -> float:
    """Limit of G/(t Z): h alpha' (single type) or the dominant type's slope."""
    if isinstance(consts, TwoTypeConstants):
        return consts.slope(cell_type)
    return consts.slope
