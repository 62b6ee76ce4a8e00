"""Malthusian parameters and the asymptotic constants built from them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .distributions import LifetimeDistribution, laplace, laplace_weighted

MAX_BISECTIONS = 200


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class Constants:
    """Single-type constants.

    ``c`` scales E Z(t) ~ c e^{alpha t}; ``h * alpha_prime`` is the slope of
    the average generation; ``k`` is the limit second moment of the
    normalised processes, so ``var_limit = k - 1``.
    """

    alpha: float
    alpha_prime: float
    c: float
    k: float
    var_limit: float
    h: float
    v: float
    lattice_warning: bool = False
    n_initial: int = 1
    spec_hash: str | None = None

    @property
    def slope(self) -> float:
        return self.h * self.alpha_prime

    def as_table(self) -> dict:
        return asdict(self) | {"slope": self.slope}


@dataclass(frozen=True)
class TwoTypeConstants:
    """Constants of the one-way differentiating two-type process.

    ``c21`` is the renewal-theory prefactor of E_1 Z_2(t) e^{-alpha1 t};
    ``c21_printed`` is the alternative closed form with an h2^2 denominator, kept for the
    cross-check reported by ``bhgen verify``.
    """

    alpha1: float
    alpha2: float
    alpha1_prime: float
    alpha2_prime: float
    c1: float
    c2: float
    d1: float
    d2: float
    c12: float
    d12: float
    c21: float
    d21: float
    c21_printed: float
    h1: float
    h2: float
    mu: float
    ordering: str
    k1: float
    k2: float
    lattice_warning: bool = False
    n_initial: int = 1
    spec_hash: str | None = None

    def scaling(self, cell_type: int) -> tuple[float, float, float]:
        """(rate, c, d) such that Z ~ c e^{rate t} and G ~ d t e^{rate t}."""
        if cell_type == 1:
            return self.alpha1, self.c1, self.d1
        if self.ordering == "alpha1_less":
            return self.alpha2, self.c12, self.d12
        return self.alpha1, self.c21, self.d21

    def slope(self, cell_type: int) -> float:
        if cell_type == 1 or self.ordering == "alpha2_less":
            return self.h1 * self.alpha1_prime
        return self.mu * self.alpha2_prime

    def as_table(self) -> dict:
        return asdict(self) | {"slope1": self.slope(1), "slope2": self.slope(2)}


def solve_malthus(h: float, L: LifetimeDistribution) -> float:
    """Positive root alpha of h E(e^{-alpha L}) = 1, by bisection."""
    if not h > 1:
        raise CalibrationError(f"Malthusian root needs h > 1, got {h}")
    g = lambda a: h * laplace(L, a) - 1.0  # noqa: E731
    lo, hi = 0.0, 1.0
    while g(hi) >= 0:
        lo, hi = hi, 2 * hi
        if hi > 2.0**64:
            raise CalibrationError(f"could not bracket Malthusian root for {L}")
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if gm == 0:
            return mid
        if gm > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(g(lo)) <= abs(g(hi)) else hi


def derived_constants(h: float, v: float, L: LifetimeDistribution, alpha: float,
                      n_initial: int = 1, spec_hash: str | None = None) -> Constants:
    lw = laplace_weighted(L, alpha)
    lap2 = laplace(L, 2 * alpha)
    denom = 1.0 - h * lap2
    if denom <= 0:
        raise CalibrationError("defective denominator: h E(e^{-2 alpha L}) >= 1; alpha is not the Malthusian root")
    alpha_prime = 1.0 / (h * h * lw)
    k = v * lap2 / denom
    return Constants(
        alpha=alpha,
        alpha_prime=alpha_prime,
        c=(h - 1.0) / (h * h * alpha * lw),
        k=k,
        var_limit=k - 1.0,
        h=h,
        v=v,
        lattice_warning=L.is_lattice,
        n_initial=n_initial,
        spec_hash=spec_hash,
    )


def single_type_constants(h: float, v: float, L: LifetimeDistribution, **kw) -> Constants:
    return derived_constants(h, v, L, solve_malthus(h, L), **kw)


def two_type_constants(L1: LifetimeDistribution, L2: LifetimeDistribution,
                       h1: float, h2: float, v1: float, mu: float, v2: float,
                       n_initial: int = 1, spec_hash: str | None = None) -> TwoTypeConstants:
    """All constants of the two-type process from its primitive inputs.

    ``v1`` and ``v2`` are the factorial second moments of the type-1 marginal
    and of the type-2 offspring law; they only feed ``k1``/``k2``.
    """
    if not (h1 > 1 and mu > 1):
        raise CalibrationError(f"two-type constants need h1 > 1 and mu > 1, got h1={h1}, mu={mu}")
    one = single_type_constants(h1, v1, L1)
    two = single_type_constants(mu, v2, L2)
    a1, a2 = one.alpha, two.alpha
    ordering = "alpha1_less" if a1 < a2 else "alpha2_less"

    c12 = d12 = math.nan
    c21 = d21 = c21_printed = math.nan
    if ordering == "alpha1_less":
        f1 = laplace(L1, a2)
        denom = 1.0 - h1 * f1
        if denom <= 0:
            raise CalibrationError("defective denominator: 1 - h1 E(e^{-alpha2 L1}) <= 0")
        c12 = h2 * two.c * f1 / denom
        d12 = c12 * mu * two.alpha_prime
    else:
        f2 = laplace(L2, a1)
        denom = 1.0 - mu * f2
        if denom <= 0:
            raise CalibrationError("defective denominator: 1 - mu E(e^{-alpha1 L2}) <= 0")
        # Key renewal theorem on E_1 Z_2 e^{-alpha1 t}: the forcing integrates to
        # (h2/h1) (1 - f2)/(alpha1 (1 - mu f2)) against a kernel with mean 1/(h1 alpha1').
        c21 = h2 * one.alpha_prime * (1.0 - f2) / (a1 * denom)
        d21 = c21 * h1 * one.alpha_prime
        if h2 > 0:
            c21_printed = h2 * (1.0 - f2) / (h2 * h2 * a1 * denom)
    return TwoTypeConstants(
        alpha1=a1, alpha2=a2,
        alpha1_prime=one.alpha_prime, alpha2_prime=two.alpha_prime,
        c1=one.c, c2=two.c,
        d1=one.c * h1 * one.alpha_prime, d2=two.c * mu * two.alpha_prime,
        c12=c12, d12=d12, c21=c21, d21=d21, c21_printed=c21_printed,
        h1=h1, h2=h2, mu=mu, ordering=ordering, k1=one.k, k2=two.k,
        lattice_warning=L1.is_lattice or L2.is_lattice,
        n_initial=n_initial, spec_hash=spec_hash,
    )
