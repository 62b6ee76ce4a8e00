"""Moment oracles from the renewal equations, independent of Monte Carlo.

Every moment solves K(t) = f(t) + int_0^t K(t - u) rho(du) with rho a
multiple of the lifetime law. On the grid t_n = n dt the measure is
discretised into interval masses m_j = w(midpoint_j) (F(t_j) - F(t_{j-1}))
and the convolution uses trapezoid values of K across each interval,
which makes the scheme implicit only through m_1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import LifetimeDistribution
from .engine import ProcessSpec

MOMENT_IDS = ("EZ", "EG", "EZ2", "EGZ", "EG2", "E1Z2", "E1G2")
RESOLUTION_FACTOR = 50


class ResolutionError(ValueError):
    """Grid step too coarse for the lifetime law."""


@dataclass
class MomentGrid:
    moment_id: str
    dt: float
    t_max: float
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    def at(self, t: float) -> float:
        """Linear interpolation on the grid."""
        return float(np.interp(t, self.times, self.values))


def n_steps(dt: float, t_max: float) -> int:
    if dt <= 0 or t_max < 0:
        raise ValueError("need dt > 0 and t_max >= 0")
    return int(round(t_max / dt))


def check_resolution(dist: LifetimeDistribution, dt: float) -> None:
    limit = dist.median() / RESOLUTION_FACTOR
    if dt > limit * (1 + 1e-12):
        raise ResolutionError(
            f"dt={dt} does not resolve lifetime {dist.kind} (need dt <= median/{RESOLUTION_FACTOR} = {limit:.4g})")


def default_dt(spec: ProcessSpec) -> float:
    return min([0.05] + [d.median() / 100 for d in spec.lifetime])


def kernel_masses(dist: LifetimeDistribution, dt: float, n: int, weight=None) -> np.ndarray:
    """Masses m_0..m_n of w(u) dP(L <= u) on [(j-1)dt, j dt]; m_0 = 0."""
    edges = np.arange(n + 1) * dt
    F = np.asarray(dist.cdf(edges), dtype=float)
    m = np.zeros(n + 1)
    m[1:] = np.diff(F)
    if weight is not None:
        mid = (edges[1:] + edges[:-1]) / 2
        m[1:] *= weight(mid)
    return m


def convolve_known(g: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Trapezoid approximation of int_0^{t_n} g(t_n - u) rho(du) for a known grid function g."""
    n = len(g) - 1
    out = np.zeros(n + 1)
    if n == 0:
        return out
    a = 0.5 * (g[:-1] + g[1:])
    out[1:] = np.convolve(masses[1:], a)[:n]
    return out


def solve_volterra(f: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Solve K = f + K * rho on the grid by forward substitution.

    ``masses`` are the interval masses of rho as from :func:`kernel_masses`
    and must have the same length as ``f``.
    """
    f = np.asarray(f, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if f.shape != masses.shape:
        raise ValueError("forcing grid and kernel masses must have equal length")
    n = len(f) - 1
    K = np.empty(n + 1)
    a = np.empty(max(n, 1))  # a[k] = (K[k] + K[k+1]) / 2
    K[0] = f[0]
    m1 = masses[1] if n else 0.0
    denom = 1.0 - 0.5 * m1
    if denom <= 0:
        raise ResolutionError("first kernel interval carries mass >= 2; refine dt")
    for i in range(1, n + 1):
        s = f[i] + 0.5 * m1 * K[i - 1]
        if i >= 2:
            s += np.dot(masses[2:i + 1], a[i - 2::-1])
        K[i] = s / denom
        a[i - 1] = 0.5 * (K[i - 1] + K[i])
    return K


def kernel_mass_total(dist: LifetimeDistribution, scale: float, rate: float) -> float:
    """Total mass of scale * e^{-rate u} dP(L <= u)."""
    from .distributions import laplace

    return scale * laplace(dist, rate)


def single_type_grids(L: LifetimeDistribution, h: float, v: float, dt: float, t_max: float,
                      second_moments: bool = True, check: bool = True) -> dict[str, np.ndarray]:
    """Moments for one initial cell of a single-type process."""
    if check:
        check_resolution(L, dt)
    n = n_steps(dt, t_max)
    dF = kernel_masses(L, dt, n)
    hdF = h * dF
    survival = 1.0 - np.asarray(L.cdf(np.arange(n + 1) * dt))
    EZ = solve_volterra(survival, hdF)
    EG = solve_volterra(h * convolve_known(EZ, dF), hdF)
    out = {"EZ": EZ, "EG": EG}
    if second_moments:
        EZ2 = solve_volterra(survival + v * convolve_known(EZ * EZ, dF), hdF)
        f_gz = convolve_known(v * (EG * EZ + EZ * EZ) + h * EZ2, dF)
        EGZ = solve_volterra(f_gz, hdF)
        f_g2 = convolve_known(v * (EG * EG + 2 * EG * EZ + EZ * EZ) + h * (2 * EGZ + EZ2), dF)
        EG2 = solve_volterra(f_g2, hdF)
        out |= {"EZ2": EZ2, "EGZ": EGZ, "EG2": EG2}
    return out


def moment_grids(spec: ProcessSpec, dt: float | None = None, t_max: float = 96.0,
                 second_moments: bool = True) -> dict[str, MomentGrid]:
    """All oracle grids for ``spec``, scaled to its initial population.

    Single-type specs give EZ, EG, EZ2, EGZ, EG2. Two-type specs give the
    type-1 marginal means EZ, EG and the type-2 means E1Z2, E1G2.
    """
    if dt is None:
        dt = default_dt(spec)
    for d in spec.lifetime:
        check_resolution(d, dt)
    n = n_steps(dt, t_max)
    t_max = n * dt

    if spec.n_types == 1:
        h, v = spec.offspring_type1.moments()
        g = single_type_grids(spec.lifetime[0], h, v, dt, t_max, second_moments, check=False)
        n0 = spec.initial_count(1)
        scaled = {"EZ": n0 * g["EZ"], "EG": n0 * g["EG"]}
        if second_moments:
            extra = n0 * (n0 - 1)
            scaled["EZ2"] = n0 * g["EZ2"] + extra * g["EZ"] ** 2
            scaled["EGZ"] = n0 * g["EGZ"] + extra * g["EG"] * g["EZ"]
            scaled["EG2"] = n0 * g["EG2"] + extra * g["EG"] ** 2
        return {k: MomentGrid(k, dt, t_max, val) for k, val in scaled.items()}

    L1, L2 = spec.lifetime
    marg1 = spec.offspring_type1.marginal(0)
    h1, v1 = marg1.moments()
    _, h2 = spec.offspring_type1.moments()
    mu, v2 = spec.offspring_type2.moments()
    g1 = single_type_grids(L1, h1, v1, dt, t_max, second_moments=False, check=False)
    g2 = single_type_grids(L2, mu, v2, dt, t_max, second_moments=False, check=False)
    dF1 = kernel_masses(L1, dt, n)
    E1Z2 = solve_volterra(h2 * convolve_known(g2["EZ"], dF1), h1 * dF1)
    f = convolve_known(h1 * E1Z2 + h2 * (g2["EG"] + g2["EZ"]), dF1)
    E1G2 = solve_volterra(f, h1 * dF1)
    n1, n2 = spec.initial_count(1), spec.initial_count(2)
    vals = {
        "EZ": n1 * g1["EZ"],
        "EG": n1 * g1["EG"],
        "E1Z2": n1 * E1Z2 + n2 * g2["EZ"],
        "E1G2": n1 * E1G2 + n2 * g2["EG"],
    }
    return {k: MomentGrid(k, dt, t_max, val) for k, val in vals.items()}
