"""Lifetime and offspring laws, seeded random streams, Laplace functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special

LIFETIME_KINDS = ("exponential", "lognormal", "gamma", "deterministic")
MAX_OFFSPRING_OUTCOMES = 64
QUAD_RTOL = 1e-10
TAIL_MASS = 1e-12


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


def lognormal_log_params(mean: float, sd: float) -> tuple[float, float]:
    """Convert natural-scale (mean, sd) to log-scale (mu, sigma).

    sigma^2 = log(1 + sd^2 / mean^2) and mu = log(mean) - sigma^2 / 2.
    """
    sigma2 = math.log1p((sd / mean) ** 2)
    return math.log(mean) - 0.5 * sigma2, math.sqrt(sigma2)


@dataclass(frozen=True)
class LifetimeDistribution:
    """Strictly positive lifetime law, time unit hours.

    Parameters by kind: exponential(rate), lognormal(mean, sd),
    gamma(shape, scale), deterministic(value).
    """

    kind: str
    rate: float | None = None
    mean: float | None = None
    sd: float | None = None
    shape: float | None = None
    scale: float | None = None
    value: float | None = None

    _required = {
        "exponential": ("rate",),
        "lognormal": ("mean", "sd"),
        "gamma": ("shape", "scale"),
        "deterministic": ("value",),
    }

    def __post_init__(self):
        if self.kind not in LIFETIME_KINDS:
            raise ValueError(f"unknown lifetime kind {self.kind!r}")
        names = ("rate", "mean", "sd", "shape", "scale", "value")
        needed = self._required[self.kind]
        for name in names:
            v = getattr(self, name)
            if name in needed:
                if v is None or not math.isfinite(v) or v <= 0:
                    raise ValueError(f"{self.kind}: {name} must be a positive real, got {v!r}")
            elif v is not None:
                raise ValueError(f"{self.kind}: unexpected parameter {name}")

    # constructors -------------------------------------------------------
    @classmethod
    def exponential(cls, rate: float) -> LifetimeDistribution:
        return cls("exponential", rate=float(rate))

    @classmethod
    def lognormal(cls, mean: float, sd: float) -> LifetimeDistribution:
        return cls("lognormal", mean=float(mean), sd=float(sd))

    @classmethod
    def gamma(cls, shape: float, scale: float) -> LifetimeDistribution:
        return cls("gamma", shape=float(shape), scale=float(scale))

    @classmethod
    def deterministic(cls, value: float) -> LifetimeDistribution:
        return cls("deterministic", value=float(value))

    @classmethod
    def from_dict(cls, d: dict) -> LifetimeDistribution:
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in LIFETIME_KINDS:
            raise ValueError(f"unknown lifetime kind {kind!r}")
        extra = set(d) - set(cls._required[kind])
        if extra:
            raise ValueError(f"{kind}: unknown keys {sorted(extra)}")
        return cls(kind, **{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in self._required[self.kind]:
            out[name] = getattr(self, name)
        return out

    # properties ---------------------------------------------------------
    @property
    def is_lattice(self) -> bool:
        return self.kind == "deterministic"

    @cached_property
    def _log_params(self) -> tuple[float, float]:
        return lognormal_log_params(self.mean, self.sd)

    def expected(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "lognormal":
            return self.mean
        if self.kind == "gamma":
            return self.shape * self.scale
        return self.value

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        if self.kind == "exponential":
            out = -np.expm1(-self.rate * tp)
        elif self.kind == "lognormal":
            mu, sigma = self._log_params
            with np.errstate(divide="ignore"):
                z = (np.log(tp) - mu) / sigma
            out = special.ndtr(z)
        elif self.kind == "gamma":
            out = special.gammainc(self.shape, tp / self.scale)
        else:
            out = (t >= self.value).astype(float)
        out = np.where(t <= 0, 0.0, out)
        return out if out.ndim else float(out)

    def pdf(self, t):
        """Density on (0, inf); undefined for deterministic lifetimes."""
        t = np.asarray(t, dtype=float)
        if self.kind == "exponential":
            out = np.where(t > 0, self.rate * np.exp(-self.rate * np.maximum(t, 0)), 0.0)
        elif self.kind == "lognormal":
            mu, sigma = self._log_params
            ts = np.where(t > 0, t, 1.0)
            out = np.exp(-0.5 * ((np.log(ts) - mu) / sigma) ** 2) / (ts * sigma * math.sqrt(2 * math.pi))
            out = np.where(t > 0, out, 0.0)
        elif self.kind == "gamma":
            ts = np.where(t > 0, t, 1.0)
            logp = ((self.shape - 1) * np.log(ts) - ts / self.scale
                    - special.gammaln(self.shape) - self.shape * math.log(self.scale))
            out = np.where(t > 0, np.exp(logp), 0.0)
        else:
            raise ValueError("deterministic lifetime has no density")
        return out if out.ndim else float(out)

    def quantile(self, q: float) -> float:
        if self.kind == "exponential":
            return -math.log1p(-q) / self.rate
        if self.kind == "lognormal":
            mu, sigma = self._log_params
            return math.exp(mu + sigma * float(special.ndtri(q)))
        if self.kind == "gamma":
            return float(special.gammaincinv(self.shape, q)) * self.scale
        return self.value

    def median(self) -> float:
        return self.quantile(0.5)

    def sample(self, gen: np.random.Generator, size=None):
        if self.kind == "exponential":
            return gen.exponential(1.0 / self.rate, size)
        if self.kind == "lognormal":
            mu, sigma = self._log_params
            return gen.lognormal(mu, sigma, size)
        if self.kind == "gamma":
            return gen.gamma(self.shape, self.scale, size)
        if size is None:
            return self.value
        return np.full(size, self.value)


# Laplace functionals ------------------------------------------------------

def _quad(dist: LifetimeDistribution, g) -> float:
    """E g(L) for a lognormal L by adaptive Gauss-Kronrod, truncated at Q(1 - TAIL_MASS).

    Integrates in log-time, u = exp(mu + sigma x), where the integrand is a
    Gaussian times g; on the raw time axis skewed laws (sd >> mean) put the
    bulk of the mass in a sliver of a very long interval.
    """
    mu, sigma = dist._log_params
    upper = float(special.ndtri(1.0 - TAIL_MASS))
    norm = 1.0 / math.sqrt(2 * math.pi)

    def integrand(x):
        return norm * math.exp(-0.5 * x * x) * g(math.exp(mu + sigma * x))

    total, err = 0.0, 0.0
    # split at the median; below x = -40 the Gaussian weight is < 1e-340
    for a, b in ((-40.0, 0.0), (0.0, upper)):
        val, e, info, *msg = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=QUAD_RTOL,
                                            limit=500, full_output=1)
        if msg:
            raise QuadratureError(f"quadrature did not converge for {dist}: {msg[0]}")
        total += val
        err += e
    if not err <= max(QUAD_RTOL * abs(total), 1e-300) * 10:
        raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds tolerance for {dist}")
    return total


def laplace(dist: LifetimeDistribution, s: float) -> float:
    """E(exp(-s L))."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0:
        return 1.0
    if dist.kind == "exponential":
        return dist.rate / (dist.rate + s)
    if dist.kind == "deterministic":
        return math.exp(-s * dist.value)
    if dist.kind == "gamma":
        return (1.0 + s * dist.scale) ** (-dist.shape)
    return _quad(dist, lambda u: math.exp(-s * u))


def laplace_weighted(dist: LifetimeDistribution, s: float) -> float:
    """E(L exp(-s L)), the negative derivative of :func:`laplace` in s."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if dist.kind == "exponential":
        return dist.rate / (dist.rate + s) ** 2
    if dist.kind == "deterministic":
        return dist.value * math.exp(-s * dist.value)
    if dist.kind == "gamma":
        return dist.shape * dist.scale * (1.0 + s * dist.scale) ** (-dist.shape - 1)
    if s == 0:
        return dist.expected()
    return _quad(dist, lambda u: u * math.exp(-s * u))


def lifetime_cdf(dist: LifetimeDistribution, t: float) -> float:
    return dist.cdf(t)


# Offspring ---------------------------------------------------------------

@dataclass(frozen=True)
class OffspringDistribution:
    """Finite-support offspring pmf.

    ``support`` holds nonnegative ints (scalar law) or pairs of ints
    ``(n_type1, n_type2)`` for type-1 cells of a two-type process.
    """

    support: tuple
    probs: tuple[float, ...]
    cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        support = tuple(tuple(int(x) for x in s) if isinstance(s, (tuple, list)) else int(s)
                        for s in self.support)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        if not support or len(support) != len(probs):
            raise ValueError("support and probs must be nonempty and of equal length")
        if len(support) > MAX_OFFSPRING_OUTCOMES:
            raise ValueError(f"offspring support capped at {MAX_OFFSPRING_OUTCOMES} outcomes")
        if len(set(support)) != len(support):
            raise ValueError("support entries must be distinct")
        kinds = {isinstance(s, tuple) for s in support}
        if len(kinds) != 1:
            raise ValueError("support mixes scalar and pair outcomes")
        if self.is_pair and any(len(s) != 2 for s in support):
            raise ValueError("pair outcomes must have exactly two coordinates")
        flat = [x for s in support for x in (s if isinstance(s, tuple) else (s,))]
        if any(x < 0 for x in flat):
            raise ValueError("offspring counts must be nonnegative")
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        object.__setattr__(self, "cumulative", cum)

    @property
    def is_pair(self) -> bool:
        return isinstance(self.support[0], tuple)

    @classmethod
    def from_mapping(cls, pmf: dict) -> OffspringDistribution:
        return cls(tuple(pmf), tuple(pmf.values()))

    @classmethod
    def binomial_split(cls, total: OffspringDistribution, p_type2: float) -> OffspringDistribution:
        """Joint (type-1, type-2) law when each child is type-2 independently w.p. ``p_type2``."""
        if total.is_pair:
            raise ValueError("total-offspring law must be scalar")
        if not 0.0 <= p_type2 <= 1.0:
            raise ValueError("p_type2 must lie in [0, 1]")
        joint: dict[tuple[int, int], float] = {}
        for n, pn in zip(total.support, total.probs):
            for k in range(n + 1):
                w = pn * math.comb(n, k) * p_type2**k * (1 - p_type2) ** (n - k)
                if w > 0:
                    joint[(n - k, k)] = joint.get((n - k, k), 0.0) + w
        keys = sorted(joint)
        ps = [joint[k] for k in keys]
        s = math.fsum(ps)
        return cls(tuple(keys), tuple(p / s for p in ps))

    def to_dict(self) -> dict:
        return {"support": [list(s) if isinstance(s, tuple) else s for s in self.support],
                "probs": list(self.probs)}

    def marginal(self, coord: int) -> OffspringDistribution:
        """Scalar law of one coordinate of a pair-valued law."""
        if not self.is_pair:
            raise ValueError("marginal requires a pair-valued law")
        acc: dict[int, float] = {}
        for s, p in zip(self.support, self.probs):
            acc[s[coord]] = acc.get(s[coord], 0.0) + p
        keys = sorted(acc)
        return OffspringDistribution(tuple(keys), tuple(acc[k] for k in keys))

    def moments(self) -> tuple[float, float]:
        """(h, v) = (E N, E N(N-1)) for scalar laws; (h1, h2) means for pair laws."""
        if self.is_pair:
            h1 = math.fsum(p * s[0] for s, p in zip(self.support, self.probs))
            h2 = math.fsum(p * s[1] for s, p in zip(self.support, self.probs))
            return h1, h2
        h = math.fsum(p * s for s, p in zip(self.support, self.probs))
        v = math.fsum(p * s * (s - 1) for s, p in zip(self.support, self.probs))
        return h, v

    def draw(self, u: float):
        """Map a uniform draw in [0, 1) to an outcome."""
        return self.support[int(np.searchsorted(self.cumulative, u, side="right"))]

    @property
    def p_zero(self) -> float:
        zero = (0, 0) if self.is_pair else 0
        return sum(p for s, p in zip(self.support, self.probs) if s == zero)


def offspring_moments(dist: OffspringDistribution) -> tuple[float, float]:
    return dist.moments()


# Random streams ------------------------------------------------------------

class RngStream:
    """Reproducible random stream keyed by (master_seed, stream_index).

    Streams are derived with ``SeedSequence(master_seed, spawn_key=(index,))``
    so distinct keys give independent PCG64 streams and equal keys replay
    bit-for-bit. Label-loss draws come from a separate child stream, so the
    population dynamics of a replicate do not depend on p.
    """

    def __init__(self, master_seed: int, stream_index: int = 0):
        if not 0 <= master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if stream_index < 0:
            raise ValueError("stream_index must be nonnegative")
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        self.generator = np.random.Generator(np.random.PCG64(ss))
        label_ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, 0))
        self.label_generator = np.random.Generator(np.random.PCG64(label_ss))

    def __repr__(self):
        return f"RngStream({self.master_seed}, {self.stream_index})"

    def uniform(self, size=None):
        return self.generator.random(size)


def sample_lifetime(dist: LifetimeDistribution, rng: RngStream) -> float:
    return float(dist.sample(rng.generator))


def sample_offspring(dist: OffspringDistribution, rng: RngStream):
    return dist.draw(rng.generator.random())
