import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhgen.distributions import (
    LifetimeDistribution,
    OffspringDistribution,
    RngStream,
    laplace,
    laplace_weighted,
    lifetime_cdf,
    lognormal_log_params,
    offspring_moments,
    sample_lifetime,
    sample_offspring,
)

B_CELL = LifetimeDistribution.lognormal(9.3, 2.54)
PAIR_LAW = OffspringDistribution.from_mapping({(2, 0): 25 / 36, (1, 1): 10 / 36, (0, 2): 1 / 36})

lifetimes = st.one_of(
    st.builds(LifetimeDistribution.exponential, st.floats(0.05, 5.0)),
    st.builds(LifetimeDistribution.lognormal, st.floats(1.0, 20.0), st.floats(0.2, 6.0)),
    st.builds(LifetimeDistribution.gamma, st.floats(0.8, 10.0), st.floats(0.2, 4.0)),
)


# --- sampling -------------------------------------------------------------

def test_deterministic_sample_is_point_mass():
    rng = RngStream(3)
    assert all(sample_lifetime(LifetimeDistribution.deterministic(9.3), rng) == 9.3 for _ in range(10))


def test_exponential_sample_mean():
    x = LifetimeDistribution.exponential(1.0).sample(RngStream(1).generator, 10**6)
    assert abs(x.mean() - 1.0) <= 0.01
    assert x.min() > 0


def test_lognormal_sample_mean_matches_bcell_fit():
    x = B_CELL.sample(RngStream(2).generator, 10**6)
    assert abs(x.mean() - 9.3) <= 0.05
    assert abs(x.std() - 2.54) <= 0.02


def test_lognormal_log_params_roundtrip():
    mu, sigma = lognormal_log_params(9.3, 2.54)
    assert math.isclose(math.exp(mu + sigma**2 / 2), 9.3, rel_tol=1e-14)
    var = (math.exp(sigma**2) - 1) * math.exp(2 * mu + sigma**2)
    assert math.isclose(math.sqrt(var), 2.54, rel_tol=1e-13)


# --- cdf ------------------------------------------------------------------

@pytest.mark.parametrize("dist", [B_CELL, LifetimeDistribution.exponential(1.0),
                                  LifetimeDistribution.gamma(2.0, 3.0),
                                  LifetimeDistribution.deterministic(2.0)])
def test_cdf_zero_at_origin(dist):
    assert lifetime_cdf(dist, 0.0) == 0.0


def test_cdf_examples():
    assert math.isclose(lifetime_cdf(LifetimeDistribution.exponential(1.0), math.log(2)), 0.5, rel_tol=1e-15)
    d = LifetimeDistribution.deterministic(2.0)
    assert lifetime_cdf(d, 2.0) == 1.0
    assert lifetime_cdf(d, 2.0 - 1e-12) == 0.0


@given(lifetimes, st.lists(st.floats(0, 200), min_size=2, max_size=20))
def test_cdf_monotone_and_bounded(dist, ts):
    ts = sorted(ts)
    F = [lifetime_cdf(dist, t) for t in ts]
    assert all(0 <= f <= 1 for f in F)
    assert all(b >= a for a, b in zip(F, F[1:]))


@given(lifetimes)
def test_cdf_tends_to_one(dist):
    assert lifetime_cdf(dist, dist.quantile(1 - 1e-12) * 10) > 1 - 1e-9


# --- Laplace functionals --------------------------------------------------

def test_laplace_closed_forms():
    exp1 = LifetimeDistribution.exponential(1.0)
    assert laplace(exp1, 0.0) == 1.0
    assert laplace(B_CELL, 0.0) == 1.0
    assert laplace(exp1, 1.0) == 0.5
    assert math.isclose(laplace(LifetimeDistribution.deterministic(1.0), math.log(2)), 0.5, rel_tol=1e-15)
    assert laplace_weighted(exp1, 1.0) == pytest.approx(0.25, rel=1e-15)
    assert laplace_weighted(exp1, 0.0) == pytest.approx(1.0, rel=1e-15)
    d = LifetimeDistribution.deterministic(3.0)
    assert laplace_weighted(d, 0.2) == pytest.approx(3.0 * math.exp(-0.6), rel=1e-15)


def test_lognormal_laplace_against_simpson():
    # independent check: dense Simpson rule in log-time
    mu, sig = lognormal_log_params(9.3, 2.54)
    x = np.linspace(mu - 14 * sig, mu + 14 * sig, 200_001)
    phi = np.exp(-0.5 * ((x - mu) / sig) ** 2) / (sig * math.sqrt(2 * math.pi))
    w = np.ones_like(x)
    w[1:-1:2], w[2:-1:2] = 4, 2
    step = (x[1] - x[0]) / 3
    for s in (0.01, 0.05, 0.1, 0.5):
        f = phi * np.exp(-s * np.exp(x))
        assert laplace(B_CELL, s) == pytest.approx(float(np.dot(w, f) * step), rel=1e-10)
        assert laplace_weighted(B_CELL, s) == pytest.approx(float(np.dot(w, f * np.exp(x)) * step), rel=1e-10)


@given(st.floats(0.05, 5.0), st.floats(0.0, 10.0))
def test_exponential_laplace_closed_form(rate, frac):
    s = frac * rate
    assert abs(laplace(LifetimeDistribution.exponential(rate), s) - rate / (rate + s)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(lifetimes, st.floats(0.0, 1.0), st.floats(0.01, 1.0))
def test_laplace_strictly_decreasing(dist, s, ds):
    assert laplace(dist, s + ds) < laplace(dist, s)
    assert 0 < laplace(dist, s + ds) <= 1


@settings(max_examples=40, deadline=None)
@given(lifetimes, st.floats(0.01, 1.0))
def test_weighted_laplace_is_minus_derivative(dist, s):
    s = s / dist.expected()
    h = 1e-5
    fd = -(laplace(dist, s + h) - laplace(dist, s - h)) / (2 * h)
    assert fd == pytest.approx(laplace_weighted(dist, s), rel=1e-6)


# --- offspring ------------------------------------------------------------

def test_offspring_moments_examples():
    assert offspring_moments(OffspringDistribution.from_mapping({0: 0.2, 2: 0.8})) == pytest.approx((1.6, 1.6))
    assert offspring_moments(OffspringDistribution.from_mapping({2: 1.0})) == (2.0, 2.0)
    h1, h2 = offspring_moments(PAIR_LAW)
    assert h1 == pytest.approx(5 / 3, rel=1e-14)
    assert h2 == pytest.approx(1 / 3, rel=1e-14)


def test_binomial_split_matches_explicit_pair_law():
    split = OffspringDistribution.binomial_split(OffspringDistribution.from_mapping({2: 1.0}), 1 / 6)
    pmf = dict(zip(split.support, split.probs))
    for outcome, prob in zip(PAIR_LAW.support, PAIR_LAW.probs):
        assert pmf[outcome] == pytest.approx(prob, abs=1e-15)


def test_offspring_sampling_frequencies():
    rng = RngStream(5)
    law = OffspringDistribution.from_mapping({0: 0.2, 2: 0.8})
    draws = np.array([sample_offspring(law, rng) for _ in range(10**6)])
    assert abs(np.mean(draws == 0) - 0.2) <= 0.002
    pairs = np.array([sample_offspring(PAIR_LAW, rng) for _ in range(10**6)])
    assert abs(pairs[:, 1].mean() - 1 / 3) <= 0.002
    always = OffspringDistribution.from_mapping({2: 1.0})
    assert {sample_offspring(always, rng) for _ in range(100)} == {2}


@pytest.mark.parametrize("support,probs", [
    ((0, 2), (0.5, 0.6)),
    ((0, 0), (0.5, 0.5)),
    ((0, -1), (0.5, 0.5)),
    ((0, 2), (-0.1, 1.1)),
    (tuple(range(65)), tuple([1 / 65] * 65)),
])
def test_offspring_validation(support, probs):
    with pytest.raises(ValueError):
        OffspringDistribution(support, probs)


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8))
def test_offspring_weights_normalised(ws):
    probs = tuple(w / sum(ws) for w in ws)
    law = OffspringDistribution(tuple(range(len(ws))), probs)
    assert abs(sum(law.probs) - 1) <= 1e-12
    h, v = law.moments()
    assert v >= 0 and h >= 0


# --- RNG streams ----------------------------------------------------------

@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6))
def test_streams_reproduce(seed, idx):
    a = RngStream(seed, idx).generator.random(8)
    b = RngStream(seed, idx).generator.random(8)
    assert np.array_equal(a, b)


def test_distinct_streams_differ_and_look_independent():
    a = RngStream(42, 0).generator.random(10**5)
    b = RngStream(42, 1).generator.random(10**5)
    assert not np.array_equal(a[:10], b[:10])
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02
    assert not np.array_equal(RngStream(42, 0).label_generator.random(10), a[:10])
