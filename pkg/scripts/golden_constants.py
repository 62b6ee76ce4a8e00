"""Independent oracle for the lognormal(9.3, 2.54) constants.

Composite Simpson rule with 10^6 panels in log-time (no adaptive quadrature,
no scipy), bisection to machine precision. The printed values are frozen
into tests/test_calibration.py.
"""

import math

import numpy as np

MEAN, SD, H, V = 9.3, 2.54, 1.6, 1.6
N_PANELS = 10**6


def log_params(mean, sd):
    s2 = math.log(1.0 + (sd / mean) ** 2)
    return math.log(mean) - s2 / 2, math.sqrt(s2)


def moments(s, k=0):
    """E(L^k e^{-sL}) with L lognormal, integrating over x = log L."""
    mu, sig = log_params(MEAN, SD)
    x = np.linspace(mu - 14 * sig, mu + 14 * sig, 2 * N_PANELS + 1)
    phi = np.exp(-0.5 * ((x - mu) / sig) ** 2) / (sig * math.sqrt(2 * math.pi))
    L = np.exp(x)
    f = phi * L**k * np.exp(-s * L)
    w = np.ones_like(x)
    w[1:-1:2], w[2:-1:2] = 4, 2
    return float(np.dot(w, f) * (x[1] - x[0]) / 3)


def malthus():
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if H * moments(mid) > 1:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-17:
            break
    return 0.5 * (lo + hi)


if __name__ == "__main__":
    a = malthus()
    w = moments(a, 1)
    lap2 = moments(2 * a)
    print(f"alpha       = {a!r}")
    print(f"alpha_prime = {1 / (H * H * w)!r}")
    print(f"c           = {(H - 1) / (H * H * a * w)!r}")
    print(f"k           = {V * lap2 / (1 - H * lap2)!r}")
