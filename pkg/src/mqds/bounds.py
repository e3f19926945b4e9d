"""Finite-sample bounds: Chernoff interval, Chernoff tail, sampling without replacement."""

from __future__ import annotations

import math


class ChernoffCounter:
    """Tally of Chernoff-interval evaluations charged to eps1."""

    def __init__(self):
        self.applications = 0

    def upper(self, a: float, eps1: float) -> float:
        self.applications += 1
        return chernoff_upper(a, eps1)

    def lower(self, a: float, eps1: float) -> float:
        self.applications += 1
        return chernoff_lower(a, eps1)


def _beta(eps1: float) -> float:
    if not 0 < eps1 < 1:
        raise ValueError(f"eps1 must lie in (0, 1), got {eps1}")
    return math.log(1 / eps1)


def chernoff_upper(a: float, eps1: float) -> float:
    """Upper bound on the expectation of a count observed as ``a``."""
    if a < 0:
        raise ValueError("observed count must be nonnegative")
    beta = _beta(eps1)
    return a + beta + math.sqrt(2 * beta * a + beta**2)


def chernoff_lower(a: float, eps1: float) -> float:
    """Lower bound on the expectation of a count observed as ``a``, clamped at 0."""
    if a < 0:
        raise ValueError("observed count must be nonnegative")
    beta = _beta(eps1)
    return max(0.0, a - beta / 2 - math.sqrt(2 * beta * a + beta**2 / 4))


def chernoff_tail(expected_rate: float, threshold: float, trials: float) -> float:
    """exp(-(E - T)^2 n / 2E); 1 when the threshold is not below the expected rate."""
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    if threshold >= expected_rate or expected_rate <= 0:
        return 1.0
    gap = expected_rate - threshold
    return math.exp(-(gap**2) * trials / (2 * expected_rate))


def sampling_without_replacement_bound(
    population: float, sample: float, observed_rate: float, eps2: float
) -> float:
    """Deviation gamma of the unsampled rate above the sampled one, failure prob eps2.

    Serfling-type inequality for a sample of ``sample`` items drawn without
    replacement from ``population``:

        P(rate_rest >= rate_sample + gamma) <= exp(-2 gamma^2 k^2 (n - k) / (n (k + 1)))

    The bound does not depend on the observed rate; the argument is kept so
    a variance-sensitive inequality can be dropped in.
    """
    n, k = population, sample
    if not 0 < k < n:
        raise ValueError(f"need 0 < sample < population, got {k} and {n}")
    if not 0 < eps2 <= 1:
        raise ValueError("eps2 must lie in (0, 1]")
    return math.sqrt(math.log(1 / eps2) * n * (k + 1) / (2 * k**2 * (n - k)))


def sampling_tail(population: float, sample: float, gamma: float) -> float:
    """Failure probability of ``sampling_without_replacement_bound`` at deviation gamma."""
    n, k = population, sample
    if not 0 < k < n:
        raise ValueError(f"need 0 < sample < population, got {k} and {n}")
    if gamma <= 0:
        return 1.0
    return math.exp(-2 * gamma**2 * k**2 * (n - k) / (n * (k + 1)))
