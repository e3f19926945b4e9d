import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mqds.bounds import (
    ChernoffCounter,
    chernoff_lower,
    chernoff_tail,
    chernoff_upper,
    sampling_tail,
    sampling_without_replacement_bound,
)


def test_chernoff_closed_form():
    beta = math.log(1e10)
    a = 1000.0
    assert chernoff_upper(a, 1e-10) == pytest.approx(a + beta + math.sqrt(2 * beta * a + beta**2))
    assert chernoff_lower(a, 1e-10) == pytest.approx(a - beta / 2 - math.sqrt(2 * beta * a + beta**2 / 4))


def test_chernoff_lower_clamps_at_zero():
    assert chernoff_lower(3.0, 1e-10) == 0.0


@given(st.floats(0, 1e12), st.floats(1e-15, 0.5))
def test_chernoff_interval_contains_observation(a, eps):
    assert chernoff_lower(a, eps) <= a <= chernoff_upper(a, eps)


def test_chernoff_rejects_bad_input():
    with pytest.raises(ValueError):
        chernoff_upper(-1.0, 0.1)
    with pytest.raises(ValueError):
        chernoff_upper(1.0, 1.5)


@pytest.mark.parametrize("mean", [3.0, 30.0, 300.0, 3e4])
def test_chernoff_coverage_against_poisson(mean):
    eps = 1e-3
    a = np.arange(0, int(stats.poisson.ppf(1 - 1e-13, mean)) + 1)
    pmf = stats.poisson.pmf(a, mean)
    upper_miss = pmf[[chernoff_upper(v, eps) < mean for v in a]].sum()
    lower_miss = pmf[[chernoff_lower(v, eps) > mean for v in a]].sum()
    assert upper_miss <= eps
    assert lower_miss <= eps


def test_counter_tallies_each_use():
    c = ChernoffCounter()
    c.upper(10.0, 0.01)
    c.lower(10.0, 0.01)
    c.lower(1.0, 0.01)
    assert c.applications == 3


def test_chernoff_tail():
    assert chernoff_tail(0.1, 0.2, 1000) == 1.0
    assert chernoff_tail(0.2, 0.1, 1000) == pytest.approx(math.exp(-0.01 * 1000 / 0.4))


@given(st.integers(100, 10**9), st.floats(0.05, 0.95), st.floats(1e-12, 0.5))
def test_sampling_tail_inverts_bound(n, frac, eps):
    k = max(1, int(n * frac))
    if k >= n:
        return
    g = sampling_without_replacement_bound(n, k, 0.0, eps)
    assert sampling_tail(n, k, g) == pytest.approx(eps, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(20, 300),
    st.floats(0.1, 0.9),
    st.floats(0.0, 1.0),
    st.sampled_from([0.2, 0.05, 1e-3]),
)
def test_sampling_bound_sound_against_hypergeometric(n, frac, err_frac, eps):
    k = min(max(1, int(n * frac)), n - 1)
    K = int(n * err_frac)
    g = sampling_without_replacement_bound(n, k, K / n, eps)
    x = np.arange(0, min(k, K) + 1)
    pmf = stats.hypergeom.pmf(x, n, K, k)
    fail = (K - x) / (n - k) >= x / k + g
    assert pmf[fail].sum() <= eps
