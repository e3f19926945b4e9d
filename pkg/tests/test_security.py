import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqds.bounds import chernoff_lower, chernoff_upper
from mqds.security import (
    BudgetAuditError,
    binary_entropy,
    delta_cu_bound,
    forger_mismatch_rate,
    inverse_binary_entropy,
    phase_error_rate,
    repudiation_probability,
    robustness_probability,
    solve_repudiation_rate,
    total_security,
    _five_party_f,
    _repudiation_gap,
)

SQRT2 = math.sqrt(2)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-3)


@given(st.floats(0.0, 1.0))
def test_entropy_inverse_round_trip(y):
    p = inverse_binary_entropy(y)
    assert 0 <= p <= 0.5
    assert abs(binary_entropy(p) - y) < 1e-9


def test_phase_relation_anchors():
    assert abs(phase_error_rate(0.0, 3) - (4 - SQRT2) / 4) < 1e-12
    assert abs(phase_error_rate(0.0, 4) - 0.25) < 1e-12
    assert abs(phase_error_rate(0.0, 3, "corrected") - (2 - SQRT2) / 4) < 1e-12
    # five-party infimum at e_b = 0 is the x -> inf limit (4 - sqrt 2)/8
    assert phase_error_rate(0.0, 5) == pytest.approx((4 - SQRT2) / 8, abs=1e-7)


def test_phase_relation_slopes():
    assert phase_error_rate(0.1, 3) - phase_error_rate(0.0, 3) == pytest.approx(0.3 / (2 * SQRT2))
    assert phase_error_rate(0.1, 4) == pytest.approx(0.25 + 0.075)


def test_unknown_phase_relation():
    with pytest.raises(ValueError):
        phase_error_rate(0.0, 3, "guessed")
    with pytest.raises(ValueError):
        phase_error_rate(0.0, 6)


@pytest.mark.parametrize("e_b", [0.003, 0.02, 0.1, 0.3])
def test_five_party_matches_dense_grid(e_b):
    x = np.linspace(-5, 100, 1_000_001)
    brute = float(np.min(e_b * x + _five_party_f(x)))
    assert phase_error_rate(e_b, 5) <= brute + 1e-12
    assert phase_error_rate(e_b, 5) == pytest.approx(brute, abs=1e-8)


def test_five_party_relation_is_concave_and_increasing():
    e = np.linspace(0, 0.5, 51)
    v = np.array([phase_error_rate(x, 5) for x in e])
    assert np.all(np.diff(v) >= -1e-12)
    assert np.all(v[:-2] + v[2:] <= 2 * v[1:-1] + 1e-9)


def test_forger_rate():
    assert forger_mismatch_rate(0.0, 4) == pytest.approx(inverse_binary_entropy(1 - binary_entropy(0.25)))
    rates = [forger_mismatch_rate(e, 4) for e in (0.0, 0.05, 0.1)]
    assert rates == sorted(rates, reverse=True)
    # the nominal intercept leaves the three-party forger almost no mismatch
    assert forger_mismatch_rate(0.0, 3) < 0.01 < forger_mismatch_rate(0.0, 3, "corrected")


@settings(max_examples=300)
@given(
    st.floats(1e-3, 0.2),
    st.floats(0.8, 1.2),
    st.floats(0.005, 0.05),
    st.floats(0.005, 0.1),
    st.floats(4, 10),
    st.floats(0, 0.5),
)
def test_repudiation_root(P_B, ratio, T_a, gap, log_n, dfrac):
    T_v, n_cu = T_a + gap, 10**log_n
    delta = dfrac * gap * n_cu
    A = solve_repudiation_rate(P_B, P_B * ratio, T_a, T_v, delta, n_cu)
    assert A is not None
    assert P_B * T_a < A <= P_B * (T_v - delta / n_cu)
    assert abs(_repudiation_gap(A, P_B, P_B * ratio, T_a, T_v, delta / n_cu)) < 1e-9


def test_repudiation_empty_interval():
    assert solve_repudiation_rate(0.1, 0.1, 0.02, 0.03, 0.02 * 1e6, 1e6) is None
    assert repudiation_probability(0.1, 0.1, 0.02, 0.03, 0.02 * 1e6, 1e8, 1e6) == 1.0


def test_repudiation_probability_shrinks_with_n():
    p = [repudiation_probability(0.05, 0.05, 0.01, 0.02, 0.0, n, n) for n in (1e4, 3e4, 1e5)]
    assert 1 >= p[0] > p[1] > p[2] > 0


def test_robustness():
    assert robustness_probability(0.02, 0.01, 1e6, 0.3, 1e-10) == 1.0
    r = [robustness_probability(0.01, T, 1e6, 0.3, 1e-10) for T in (0.02, 0.021, 0.022)]
    assert r[0] > r[1] > r[2]


def test_delta_models():
    n, eps = 1e8, 1e-10
    d = delta_cu_bound(0.01, {"C": 0.01}, n, eps)
    assert d == pytest.approx(chernoff_upper(n * 0.01, eps) - chernoff_lower(n * 0.01, eps))
    p = delta_cu_bound(0.01, {"C": 0.01, "D": 0.02}, n, eps, "pattern")
    assert p == pytest.approx(chernoff_upper(n * (0.01 * 0.98 + 0.02 * 0.99), eps))
    with pytest.raises(ValueError):
        delta_cu_bound(0.01, {"C": 0.01}, n, eps, "other")


def test_budget_audit():
    b = total_security(4, 1e-11, 1e-11, 1e-12, 1e-12, 1e-12, 17)
    assert b.eps_tot == pytest.approx(18e-11 + 3e-12)
    with pytest.raises(BudgetAuditError):
        total_security(4, 1e-11, 1e-11, 0, 0, 0, 11)
