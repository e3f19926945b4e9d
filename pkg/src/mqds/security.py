"""Phase-error relations, forger information, and the forgery/repudiation/robustness terms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import brentq

from .bounds import chernoff_lower, chernoff_tail, chernoff_upper, sampling_tail, sampling_without_replacement_bound
from .params import CHERNOFF_COEFFICIENT

SOLVER_TOL = 1e-12
SQRT2 = math.sqrt(2.0)


class BudgetAuditError(AssertionError):
    """The number of Chernoff applications disagrees with the eps1 coefficient."""


@dataclass(frozen=True)
class SecurityBudget:
    M: int
    eps1: float
    eps2: float
    eps_rob: float
    eps_for: float
    eps_rep: float
    chernoff_applications: int

    @property
    def coefficient(self) -> int:
        return CHERNOFF_COEFFICIENT[self.M]

    @property
    def eps_tot(self) -> float:
        return self.coefficient * self.eps1 + self.eps2 + self.eps_rob + self.eps_for + self.eps_rep

    def as_dict(self) -> dict[str, float]:
        return {
            "eps1": self.eps1,
            "eps2": self.eps2,
            "eps_rob": self.eps_rob,
            "eps_for": self.eps_for,
            "eps_rep": self.eps_rep,
            "eps_tot": self.eps_tot,
            "chernoff_applications": self.chernoff_applications,
        }


@dataclass(frozen=True)
class Thresholds:
    T_a: float
    T_v_per_verifier: Mapping[str, float]
    n_cu: float
    n_cu_k: float

    @property
    def T_v(self) -> float:
        return min(self.T_v_per_verifier.values())

    @property
    def T_vk(self) -> float:
        """Threshold rescaled to the k-photon part, assuming every error sits there."""
        if self.n_cu_k <= 0:
            return math.inf
        return self.T_v * self.n_cu / self.n_cu_k


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def inverse_binary_entropy(y: float, tol: float = SOLVER_TOL) -> float:
    """The p in [0, 1/2] with h(p) = y, by bisection."""
    if not -1e-15 <= y <= 1 + 1e-15:
        raise ValueError(f"entropy value {y} outside [0, 1]")
    y = min(max(y, 0.0), 1.0)
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if binary_entropy(mid) < y:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _five_party_f(x):
    return (6 - 4 * x + np.sqrt(6 - 12 * SQRT2 * x + 16 * x**2)) / 12


# The radicand 16x^2 - 12 sqrt(2) x + 6 has negative discriminant, so every real x is
# admissible. For e_b -> 0 the infimum runs off to x -> inf; the grid reaches 1e6.
_X_GRID = np.concatenate([np.linspace(-2.0, 10.0, 500, endpoint=False), np.geomspace(10.0, 1e6, 500)])


def _golden_min(fn: Callable[[float], float], a: float, b: float, tol: float = 1e-12) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (a + b) / 2


def _five_party_phase_error(e_b: float) -> float:
    values = e_b * _X_GRID + _five_party_f(_X_GRID)
    i = int(np.argmin(values))  # argmin returns the first, i.e. smallest, x on ties
    lo, hi = _X_GRID[max(i - 1, 0)], _X_GRID[min(i + 1, len(_X_GRID) - 1)]
    fn = lambda x: e_b * x + float(_five_party_f(x))  # noqa: E731
    x = _golden_min(fn, float(lo), float(hi))
    return min(fn(x), float(values[i]))


# Two-photon intercept of the three-party relation. The value (4 - sqrt 2)/4 exceeds 1/2
# and breaks the ordering of the k = 2, 3, 4 intercepts; (2 - sqrt 2)/4 = sin^2(pi/8)
# restores it and is what the analytic pipeline uses unless told otherwise.
NOMINAL_TWO_PHOTON_INTERCEPT = (4 - SQRT2) / 4
CORRECTED_TWO_PHOTON_INTERCEPT = (2 - SQRT2) / 4
PHASE_RELATIONS = ("nominal", "corrected")


def phase_error_rate(e_b: float, M: int, relation: str = "nominal") -> float:
    """Phase error rate of the (M-1)-photon component given its bit error rate.

    ``relation`` only affects M = 3: "nominal" uses the intercept
    (4 - sqrt 2)/4, "corrected" uses (2 - sqrt 2)/4.
    """
    if relation not in PHASE_RELATIONS:
        raise ValueError(f"unknown phase relation {relation!r}")
    if M == 3:
        icpt = NOMINAL_TWO_PHOTON_INTERCEPT if relation == "nominal" else CORRECTED_TWO_PHOTON_INTERCEPT
        e_p = icpt + 3 / (2 * SQRT2) * e_b
    elif M == 4:
        e_p = 0.25 + 0.75 * e_b
    elif M == 5:
        e_p = _five_party_phase_error(e_b)
    else:
        raise ValueError(f"party count must be 3, 4 or 5, got {M}")
    return min(max(e_p, 0.0), 1.0)


def forger_information(e_p: float, e_b: float) -> float:
    """Authenticator's information on a verifier's k-photon bits, H(e_p | e_b).

    Taken as the binary entropy of the phase error rate: the conditional
    entropy reduces to this when the bit error pattern carries no
    information on the phase errors.
    """
    return binary_entropy(e_p)


def forger_mismatch_rate(e_b: float, M: int, relation: str = "nominal") -> float:
    """Minimum expected mismatch E between a forged string and a verifier's k-photon bits."""
    if not 0 <= e_b <= 0.5:
        raise ValueError(f"bit error rate {e_b} outside [0, 1/2]")
    e_p = phase_error_rate(e_b, M, relation)
    return inverse_binary_entropy(1 - forger_information(e_p, e_b))


def forgery_probability(E_BFk: float, T_vk: float, n_cu_k: float) -> float:
    return chernoff_tail(E_BFk, T_vk, n_cu_k)


def _repudiation_gap(A, P_B, P_C, T_a, T_v, delta_rate):
    x = delta_rate + A / P_B
    lhs = (P_C * T_v - P_C * x) ** 2 / (3 * P_C * x)
    rhs = (A - P_B * T_a) ** 2 / (2 * A)
    return lhs - rhs


def solve_repudiation_rate(
    P_B: float, P_C: float, T_a: float, T_v: float, delta_cu: float, n_cu: float
) -> float | None:
    """Root A of the balance between Bob's acceptance and a verifier's rejection.

    Returns None when the admissible interval is empty. The gap is positive
    at the left end and negative at the right; the leftmost sign change on
    a scan grid is refined with Brent's method.
    """
    delta_rate = delta_cu / n_cu if n_cu > 0 else math.inf
    lo, hi = P_B * T_a, P_B * (T_v - delta_rate)
    if not hi > lo:
        return None
    args = (P_B, P_C, T_a, T_v, delta_rate)
    grid = np.linspace(lo, hi, 65)[1:-1]
    gaps = _repudiation_gap(grid, *args)
    neg = np.nonzero(gaps < 0)[0]
    if len(neg):
        j = neg[0]
        a = grid[j - 1] if j > 0 else lo
        b = grid[j]
    else:
        a, b = grid[-1], hi
    fa, fb = _repudiation_gap(a, *args), _repudiation_gap(b, *args)
    if fb == 0:
        return float(b)
    if fa * fb > 0:  # no sign change on the grid; the right end is the supremum
        return float(b)
    return brentq(_repudiation_gap, a, b, args=args, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def repudiation_probability(
    P_B: float,
    P_C: float,
    T_a: float,
    T_v: float,
    delta_cu: float,
    n_u: float,
    n_cu: float,
) -> float:
    """Probability Alice gets Bob to accept while the verifiers reject."""
    A = solve_repudiation_rate(P_B, P_C, T_a, T_v, delta_cu, n_cu)
    if A is None:
        return 1.0
    return math.exp(-((A - P_B * T_a) ** 2) * n_u / (2 * A))


def upper_tail(expected_rate: float, threshold: float, trials: float) -> float:
    """Multiplicative Chernoff bound on a binomial rate reaching ``threshold`` from below."""
    if threshold <= expected_rate:
        return 1.0
    gap = threshold - expected_rate
    return math.exp(-(gap**2) * trials / (expected_rate + threshold))


def robustness_probability(
    E_expected: float, T_a: float, n_c: float, t: float, eps2: float
) -> float:
    """Probability that honest data push Bob's untested mismatch rate above T_a.

    The untested rate exceeds the test rate by more than the sampling
    deviation with probability eps2 (charged separately); what remains is
    the test rate itself drifting up to T_a minus that deviation.
    """
    if E_expected >= T_a or n_c <= 0:
        return 1.0
    k = t * n_c
    if not 0 < k < n_c:
        return 1.0
    gamma = sampling_without_replacement_bound(n_c, k, E_expected, eps2)
    return upper_tail(E_expected, T_a - gamma, k)


def robustness_exact_sampling(E_expected: float, T_a: float, n_c: float, t: float) -> float:
    """Sampling-only variant: tail of the untested rate exceeding T_a given test rate E."""
    k = t * n_c
    return sampling_tail(n_c, k, T_a - E_expected)


def delta_cu_bound(
    e_B: float, e_verifiers: Mapping[str, float], n_cu: float, eps1: float, model: str = "difference"
) -> float:
    """Bound on how many more untested conclusive errors a verifier can see than Bob.

    "difference": upper Chernoff bound on the verifier's error count minus
    the lower bound on Bob's, i.e. channel noise alone. "pattern": Chernoff
    upper bound on the number of positions whose error indicators differ,
    with independent errors, e_B (1 - e_V) + e_V (1 - e_B) per position.
    The worst verifier sets the bound.
    """
    worst = 0.0
    for e_V in e_verifiers.values():
        if model == "difference":
            if e_V == 0 and e_B == 0:
                continue
            d = chernoff_upper(n_cu * e_V, eps1) - chernoff_lower(n_cu * e_B, eps1)
        elif model == "pattern":
            expected = n_cu * (e_B * (1 - e_V) + e_V * (1 - e_B))
            d = chernoff_upper(expected, eps1) if expected > 0 else 0.0
        else:
            raise ValueError(f"unknown Hamming-distance model {model!r}")
        worst = max(worst, d)
    return worst


def total_security(
    M: int,
    eps1: float,
    eps2: float,
    eps_rob: float,
    eps_for: float,
    eps_rep: float,
    chernoff_applications: int | None = None,
) -> SecurityBudget:
    coeff = CHERNOFF_COEFFICIENT[M]
    if chernoff_applications is None:
        chernoff_applications = coeff
    if chernoff_applications != coeff:
        raise BudgetAuditError(
            f"{chernoff_applications} Chernoff applications for M={M}, expected {coeff}"
        )
    return SecurityBudget(M, eps1, eps2, eps_rob, eps_for, eps_rep, chernoff_applications)
