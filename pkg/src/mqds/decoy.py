"""Two-decoy estimates of single-photon and k-photon conclusive events.

All observed counts are first turned into bounds on their expectations
with the Chernoff interval; each such evaluation is charged to eps1
through a :class:`ChernoffCounter`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .bounds import ChernoffCounter
from .channel import ChannelStats, Counts


class InsufficientStatistics(ValueError):
    """A decoy bound came out nonpositive; more pulses are needed."""


@dataclass(frozen=True)
class DecoyInputs:
    mu: float
    nu: float
    p_mu: float
    p_nu: float
    p_0: float
    counts: dict[str, dict[str, Counts]]  # recipient -> intensity label -> counts

    def __post_init__(self):
        if not self.mu > self.nu > 0:
            raise ValueError(f"decoy ordering requires mu > nu > 0, got {self.mu}, {self.nu}")
        if min(self.p_mu, self.p_nu, self.p_0) <= 0:
            raise ValueError("intensity probabilities must be positive")
        if not math.isclose(self.p_mu + self.p_nu + self.p_0, 1.0, abs_tol=1e-9):
            raise ValueError("intensity probabilities must sum to 1")
        for per in self.counts.values():
            for c in per.values():
                if min(c.n, c.n_c, c.m_c) < 0:
                    raise ValueError("counts must be nonnegative")

    @classmethod
    def from_stats(cls, params, stats: ChannelStats) -> "DecoyInputs":
        return cls(params.mu, params.nu, params.p_mu, params.p_nu, params.p_0, stats.counts)


@dataclass
class KPhotonEstimate:
    k: int
    s1_conclusive: float  # lower bound, Charlie's conclusive single-photon events
    t1_error: float  # upper bound, Charlie's conclusive single-photon errors
    s1_bounds: dict[str, tuple[float, float]]  # Q -> (lower, upper) single-photon events
    s_Ck_conclusive: float
    t_Ck_error: float
    sufficient: bool = True
    reason: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def e_b(self) -> float:
        if self.s_Ck_conclusive <= 0:
            return math.nan
        return self.t_Ck_error / self.s_Ck_conclusive


def omega(M: int) -> tuple[str, ...]:
    """Recipients whose single-photon fraction enters the k-photon product."""
    return {3: ("B",), 4: ("B", "D"), 5: ("B", "D", "E")}[M]


def _counter(counter: ChernoffCounter | None) -> ChernoffCounter:
    return ChernoffCounter() if counter is None else counter


def s1_conclusive_lower(
    inp: DecoyInputs, eps1: float, recipient: str = "C", counter: ChernoffCounter | None = None
) -> float:
    """Lower bound on conclusive single-photon events in the recipient's mu string."""
    cnt = _counter(counter)
    c = inp.counts[recipient]
    mu, nu = inp.mu, inp.nu
    n_nu = cnt.lower(c["nu"].n_c, eps1)
    n_mu = cnt.upper(c["mu"].n_c, eps1)
    n_0 = cnt.upper(c["vacuum"].n_c, eps1)  # enters with a negative sign
    pref = inp.p_mu * math.exp(-mu) / (nu * (mu - nu))
    val = pref * (
        mu**2 * math.exp(nu) * n_nu / inp.p_nu
        - nu**2 * math.exp(mu) * n_mu / inp.p_mu
        + (nu**2 - mu**2) * n_0 / inp.p_0
    )
    return max(0.0, val)


def s1_total_bounds(
    inp: DecoyInputs, eps1: float, recipient: str, counter: ChernoffCounter | None = None
) -> tuple[float, float, dict[str, float]]:
    """(lower, upper) single-photon events in the recipient's mu string.

    The third element holds the starred click counts the caller reuses in
    the k-photon product.
    """
    cnt = _counter(counter)
    c = inp.counts[recipient]
    mu, nu = inp.mu, inp.nu
    n_nu_lo = cnt.lower(c["nu"].n, eps1)
    n_mu_hi = cnt.upper(c["mu"].n, eps1)
    n_0_hi = cnt.upper(c["vacuum"].n, eps1)  # negative sign in the lower bound
    pref = inp.p_mu * math.exp(-mu) / (nu * (mu - nu))
    lower = pref * (
        mu**2 * math.exp(nu) * n_nu_lo / inp.p_nu
        - nu**2 * math.exp(mu) * n_mu_hi / inp.p_mu
        + (nu**2 - mu**2) * n_0_hi / inp.p_0
    )
    n_nu_hi = cnt.upper(c["nu"].n, eps1)
    n_0_lo = cnt.lower(c["vacuum"].n, eps1)
    upper = inp.p_mu * mu * math.exp(-mu) / nu * (
        math.exp(nu) * n_nu_hi / inp.p_nu - n_0_lo / inp.p_0
    )
    starred = {"n_mu_upper": n_mu_hi}
    return max(0.0, lower), max(0.0, upper), starred


def t1_error_upper(
    inp: DecoyInputs, eps1: float, recipient: str = "C", counter: ChernoffCounter | None = None
) -> float:
    """Upper bound on conclusive single-photon errors in the recipient's mu string.

    Vacuum conclusive results are random, so half of them count as errors.
    """
    cnt = _counter(counter)
    c = inp.counts[recipient]
    m_nu = cnt.upper(c["nu"].m_c, eps1)
    n_0 = cnt.lower(c["vacuum"].n_c, eps1)
    val = inp.p_mu * inp.mu * math.exp(-inp.mu) / inp.nu * (
        math.exp(inp.nu) * m_nu / inp.p_nu - n_0 / (2 * inp.p_0)
    )
    return max(0.0, val)


def k_photon_estimate(
    inp: DecoyInputs, M: int, eps1: float, counter: ChernoffCounter | None = None
) -> KPhotonEstimate:
    """Bounds on Charlie's conclusive events where every recipient got one photon.

    ``sufficient`` is False when a lower bound collapses to zero, in which
    case ``e_b`` is meaningless.
    """
    if M not in (3, 4, 5):
        raise ValueError(f"party count must be 3, 4 or 5, got {M}")
    cnt = _counter(counter)
    s1c = s1_conclusive_lower(inp, eps1, "C", cnt)
    t1c = t1_error_upper(inp, eps1, "C", cnt)
    s_ck, t_ck = s1c, t1c
    s1_bounds = {}
    ok, reason = s1c > 0, "" if s1c > 0 else "conclusive single-photon bound is zero"
    for q in omega(M):
        lo, hi, starred = s1_total_bounds(inp, eps1, q, cnt)
        n_mu_lo = cnt.lower(inp.counts[q]["mu"].n, eps1)
        s1_bounds[q] = (lo, hi)
        if lo <= 0 or n_mu_lo <= 0:
            ok, reason = False, f"single-photon bound for {q} is zero"
            s_ck, t_ck = 0.0, math.inf
            continue
        s_ck *= lo / starred["n_mu_upper"]
        t_ck *= hi / n_mu_lo
    if not ok:
        s_ck = 0.0
    return KPhotonEstimate(M - 1, s1c, t1c, s1_bounds, s_ck, t_ck, ok, reason)
