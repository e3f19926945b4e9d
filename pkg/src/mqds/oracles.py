"""Independent checks of the analytic machinery, run by ``mqds validate``.

Each oracle returns (passed, detail). Modules are accessed through their
namespace so that a patched implementation is what gets checked.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import stats

from . import bounds, channel, decoy, protocol, security
from .params import CHERNOFF_COEFFICIENT, ChannelParams, ProtocolParams

Oracle = Callable[[], tuple[bool, str]]


def encoding_conclusive_fraction() -> tuple[bool, str]:
    """Exact conclusive probability 1/6 over states, sets and bases, noiseless."""
    total = Fraction(0)
    for sent in protocol.STATES:
        for enc in protocol.sets_containing(sent):
            for basis in protocol.AXES:
                for out in protocol.STATES:
                    if out.axis is not basis:
                        continue
                    p = protocol.born_probability(sent, basis, out)
                    if protocol.classify_outcome(enc, out) is not protocol.LogicBit.INCONCLUSIVE:
                        total += p * Fraction(1, 6 * 4 * 3)
    return total == Fraction(1, 6), f"P(conclusive) = {total}"


def encoding_conclusive_correct() -> tuple[bool, str]:
    bad = 0
    for sent in protocol.STATES:
        for enc in protocol.sets_containing(sent):
            for out in protocol.STATES:
                bit = protocol.classify_outcome(enc, out)
                p = protocol.born_probability(sent, out.axis, out)
                if bit is not protocol.LogicBit.INCONCLUSIVE and p > 0 and bit != enc.bit_of(sent):
                    bad += 1
    return bad == 0, f"{bad} wrong conclusive outcomes"


def channel_closed_forms() -> tuple[bool, str]:
    """Click and error rates against hand-derived expressions."""
    worst = 0.0
    for lam, e, pd in itertools.product((0.0, 0.1, 0.5, 2.0), (0.0, 0.01, 0.1), (0.0, 1e-5)):
        ch = ChannelParams(10.0, e_mis=e, p_dark=pd)
        r = channel.pulse_rates(lam, ch)
        click = 1 - (1 - pd) ** 2 * math.exp(-lam * ch.eta_sys)
        worst = max(worst, abs(r.click - click))
        if pd == 0 and e == 0 and lam > 0:
            # only the basis of the partner state yields an antipode, half the time
            worst = max(worst, abs(r.conclusive / r.click - 1 / 6))
    single = 0.0
    for e in (0.0, 0.005, 0.05):
        # single photons, no dark counts: the own basis adds antipode clicks at rate e
        r = channel.pulse_rates(1e-7, ChannelParams(0.0, e_mis=e, p_dark=0.0))
        single = max(single, abs(r.error / r.conclusive - 2 * e / (1 + 2 * e)))
    return worst < 1e-12 and single < 1e-6, f"max deviation {worst:.2e}, single-photon error {single:.2e}"


def _mixture(rng, N, mu, nu, p_mu, p_nu, recipients):
    """Random photon-number yields and the exact expected counts they imply.

    Returns counts per recipient and intensity plus true single-photon values.
    """
    p0 = 1 - p_mu - p_nu
    nmax = 40
    n = np.arange(nmax)
    yields, true = {}, {}
    counts = {}
    for q in recipients:
        Y = np.concatenate([[rng.uniform(0, 1e-3)], rng.uniform(0, 1, nmax - 1)])
        Y = np.sort(Y)  # more photons, more clicks
        c = rng.uniform(0.05, 0.5, nmax)
        e = np.concatenate([[0.5], rng.uniform(0, 0.2, nmax - 1)])
        yields[q] = (Y, c, e)
        per = {}
        for label, lam, p in (("mu", mu, p_mu), ("nu", nu, p_nu), ("vacuum", 0.0, p0)):
            w = stats.poisson.pmf(n, lam) * N * p
            per[label] = channel.Counts(float(w @ Y), float(w @ (Y * c)), float(w @ (Y * c * e)))
        counts[q] = per
        w1 = N * p_mu * mu * math.exp(-mu)
        true[q] = {"s1": w1 * Y[1], "s1c": w1 * Y[1] * c[1], "t1c": w1 * Y[1] * c[1] * e[1]}
    return counts, true


def _sampled(rng, counts):
    out = {}
    for q, per in counts.items():
        out[q] = {}
        for label, c in per.items():
            n = rng.poisson(c.n)
            nc = rng.binomial(n, c.n_c / c.n) if c.n > 0 else 0
            mc = rng.binomial(nc, c.m_c / c.n_c) if c.n_c > 0 else 0
            out[q][label] = channel.Counts(float(n), float(nc), float(mc))
    return out


def decoy_soundness(instances: int = 100, seed: int = 7) -> tuple[bool, str]:
    """Single-photon bounds bracket the true values on random Poisson mixtures."""
    rng = np.random.default_rng(seed)
    eps1 = 1e-10
    violations = 0
    for _ in range(instances):
        mu = rng.uniform(0.2, 0.8)
        nu = rng.uniform(0.02, mu / 2)
        p_mu = rng.uniform(0.3, 0.7)
        p_nu = rng.uniform(0.1, 0.9 - p_mu)
        exp_counts, true = _mixture(rng, 10 ** rng.uniform(7, 10), mu, nu, p_mu, p_nu, ("B", "C", "D"))
        inp = decoy.DecoyInputs(mu, nu, p_mu, p_nu, 1 - p_mu - p_nu, _sampled(rng, exp_counts))
        s1c = decoy.s1_conclusive_lower(inp, eps1, "C")
        t1c = decoy.t1_error_upper(inp, eps1, "C")
        if s1c > true["C"]["s1c"] or t1c < true["C"]["t1c"]:
            violations += 1
        for q in ("B", "D"):
            lo, hi, _ = decoy.s1_total_bounds(inp, eps1, q)
            if not lo <= true[q]["s1"] <= hi:
                violations += 1
    return violations == 0, f"{violations} violations on {instances} instances"


def sampling_vs_hypergeometric() -> tuple[bool, str]:
    """Sampling-without-replacement deviation against exact hypergeometric tails."""
    worst = 0.0
    for n, k, K, eps in itertools.product((40, 100, 400), (0.2, 0.5), (0.05, 0.2, 0.5), (0.1, 1e-3)):
        kk = int(n * k)
        errs = int(n * K)
        gamma = bounds.sampling_without_replacement_bound(n, kk, K, eps)
        # test errors x ~ Hypergeom; rest rate (errs - x)/(n - kk) vs sample rate x/kk
        x = np.arange(0, min(kk, errs) + 1)
        pmf = stats.hypergeom.pmf(x, n, errs, kk)
        bad = (errs - x) / (n - kk) >= x / kk + gamma
        worst = max(worst, float(pmf[bad].sum()) / eps)
    return worst <= 1.0, f"max P(fail)/eps = {worst:.3f}"


def chernoff_coverage() -> tuple[bool, str]:
    """Chernoff interval misses a Poisson mean with probability at most eps1."""
    worst = 0.0
    for mean, eps in itertools.product((5.0, 50.0, 500.0, 5e4), (1e-2, 1e-4)):
        lo_q, hi_q = stats.poisson.ppf([1e-12, 1 - 1e-12], mean)
        a = np.arange(lo_q, hi_q + 1)
        pmf = stats.poisson.pmf(a, mean)
        miss = np.array([bounds.chernoff_upper(v, eps) < mean or bounds.chernoff_lower(v, eps) > mean for v in a])
        worst = max(worst, float(pmf[miss].sum()) / (2 * eps))
    return worst <= 1.0, f"max P(miss)/(2 eps1) = {worst:.3f}"


def entropy_inverse(instances: int = 1000, seed: int = 3) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = max(
        abs(security.binary_entropy(security.inverse_binary_entropy(y)) - y) for y in rng.uniform(0, 1, instances)
    )
    return worst < 1e-9, f"max residual {worst:.2e}"


def repudiation_residual(instances: int = 1000, seed: int = 4) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst, solved = 0.0, 0
    for _ in range(instances):
        P_B = rng.uniform(0.001, 0.2)
        P_C = P_B * rng.uniform(0.8, 1.2)
        T_a = rng.uniform(0.005, 0.05)
        T_v = T_a + rng.uniform(0.005, 0.1)
        n_cu = 10 ** rng.uniform(4, 10)
        delta = rng.uniform(0, 0.5) * (T_v - T_a) * n_cu
        A = security.solve_repudiation_rate(P_B, P_C, T_a, T_v, delta, n_cu)
        if A is None:
            continue
        solved += 1
        r = security._repudiation_gap(A, P_B, P_C, T_a, T_v, delta / n_cu)
        worst = max(worst, abs(r))
    return worst < 1e-9 and solved > 0, f"max residual {worst:.2e} over {solved} roots"


def five_party_grid() -> tuple[bool, str]:
    """Minimized five-party relation against a brute-force dense grid."""
    x = np.linspace(-5, 200, 2_000_001)
    f = security._five_party_f(x)
    worst = 0.0
    for e_b in (0.005, 0.01, 0.05, 0.1, 0.2, 0.4):
        brute = float(np.min(e_b * x + f))
        worst = max(worst, security.phase_error_rate(e_b, 5) - brute)
    return worst < 1e-9, f"max excess over grid {worst:.2e}"


def post_matching_roundtrip(trials: int = 200, seed: int = 5) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        ref = list(rng.integers(0, 6, rng.integers(1, 60)))
        target = [ref[i] for i in rng.permutation(len(ref))]
        order = protocol.matching_order(ref, target)
        if protocol.post_match(order, target) != ref:
            return False, "post-matched sequence differs from reference"
        inv = protocol.inverse_permutation(order)
        if protocol.post_match(inv, protocol.post_match(order, target)) != target:
            return False, "inverse permutation does not restore the target"
    return True, f"{trials} random permutations"


def chernoff_audit() -> tuple[bool, str]:
    counts = {}
    for M in (3, 4, 5):
        p = ProtocolParams(M=M, N=1e12, T_a=0.02, T_v=0.04, channel=ChannelParams(50.0))
        inp = decoy.DecoyInputs.from_stats(p, channel.expected_stats(p))
        counter = bounds.ChernoffCounter()
        decoy.k_photon_estimate(inp, M, 1e-10, counter)
        counts[M] = counter.applications
    return counts == CHERNOFF_COEFFICIENT, f"applications {counts}"


def k_photon_soundness(instances: int = 100, seed: int = 11) -> tuple[bool, str]:
    """k-photon conclusive lower bound and error upper bound hold on mixtures."""
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(instances):
        M = int(rng.integers(3, 6))
        rec = protocol.recipients(M)
        mu = rng.uniform(0.2, 0.8)
        nu = rng.uniform(0.02, mu / 2)
        exp_counts, true = _mixture(rng, 1e10, mu, nu, 0.5, 0.3, rec)
        inp = decoy.DecoyInputs(mu, nu, 0.5, 0.3, 0.2, _sampled(rng, exp_counts))
        est = decoy.k_photon_estimate(inp, M, 1e-10)
        frac = math.prod(true[q]["s1"] / exp_counts[q]["mu"].n for q in decoy.omega(M))
        if est.sufficient and (
            est.s_Ck_conclusive > true["C"]["s1c"] * frac or est.t_Ck_error < true["C"]["t1c"] * frac
        ):
            violations += 1
    return violations == 0, f"{violations} violations on {instances} instances"


SUITE: dict[str, Oracle] = {
    "encoding conclusive fraction": encoding_conclusive_fraction,
    "encoding conclusive correctness": encoding_conclusive_correct,
    "channel closed forms": channel_closed_forms,
    "decoy single-photon soundness": decoy_soundness,
    "decoy k-photon soundness": k_photon_soundness,
    "sampling vs hypergeometric": sampling_vs_hypergeometric,
    "Chernoff coverage": chernoff_coverage,
    "entropy inverse residual": entropy_inverse,
    "repudiation root residual": repudiation_residual,
    "five-party phase relation grid": five_party_grid,
    "post-matching round trip": post_matching_roundtrip,
    "Chernoff application audit": chernoff_audit,
}


def run_suite(suite: dict[str, Oracle] | None = None) -> list[tuple[str, bool, str]]:
    suite = SUITE if suite is None else suite
    if len(suite) < 10:
        raise AssertionError(f"oracle suite has only {len(suite)} entries")
    results = []
    for name, fn in suite.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # an oracle that crashes counts as failed
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
