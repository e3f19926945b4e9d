"""Minimal pulse number and signature rate under the security targets."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .bounds import ChernoffCounter
from .channel import expected_stats
from .decoy import DecoyInputs, k_photon_estimate
from .params import ChannelParams, ProtocolParams, SecurityTargets
from .security import (
    SecurityBudget,
    Thresholds,
    delta_cu_bound,
    forger_mismatch_rate,
    forgery_probability,
    repudiation_probability,
    robustness_probability,
    total_security,
)

log = logging.getLogger(__name__)

N_CEILING = 1e16


@dataclass
class Evaluation:
    """Outcome of one pass through the analytic pipeline."""

    params: ProtocolParams
    feasible: bool
    reason: str = ""
    budget: SecurityBudget | None = None
    details: dict = field(default_factory=dict)

    def margin(self, targets: SecurityTargets) -> float:
        """Largest log10 overshoot of a component over its target; <= 0 when secure."""
        if self.budget is None:
            return math.inf
        b = self.budget
        pairs = [
            (b.eps_for, targets.eps_for),
            (b.eps_rob, targets.eps_rob),
            (b.eps_rep, targets.eps_rep),
            (b.eps_tot, targets.eps_tot),
        ]
        return max(math.log10(max(v, 1e-300)) - math.log10(t) for v, t in pairs)


def evaluate(params: ProtocolParams, targets: SecurityTargets | None = None) -> Evaluation:
    """Channel expectations -> decoy bounds -> e_b -> forger rate -> eps terms."""
    targets = SecurityTargets() if targets is None else targets
    if params.N <= 0:
        return Evaluation(params, False, "no pulses")
    M, eps1, eps2 = params.M, params.confidence.eps1, params.confidence.eps2
    stats = expected_stats(params)
    inputs = DecoyInputs.from_stats(params, stats)
    counter = ChernoffCounter()
    est = k_photon_estimate(inputs, M, eps1, counter)
    details = {"k_photon": est, "stats": stats}
    if not est.sufficient:
        return Evaluation(params, False, f"insufficient statistics: {est.reason}", details=details)
    e_b = est.e_b
    details["e_b"] = e_b
    if not 0 <= e_b <= 0.5:
        return Evaluation(params, False, f"k-photon bit error rate {e_b:.3g} out of range", details=details)

    E_BF = forger_mismatch_rate(e_b, M, params.phase_relation)
    c_mu = stats["C"]["mu"]
    n_cu = (1 - params.t) * c_mu.n_c
    n_cu_k = (1 - params.t) * est.s_Ck_conclusive
    thr = Thresholds(params.T_a, params.verifier_thresholds, n_cu, n_cu_k)
    eps_for = forgery_probability(E_BF, thr.T_vk, n_cu_k)

    b_mu = stats["B"]["mu"]
    P_B = b_mu.n_c / b_mu.n
    P_C = c_mu.n_c / c_mu.n
    E_B = b_mu.m_c / b_mu.n_c
    e_ver = {v: stats[v]["mu"].m_c / stats[v]["mu"].n_c for v in params.verifiers}
    delta = delta_cu_bound(E_B, e_ver, n_cu, eps1, params.delta_model)
    n_u = (1 - params.t) * b_mu.n
    eps_rep = repudiation_probability(P_B, P_C, params.T_a, thr.T_v, delta, n_u, n_cu)
    eps_rob = robustness_probability(E_B, params.T_a, b_mu.n_c, params.t, eps2)

    budget = total_security(M, eps1, eps2, eps_rob, eps_for, eps_rep, counter.applications)
    details.update(E_BF=E_BF, T_vk=thr.T_vk, E_B=E_B, P_B=P_B, P_C=P_C, delta=delta, n_cu=n_cu, n_cu_k=n_cu_k)
    # Distance to feasibility in rate units, used to steer the optimizer out of dead regions.
    details["violation"] = (
        max(0.0, thr.T_vk - E_BF)
        + max(0.0, E_B - params.T_a)
        + max(0.0, E_B + delta / n_cu - thr.T_v + params.T_a - E_B)
    )
    ev = Evaluation(params, True, budget=budget, details=details)
    if ev.margin(targets) > 0:
        ev.feasible = False
        ev.reason = "security targets not met"
    return ev


@dataclass
class RatePoint:
    distance_km: float
    params: ProtocolParams | None
    N_min: float
    budget: SecurityBudget | None = None
    vector: tuple | None = None  # optimizer coordinates, reusable as a warm start

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.N_min)

    @property
    def R(self) -> float:
        return 1 / (2 * self.N_min) if self.feasible else 0.0


def _feasible(params: ProtocolParams, N: float, targets: SecurityTargets) -> Evaluation:
    return evaluate(replace(params, N=N), targets)


class NonMonotoneError(ValueError):
    """Feasible at some N but not at twice that N."""


def minimize_N(
    params: ProtocolParams,
    targets: SecurityTargets | None = None,
    rtol: float = 0.01,
    n_start: float = 1e6,
    n_ceiling: float = N_CEILING,
) -> float:
    """Smallest feasible N, or inf when nothing up to ``n_ceiling`` works."""
    targets = SecurityTargets() if targets is None else targets
    lo, hi = None, n_start
    while True:
        ev = _feasible(params, hi, targets)
        if ev.feasible:
            # larger N must stay feasible
            if not _feasible(params, 2 * hi, targets).feasible:
                raise NonMonotoneError(f"feasibility not monotone in N at N={hi:.3g}")
            break
        lo = hi
        hi *= 4
        if hi > n_ceiling:
            return math.inf
    if lo is None:
        while hi > 1 and _feasible(params, hi / 4, targets).feasible:
            hi /= 4
        lo = hi / 4
    while hi / lo > 1 + rtol:
        mid = math.sqrt(lo * hi)
        if _feasible(params, mid, targets).feasible:
            hi = mid
        else:
            lo = mid
    return hi


# Optimization variables: mu, nu, p_mu, p_nu, t, log10(T_a - E_B), log10(T_v - T_a)
_BOX = [(0.05, 1.0), (0.005, 0.5), (0.05, 0.95), (0.02, 0.9), (0.05, 0.9), (-5.0, -0.3), (-5.0, -0.3)]


def _honest_error(mu: float, ch: ChannelParams) -> float:
    from .channel import pulse_rates

    r = pulse_rates(mu, ch)
    return r.error / r.conclusive


def _params_from_vector(x, M, ch, conf, model) -> ProtocolParams | None:
    x = np.clip(x, [b[0] for b in _BOX], [b[1] for b in _BOX])
    mu, nu, p_mu, p_nu, t, la, lb = x
    nu = min(nu, mu / 2)
    if p_mu + p_nu > 0.98:
        return None
    E_B = _honest_error(mu, ch)
    T_a = E_B + 10**la
    T_v = T_a + 10**lb
    if T_v >= 0.5:
        return None
    return ProtocolParams(
        M=M, N=1.0, mu=mu, nu=nu, p_mu=p_mu, p_nu=p_nu, t=t, T_a=T_a, T_v=T_v,
        channel=ch, confidence=conf, **model,
    )


def _margin(p: ProtocolParams, log_n: float, targets: SecurityTargets) -> float:
    m = evaluate(p.with_(N=10**log_n), targets).margin(targets)
    return min(m, 10.0)


def _log10_n_min(p: ProtocolParams, targets: SecurityTargets, xtol: float = 1e-4) -> float:
    """log10 of the N where the security margin crosses zero; inf if none below the ceiling.

    Smooth counterpart of ``minimize_N`` used inside the optimizer.
    """
    hi = 8.0
    while _margin(p, hi, targets) > 0:
        hi += 1.0
        if hi > math.log10(N_CEILING):
            return math.inf
    lo = hi - 1.0
    while _margin(p, lo, targets) <= 0:
        lo -= 1.0
        if lo < 0:
            return lo + 1.0
    return brentq(lambda v: _margin(p, v, targets), lo, hi, xtol=xtol)


def _outside(x) -> float:
    """Distance outside the search box, in box widths, plus the nu <= mu/2 excess."""
    out = sum(max(lo - v, 0.0, v - hi) / (hi - lo) for v, (lo, hi) in zip(x, _BOX))
    mu = min(max(x[0], _BOX[0][0]), _BOX[0][1])
    return out + max(0.0, x[1] - mu / 2) / mu


def _objective(x, M, ch, conf, targets, model) -> float:
    # Clipping alone leaves flat regions that stall the simplex on the boundary.
    excess = 10.0 * _outside(x)
    p = _params_from_vector(x, M, ch, conf, model)
    if p is None:
        return 30.0 + excess
    log_n = _log10_n_min(p, targets)
    if math.isfinite(log_n):
        return log_n + excess
    ev = evaluate(replace(p, N=N_CEILING), targets)
    pen = ev.margin(targets)
    pen = min(pen, 10.0) if math.isfinite(pen) else 10.0
    return 17.0 + pen + 100.0 * ev.details.get("violation", 1.0) + excess


# Intensities 0.5 / 0.1, probabilities 0.5 / 0.3 and test fraction 0.3; the
# thresholds of the default start are placed by ``default_start``. The extra
# starts cover the low-intensity, tight-threshold corner reached at long range.
DEFAULT_START = (0.5, 0.1, 0.5, 0.3, 0.3, -2.0, -1.3)
EXTRA_STARTS = ((0.2, 0.03, 0.5, 0.3, 0.3, -2.5, -2.0), (0.1, 0.02, 0.6, 0.3, 0.3, -2.5, -2.5))


def default_start(M: int, channel: ChannelParams, targets: SecurityTargets, model: dict) -> tuple:
    """DEFAULT_START with T_a and T_v at one and two thirds of the way from the
    honest error rate to the largest T_v the forger bound allows."""
    x = list(DEFAULT_START)
    p = _params_from_vector(x, M, channel, targets.confidence(M), model).with_(N=N_CEILING)
    d = evaluate(p, targets).details
    if "E_BF" not in d or d["n_cu"] <= 0:
        return tuple(x)
    cap = d["E_BF"] * d["n_cu_k"] / d["n_cu"]
    gap = cap - d["E_B"]
    if gap > 0:
        x[5] = np.clip(math.log10(gap / 3), *_BOX[5])
        x[6] = np.clip(math.log10(gap / 3), *_BOX[6])
    return tuple(float(v) for v in x)


@dataclass(frozen=True)
class OptimizerConfig:
    starts: tuple = EXTRA_STARTS  # tried after the default start
    sweeps: int = 1  # coordinate-descent passes before the simplex stage
    maxiter: int = 1500
    restarts: int = 3  # fresh simplices while the previous one still improved
    rtol: float = 0.01  # relative tolerance of the reported N_min
    phase_relation: str = "corrected"
    delta_model: str = "difference"


def _coordinate_descent(fun, x0, sweeps):
    x = np.array(x0, dtype=float)
    fx = fun(x)
    for _ in range(sweeps):
        for i, (lo, hi) in enumerate(_BOX):
            def f1(v, i=i):
                y = x.copy()
                y[i] = v
                return fun(y)

            r = minimize_scalar(f1, bounds=(lo, hi), method="bounded", options={"xatol": 1e-3 * (hi - lo)})
            if r.fun < fx:
                x[i], fx = r.x, r.fun
    return x, fx


def optimize(
    M: int,
    channel: ChannelParams,
    targets: SecurityTargets | None = None,
    config: OptimizerConfig | None = None,
    warm_start=None,
) -> RatePoint:
    """Minimize N over intensities, probabilities, test fraction and thresholds.

    Each start is polished by coordinate descent and then Nelder-Mead; the
    best end point wins. Deterministic for fixed inputs.
    """
    targets = SecurityTargets() if targets is None else targets
    config = OptimizerConfig() if config is None else config
    conf = targets.confidence(M)
    model = {"phase_relation": config.phase_relation, "delta_model": config.delta_model}
    args = (M, channel, conf, targets, model)
    fun = lambda x: _objective(x, *args)  # noqa: E731
    starts = [default_start(M, channel, targets, model), *config.starts]
    if warm_start is not None:
        starts.insert(0, tuple(warm_start))
    best_x, best_f = None, math.inf
    for x0 in starts:
        x, fx = _coordinate_descent(fun, x0, config.sweeps)
        for _ in range(config.restarts):
            r = minimize(
                fun, x, method="Nelder-Mead",
                options={"maxiter": config.maxiter, "xatol": 1e-3, "fatol": 1e-3, "adaptive": True},
            )
            if not r.fun < fx - 1e-4:
                break
            x, fx = r.x, r.fun
        log.debug("M=%d d=%.1f start=%s -> %.4f", M, channel.distance_km, x0, fx)
        if fx < best_f:
            best_x, best_f = np.clip(x, *zip(*_BOX)), fx
    params = _params_from_vector(best_x, M, channel, conf, model)
    if params is None:
        return RatePoint(channel.distance_km, None, math.inf, vector=tuple(best_x))
    try:
        n_min = minimize_N(params, targets, rtol=config.rtol) if best_f < 17 else math.inf
    except NonMonotoneError:
        # feasible only in a window of N; report the crossing the objective found
        n_min = 10**best_f * (1 + config.rtol)
        if not evaluate(params.with_(N=n_min), targets).feasible:
            n_min = math.inf
    if not math.isfinite(n_min):
        return RatePoint(channel.distance_km, params.with_(N=N_CEILING), math.inf, vector=tuple(best_x))
    params = params.with_(N=n_min)
    return RatePoint(channel.distance_km, params, n_min, evaluate(params, targets).budget, tuple(best_x))


class _Reached(Exception):
    def __init__(self, x):
        self.x = x


def _ceiling_objective(x, M, ch, conf, targets, model) -> float:
    """Security margin at N = N_CEILING, raising ``_Reached`` once it is met."""
    excess = 10.0 * _outside(x)
    p = _params_from_vector(x, M, ch, conf, model)
    if p is None:
        return 30.0 + excess
    ev = evaluate(p.with_(N=N_CEILING), targets)
    m = ev.margin(targets)
    m = min(m, 10.0) if math.isfinite(m) else 10.0
    f = m + 100.0 * ev.details.get("violation", 1.0) + excess
    if ev.feasible and excess == 0:
        raise _Reached(np.array(x, dtype=float))
    return f


def reachable(
    M: int,
    channel: ChannelParams,
    targets: SecurityTargets | None = None,
    config: OptimizerConfig | None = None,
    warm_start=None,
) -> tuple[bool, tuple]:
    """Whether some parameter choice meets the targets with N <= N_CEILING.

    Same starts and search as ``optimize``, applied to the margin at the
    ceiling and stopped at the first feasible point. Returns the flag and the
    best vector seen.
    """
    targets = SecurityTargets() if targets is None else targets
    config = OptimizerConfig() if config is None else config
    conf = targets.confidence(M)
    model = {"phase_relation": config.phase_relation, "delta_model": config.delta_model}
    fun = lambda x: _ceiling_objective(x, M, channel, conf, targets, model)  # noqa: E731
    starts = [default_start(M, channel, targets, model), *config.starts]
    if warm_start is not None:
        starts.insert(0, tuple(warm_start))
    best_x, best_f = np.array(starts[0], dtype=float), math.inf
    try:
        for x0 in starts:
            x, fx = _coordinate_descent(fun, x0, config.sweeps)
            r = minimize(fun, x, method="Nelder-Mead",
                         options={"maxiter": config.maxiter, "xatol": 1e-3, "fatol": 1e-4, "adaptive": True})
            if r.fun < fx:
                x, fx = r.x, r.fun
            if fx < best_f:
                best_x, best_f = x, fx
    except _Reached as hit:
        return True, tuple(hit.x)
    return False, tuple(best_x)


def max_distance(
    M: int,
    channel: ChannelParams,
    targets: SecurityTargets | None = None,
    config: OptimizerConfig | None = None,
    lo: float = 0.0,
    hi: float = 400.0,
    resolution: float = 1.0,
) -> float:
    """Largest distance at which some N <= N_CEILING meets the targets, by bisection.

    ``lo`` must be reachable; ``hi`` is taken to be out of reach.
    """
    ok, x = reachable(M, channel.at(lo), targets, config)
    if not ok:
        raise ValueError(f"targets cannot be met at {lo} km")
    while hi - lo > resolution:
        mid = (lo + hi) / 2
        ok, y = reachable(M, channel.at(mid), targets, config, warm_start=x)
        log.info("M=%d %.2f km: %s", M, mid, "reachable" if ok else "out of reach")
        if ok:
            lo, x = mid, y
        else:
            hi = mid
    return lo


def _optimize_job(args):
    return optimize(*args)


def rate_curve(
    distances,
    M: int,
    channel: ChannelParams,
    targets: SecurityTargets | None = None,
    config: OptimizerConfig | None = None,
    workers: int = 1,
    slack: float = 0.01,
) -> list[RatePoint]:
    """Optimal rate at each distance, in input order.

    Points are optimized independently, so the result does not depend on
    ``workers``. A point whose rate falls more than ``slack`` below that of
    a longer distance is re-optimized from the longer point's optimum; the
    curve is then asserted nonincreasing.
    """
    distances = [float(d) for d in distances]
    if not distances:
        return []
    jobs = [(M, channel.at(d), targets, config) for d in distances]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            points = list(pool.map(_optimize_job, jobs))
    else:
        points = [_optimize_job(j) for j in jobs]
    order = sorted(range(len(points)), key=lambda i: distances[i])
    for _ in range(len(points)):
        repaired = False
        for a, b in zip(order, order[1:]):
            if points[b].R > points[a].R * (1 + slack):
                pt = optimize(M, channel.at(distances[a]), targets, config, warm_start=points[b].vector)
                if pt.R > points[a].R:
                    points[a], repaired = pt, True
        if not repaired:
            break
    for a, b in zip(order, order[1:]):
        if points[b].R > points[a].R * (1 + slack):
            raise AssertionError(
                f"rate increases from {distances[a]} km to {distances[b]} km: {points[a].R:.4g} < {points[b].R:.4g}"
            )
    return points
