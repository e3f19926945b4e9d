"""Threshold-detector channel model: closed-form expectations and per-pulse sampling.

Each recipient measures in a uniformly random basis with two threshold
detectors. A phase-randomized coherent pulse of mean photon number
``lam`` reaches the detectors with mean ``lam * eta_sys``; misalignment
sends each photon to the wrong detector of the measured basis with
probability ``e_mis``, and each detector fires a dark count with
probability ``p_dark`` per gate. Double clicks are assigned by a fair
coin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import ChannelParams, ProtocolParams
from .protocol import (
    AXES,
    BORN,
    CATALOG,
    NO_CLICK,
    STATES,
    Axis,
    LogicBit,
    MeasurementOutcome,
    QubitState,
    Sign,
    classify_outcome,
    sets_containing,
)

INTENSITIES = ("mu", "nu", "vacuum")


@dataclass(frozen=True)
class PulseRates:
    """Per-pulse probabilities of a click, a conclusive result and a conclusive error."""

    click: float
    conclusive: float
    error: float


@dataclass(frozen=True)
class Counts:
    n: float  # clicks
    n_c: float  # conclusive results
    m_c: float  # conclusive results disagreeing with Alice


@dataclass(frozen=True)
class ChannelStats:
    N: float
    counts: dict[str, dict[str, Counts]]  # recipient -> intensity label -> counts

    def __getitem__(self, recipient: str) -> dict[str, Counts]:
        return self.counts[recipient]


def click_probability(lam: float, ch: ChannelParams) -> float:
    """Probability that at least one of the two detectors of the measured basis fires."""
    return 1.0 - (1.0 - ch.p_dark) ** 2 * math.exp(-lam * ch.eta_sys)


def detector_split(sent: QubitState, basis: Axis, e_mis: float) -> tuple[float, float]:
    """Fractions of the arriving light routed to the (+, -) detectors of ``basis``."""
    plus = QubitState.of(basis, Sign.PLUS)
    minus = QubitState.of(basis, Sign.MINUS)
    bp = float(BORN[sent, basis, plus])
    bm = float(BORN[sent, basis, minus])
    return (1 - e_mis) * bp + e_mis * bm, (1 - e_mis) * bm + e_mis * bp


def outcome_distribution(
    sent: QubitState, basis: Axis, lam: float, ch: ChannelParams
) -> dict[QubitState, float]:
    """Probability of each observed eigenstate of ``basis``; the remainder is no-click."""
    fp, fm = detector_split(sent, basis, ch.e_mis)
    mean = lam * ch.eta_sys
    quiet_p = (1 - ch.p_dark) * math.exp(-mean * fp)
    quiet_m = (1 - ch.p_dark) * math.exp(-mean * fm)
    both = (1 - quiet_p) * (1 - quiet_m)
    return {
        QubitState.of(basis, Sign.PLUS): (1 - quiet_p) * quiet_m + both / 2,
        QubitState.of(basis, Sign.MINUS): quiet_p * (1 - quiet_m) + both / 2,
    }


@lru_cache(maxsize=4096)
def pulse_rates(lam: float, ch: ChannelParams) -> PulseRates:
    """Exhaustive average over sent state, assigned set, basis and outcome."""
    click = conclusive = error = 0.0
    for sent in STATES:
        for enc in sets_containing(sent):
            truth = enc.bit_of(sent)
            for basis in AXES:
                weight = 1.0 / (6 * 4 * 3)
                for out, p in outcome_distribution(sent, basis, lam, ch).items():
                    click += weight * p
                    bit = classify_outcome(enc, out)
                    if bit is not LogicBit.INCONCLUSIVE:
                        conclusive += weight * p
                        if bit != truth:
                            error += weight * p
    return PulseRates(click, conclusive, error)


def expected_stats(params: ProtocolParams, ch: ChannelParams | None = None) -> ChannelStats:
    """Expected click, conclusive and conclusive-error counts per recipient and intensity.

    Every recipient sees the same channel, so the per-recipient entries
    are identical.
    """
    ch = params.channel if ch is None else ch
    values = params.intensity_values()
    probs = params.intensity_probs()
    per_label = {}
    for label in INTENSITIES:
        r = pulse_rates(values[label], ch)
        scale = params.N * probs[label]
        per_label[label] = Counts(scale * r.click, scale * r.conclusive, scale * r.error)
    return ChannelStats(params.N, {q: dict(per_label) for q in params.recipients})


def sample_detection(
    sent: QubitState, lam: float, basis: Axis, ch: ChannelParams, rng: np.random.Generator
) -> MeasurementOutcome:
    """Draw one measurement result photon by photon."""
    photons = rng.poisson(lam)
    arrived = rng.binomial(photons, ch.eta_sys) if photons else 0
    fp, _ = detector_split(sent, basis, ch.e_mis)
    to_plus = rng.binomial(arrived, fp) if arrived else 0
    fire_p = to_plus > 0 or rng.random() < ch.p_dark
    fire_m = (arrived - to_plus) > 0 or rng.random() < ch.p_dark
    if not (fire_p or fire_m):
        return NO_CLICK
    if fire_p and fire_m:
        fire_p = rng.random() < 0.5
    sign = Sign.PLUS if fire_p else Sign.MINUS
    return MeasurementOutcome(True, QubitState.of(basis, sign))


# Vectorized form of ``sample_detection`` used by the simulator. States are
# coded 0..5 in ``STATES`` order, i.e. 2 * axis + (sign is minus).
_STATE_CODE = {s: i for i, s in enumerate(STATES)}
_AXIS_CODE = {a: i for i, a in enumerate(AXES)}

# _PLUS_FRACTION[sent, basis] without misalignment
_PLUS_FRACTION = np.array(
    [[float(BORN[s, b, QubitState.of(b, Sign.PLUS)]) for b in AXES] for s in STATES]
)


def sample_detections(
    states: np.ndarray,
    lams: np.ndarray,
    bases: np.ndarray,
    ch: ChannelParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Outcome codes for a batch of pulses; -1 marks no click."""
    n = len(states)
    arrived = rng.binomial(rng.poisson(lams), ch.eta_sys)
    born = _PLUS_FRACTION[states, bases]
    fp = (1 - ch.e_mis) * born + ch.e_mis * (1 - born)
    to_plus = rng.binomial(arrived, fp)
    fire_p = (to_plus > 0) | (rng.random(n) < ch.p_dark)
    fire_m = ((arrived - to_plus) > 0) | (rng.random(n) < ch.p_dark)
    both = fire_p & fire_m
    coin = rng.random(n) < 0.5
    plus = np.where(both, coin, fire_p)
    out = 2 * bases + np.where(plus, 0, 1)
    return np.where(fire_p | fire_m, out, -1)


def encode_state(s: QubitState) -> int:
    return _STATE_CODE[s]


def decode_state(code: int) -> QubitState:
    return STATES[code]


# Decoding table: _CLASSIFY[set_index, outcome_code] -> 0, 1, or -1 (inconclusive).
CLASSIFY_TABLE = np.array(
    [
        [
            -1 if (b := classify_outcome(enc, out)) is LogicBit.INCONCLUSIVE else b.value
            for out in STATES
        ]
        for enc in CATALOG
    ],
    dtype=np.int8,
)
