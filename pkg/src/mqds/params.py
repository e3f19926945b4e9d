"""Configuration dataclasses shared by the analytic pipeline and the simulator."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .protocol import recipients

# Chernoff applications charged to eps1 by a full evaluation, keyed by party count.
CHERNOFF_COEFFICIENT = {3: 11, 4: 17, 5: 23}


@dataclass(frozen=True)
class ChannelParams:
    distance_km: float = 0.0
    alpha_db_per_km: float = 0.16
    eta_det: float = 0.93
    p_dark: float = 1e-7
    e_mis: float = 0.005

    def __post_init__(self):
        if self.distance_km < 0:
            raise ValueError("distance must be nonnegative")
        if self.alpha_db_per_km < 0:
            raise ValueError("loss coefficient must be nonnegative")
        if not 0 < self.eta_det <= 1:
            raise ValueError("detector efficiency must lie in (0, 1]")
        if not 0 <= self.p_dark < 1:
            raise ValueError("dark-count probability must lie in [0, 1)")
        if not 0 <= self.e_mis < 0.5:
            raise ValueError("misalignment rate must lie in [0, 0.5)")

    @property
    def eta_sys(self) -> float:
        return self.eta_det * 10 ** (-self.alpha_db_per_km * self.distance_km / 10)

    def at(self, distance_km: float) -> "ChannelParams":
        return replace(self, distance_km=distance_km)


@dataclass(frozen=True)
class ConfidenceParams:
    eps1: float = 1e-11
    eps2: float = 1e-11

    def __post_init__(self):
        for name in ("eps1", "eps2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


@dataclass(frozen=True)
class SecurityTargets:
    eps_tot: float = 1e-9
    eps_for: float = 1e-10
    eps_rob: float = 1e-10
    eps_rep: float = 1e-10

    def confidence(self, M: int) -> ConfidenceParams:
        """Split what is left of eps_tot evenly between eps1 and eps2 (eps1 = eps2)."""
        rest = self.eps_tot - self.eps_for - self.eps_rob - self.eps_rep
        if rest <= 0:
            raise ValueError("component targets exhaust the total budget")
        eps = rest / (CHERNOFF_COEFFICIENT[M] + 1)
        return ConfidenceParams(eps, eps)


@dataclass(frozen=True)
class ProtocolParams:
    M: int = 3
    N: float = 1e10
    mu: float = 0.5
    nu: float = 0.1
    p_mu: float = 0.5
    p_nu: float = 0.3
    t: float = 0.3
    T_a: float = 0.02
    T_v: float | Mapping[str, float] = 0.04
    channel: ChannelParams = field(default_factory=ChannelParams)
    confidence: ConfidenceParams = field(default_factory=ConfidenceParams)
    # Modelling switches of the analytic pipeline, see security.py.
    phase_relation: str = "corrected"
    delta_model: str = "difference"

    def __post_init__(self):
        recipients(self.M)
        if self.phase_relation not in ("nominal", "corrected"):
            raise ValueError(f"unknown phase relation {self.phase_relation!r}")
        if self.delta_model not in ("difference", "pattern"):
            raise ValueError(f"unknown Hamming-distance model {self.delta_model!r}")
        if self.N < 0:
            raise ValueError("pulse number must be nonnegative")
        if not self.mu > self.nu > 0:
            raise ValueError(f"need mu > nu > 0, got mu={self.mu}, nu={self.nu}")
        if self.p_mu <= 0 or self.p_nu <= 0 or self.p_0 <= 0:
            raise ValueError("intensity probabilities must be positive and sum to 1")
        if not 0 < self.t < 1:
            raise ValueError("test fraction must lie in (0, 1)")
        if isinstance(self.T_v, Mapping):
            missing = set(self.verifiers) - set(self.T_v)
            if missing:
                raise ValueError(f"no verification threshold for {sorted(missing)}")
        if not 0 < self.T_a < self.T_v_min:
            raise ValueError("need 0 < T_a < min T_v")

    @property
    def p_0(self) -> float:
        return 1.0 - self.p_mu - self.p_nu

    @property
    def recipients(self) -> tuple[str, ...]:
        return recipients(self.M)

    @property
    def verifiers(self) -> tuple[str, ...]:
        return self.recipients[1:]

    @property
    def verifier_thresholds(self) -> dict[str, float]:
        if isinstance(self.T_v, Mapping):
            return {v: float(self.T_v[v]) for v in self.verifiers}
        return {v: float(self.T_v) for v in self.verifiers}

    @property
    def T_v_min(self) -> float:
        return min(self.verifier_thresholds.values())

    def intensity_values(self) -> dict[str, float]:
        return {"mu": self.mu, "nu": self.nu, "vacuum": 0.0}

    def intensity_probs(self) -> dict[str, float]:
        return {"mu": self.p_mu, "nu": self.p_nu, "vacuum": self.p_0}

    def with_(self, **changes) -> "ProtocolParams":
        return replace(self, **changes)

