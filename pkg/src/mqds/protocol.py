"""Six-state encoding: states, the 12-set catalog, conclusive decoding, post-matching."""

from __future__ import annotations

import enum
from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, TypeVar

T = TypeVar("T")


class Axis(enum.Enum):
    X = "x"
    Y = "y"
    Z = "z"


class Sign(enum.Enum):
    PLUS = "+"
    MINUS = "-"


class QubitState(enum.Enum):
    PX = (Axis.X, Sign.PLUS)
    MX = (Axis.X, Sign.MINUS)
    PY = (Axis.Y, Sign.PLUS)
    MY = (Axis.Y, Sign.MINUS)
    PZ = (Axis.Z, Sign.PLUS)
    MZ = (Axis.Z, Sign.MINUS)

    @property
    def axis(self) -> Axis:
        return self.value[0]

    @property
    def sign(self) -> Sign:
        return self.value[1]

    @property
    def antipode(self) -> "QubitState":
        return _ANTIPODE[self]

    @classmethod
    def of(cls, axis: Axis, sign: Sign) -> "QubitState":
        return cls((axis, sign))

    def __str__(self) -> str:
        return f"|{self.sign.value}{self.axis.value}>"


_ANTIPODE = {
    QubitState.PX: QubitState.MX,
    QubitState.MX: QubitState.PX,
    QubitState.PY: QubitState.MY,
    QubitState.MY: QubitState.PY,
    QubitState.PZ: QubitState.MZ,
    QubitState.MZ: QubitState.PZ,
}

STATES: tuple[QubitState, ...] = tuple(QubitState)
AXES: tuple[Axis, ...] = tuple(Axis)


class LogicBit(enum.Enum):
    ZERO = 0
    ONE = 1
    INCONCLUSIVE = None


class Role(enum.Enum):
    SIGNER = "signer"
    AUTHENTICATOR = "authenticator"
    VERIFIER = "verifier"


# Recipient names in the order they join the protocol; Bob is always the authenticator.
RECIPIENTS = ("B", "C", "D", "E")


def recipients(M: int) -> tuple[str, ...]:
    if M not in (3, 4, 5):
        raise ValueError(f"party count must be 3, 4 or 5, got {M}")
    return RECIPIENTS[: M - 1]


def roles(M: int) -> dict[str, Role]:
    out = {"A": Role.SIGNER}
    for q in recipients(M):
        out[q] = Role.AUTHENTICATOR if q == "B" else Role.VERIFIER
    return out


@dataclass(frozen=True)
class Intensity:
    label: str
    value: float

    def __post_init__(self):
        if self.label not in ("mu", "nu", "vacuum"):
            raise ValueError(f"unknown intensity label {self.label!r}")
        if self.value < 0:
            raise ValueError("mean photon number must be nonnegative")
        if self.label == "vacuum" and self.value != 0:
            raise ValueError("vacuum intensity must be 0")


@dataclass(frozen=True)
class EncodingSet:
    first: QubitState  # logic bit 0
    second: QubitState  # logic bit 1

    def __post_init__(self):
        if self.first.axis == self.second.axis:
            raise ValueError("set members must lie on different axes")

    def __contains__(self, state: QubitState) -> bool:
        return state == self.first or state == self.second

    def bit_of(self, state: QubitState) -> LogicBit:
        if state == self.first:
            return LogicBit.ZERO
        if state == self.second:
            return LogicBit.ONE
        raise ValueError(f"{state} is not a member of {self}")

    def __str__(self) -> str:
        return f"{{{self.first},{self.second}}}"


@dataclass(frozen=True)
class MeasurementOutcome:
    clicked: bool
    state: QubitState | None = None

    def __post_init__(self):
        if self.clicked != (self.state is not None):
            raise ValueError("a click carries an outcome state and a no-click does not")


NO_CLICK = MeasurementOutcome(False)


def _build_catalog() -> tuple[EncodingSet, ...]:
    families = ((Axis.X, Axis.Y), (Axis.Y, Axis.Z), (Axis.Z, Axis.X))
    out = []
    for a, b in families:
        for s1 in Sign:
            for s2 in Sign:
                out.append(EncodingSet(QubitState.of(a, s1), QubitState.of(b, s2)))
    return tuple(out)


CATALOG: tuple[EncodingSet, ...] = _build_catalog()
SET_INDEX = {s: i for i, s in enumerate(CATALOG)}


def sets_containing(state: QubitState) -> list[EncodingSet]:
    """The four catalog sets Alice may assign to ``state``, in catalog order."""
    return [s for s in CATALOG if state in s]


def classify_outcome(enc: EncodingSet, outcome: QubitState) -> LogicBit:
    """Decode a measurement outcome against the announced set.

    An outcome orthogonal to one member rules that member out and
    identifies the other one.
    """
    if outcome == enc.first.antipode:
        return LogicBit.ONE
    if outcome == enc.second.antipode:
        return LogicBit.ZERO
    return LogicBit.INCONCLUSIVE


def born_probability(sent: QubitState, basis: Axis, outcome: QubitState) -> Fraction:
    """Exact probability of observing ``outcome`` when measuring ``sent`` in ``basis``."""
    if outcome.axis != basis:
        return Fraction(0)
    if sent.axis == basis:
        return Fraction(1) if outcome == sent else Fraction(0)
    return Fraction(1, 2)


BORN = {
    (sent, basis, out): born_probability(sent, basis, out)
    for sent in STATES
    for basis in AXES
    for out in STATES
    if out.axis == basis
}


def check_permutation(order: Sequence[int], n: int) -> None:
    if len(order) != n:
        raise ValueError(f"permutation has length {len(order)}, expected {n}")
    if sorted(order) != list(range(n)):
        raise ValueError("reference order is not a permutation of 0..n-1")


def post_match(reference_order: Sequence[int], target: Sequence[T]) -> list[T]:
    """Reorder ``target`` so that output[i] = target[reference_order[i]]."""
    check_permutation(reference_order, len(target))
    return [target[j] for j in reference_order]


def inverse_permutation(order: Sequence[int]) -> list[int]:
    inv = [0] * len(order)
    for i, j in enumerate(order):
        inv[j] = i
    return inv


def matching_order(reference: Sequence[T], target: Sequence[T]) -> list[int]:
    """Permutation taking ``target`` onto ``reference`` element by element.

    Both sequences must be rearrangements of each other. Equal elements are
    paired in first-come order, so the result is deterministic.
    """
    if len(reference) != len(target):
        raise ValueError("sequences differ in length")
    slots: dict[T, deque[int]] = defaultdict(deque)
    for j, item in enumerate(target):
        slots[item].append(j)
    order = []
    for item in reference:
        if not slots[item]:
            raise ValueError(f"target has no unmatched copy of {item!r}")
        order.append(slots[item].popleft())
    return order
