"""Value types shared by the analytic and simulation modules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class TransienceClass(enum.Enum):
    RECURRENT_LINE = "RecurrentLine"
    PLUS_ATTRACTING = "PlusAttracting"
    MINUS_ATTRACTING = "MinusAttracting"
    BOTH_ATTRACTING = "BothAttracting"


@dataclass(frozen=True)
class ExtendedMass:
    """A positive real or +infinity.

    ``heuristic`` marks an infinite verdict reached by the divergence
    heuristic of the tail quadrature rather than by overflow.
    """

    value: float
    heuristic: bool = False

    def __post_init__(self):
        if not (self.value > 0):
            raise ValueError(f"mass must be positive, got {self.value!r}")

    @classmethod
    def infinite(cls, heuristic: bool = False) -> "ExtendedMass":
        return cls(math.inf, heuristic)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    @property
    def reciprocal(self) -> float:
        return 1.0 / self.value if self.is_finite else 0.0

    def to_json(self):
        return {"finite": self.is_finite,
                "value": self.value if self.is_finite else None,
                "heuristic": self.heuristic}


class OccupancyLaw:
    """Limit law of the total relative time along a line."""

    is_infinite: bool = False

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class AlmostSurelyInfinite(OccupancyLaw):
    is_infinite = True

    def to_json(self) -> dict:
        return {"kind": "AlmostSurelyInfinite"}


@dataclass(frozen=True)
class Mixture(OccupancyLaw):
    """Point mass ``atom_weight`` at zero, exponential(rate) otherwise."""

    atom_weight: float
    rate: float

    def __post_init__(self):
        if not (0.0 <= self.atom_weight <= 1.0):
            raise ValueError(f"atom weight {self.atom_weight!r} outside [0, 1]")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive and finite, got {self.rate!r}")

    @property
    def mean(self) -> float:
        return (1.0 - self.atom_weight) / self.rate

    def moment(self, p: int) -> float:
        return (1.0 - self.atom_weight) * math.factorial(p) / self.rate ** p

    def laplace(self, lam: float) -> float:
        w = 1.0 - self.atom_weight
        return w * self.rate / (self.rate + lam) + self.atom_weight

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        out = self.atom_weight + (1.0 - self.atom_weight) * -np.expm1(-self.rate * np.maximum(v, 0.0))
        return np.where(v < 0, 0.0, out)

    def to_json(self) -> dict:
        return {"kind": "Mixture", "atom_weight": self.atom_weight, "rate": self.rate,
                "mean": self.mean}


def exponential(rate: float) -> Mixture:
    return Mixture(0.0, rate)
