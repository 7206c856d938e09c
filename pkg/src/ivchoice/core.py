"""Compliance types, type shares, outcome means and the ATE decomposition.

Arithmetic here is plain Python so that exact number types
(``fractions.Fraction``) pass through unchanged.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from typing import Optional

from .errors import InvalidConfig, MissingNonidentifiedMean

SHARE_TOL = 1e-12


class ComplianceType(enum.Enum):
    ALWAYS_TAKER = "always_taker"
    NEVER_TAKER = "never_taker"
    COMPLIER = "complier"


@dataclass(frozen=True)
class TypeShares:
    """Population shares of always-takers, never-takers and compliers."""

    pi_a: float
    pi_n: float
    pi_c: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (0 <= v <= 1):
                raise InvalidConfig(f"{f.name} must lie in [0, 1], got {v!r}")
        total = self.pi_a + self.pi_n + self.pi_c
        if abs(total - 1) > SHARE_TOL:
            raise InvalidConfig(f"type shares must sum to 1, got {total!r}")

    @classmethod
    def from_an(cls, pi_a: float, pi_n: float) -> "TypeShares":
        return cls(pi_a, pi_n, 1 - pi_a - pi_n)

    def as_tuple(self) -> tuple:
        return (self.pi_a, self.pi_n, self.pi_c)

    def __getitem__(self, kind: ComplianceType) -> float:
        return {
            ComplianceType.ALWAYS_TAKER: self.pi_a,
            ComplianceType.NEVER_TAKER: self.pi_n,
            ComplianceType.COMPLIER: self.pi_c,
        }[kind]


@dataclass(frozen=True)
class OutcomeRange:
    y_lo: float = 0.0
    y_hi: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.y_lo) and math.isfinite(self.y_hi)):
            raise InvalidConfig("outcome range must be finite")
        if not self.y_lo < self.y_hi:
            raise InvalidConfig(f"need y_lo < y_hi, got [{self.y_lo}, {self.y_hi}]")

    @property
    def width(self) -> float:
        return self.y_hi - self.y_lo

    def contains(self, value: float) -> bool:
        return self.y_lo <= value <= self.y_hi

    def clamp(self, value: float) -> float:
        return min(max(value, self.y_lo), self.y_hi)


_MEAN_SLOTS = ("mu_a1", "mu_n0", "mu_c1", "mu_c0", "mu_a0", "mu_n1")


@dataclass(frozen=True)
class OutcomeMeans:
    """Mean potential outcomes by compliance type and treatment arm.

    ``None`` marks an absent slot. ``mu_a0`` and ``mu_n1`` are never
    identified from data; the identified slots are ``None`` only for a group
    with zero share (undefined mean).
    """

    mu_a1: Optional[float]
    mu_n0: Optional[float]
    mu_c1: Optional[float]
    mu_c0: Optional[float]
    mu_a0: Optional[float] = None
    mu_n1: Optional[float] = None
    outcome_range: Optional[OutcomeRange] = None

    def __post_init__(self):
        for slot in _MEAN_SLOTS:
            v = getattr(self, slot)
            if v is None:
                continue
            if not math.isfinite(v):
                raise InvalidConfig(f"{slot} must be finite, got {v!r}")
            if self.outcome_range is not None and not self.outcome_range.contains(v):
                raise InvalidConfig(
                    f"{slot}={v!r} outside outcome range "
                    f"[{self.outcome_range.y_lo}, {self.outcome_range.y_hi}]"
                )

    @property
    def has_nonidentified(self) -> bool:
        return self.mu_a0 is not None and self.mu_n1 is not None

    def with_nonidentified(self, mu_a0: float, mu_n1: float) -> "OutcomeMeans":
        return OutcomeMeans(
            self.mu_a1, self.mu_n0, self.mu_c1, self.mu_c0,
            mu_a0=mu_a0, mu_n1=mu_n1, outcome_range=self.outcome_range,
        )

    def identified_only(self) -> "OutcomeMeans":
        return OutcomeMeans(
            self.mu_a1, self.mu_n0, self.mu_c1, self.mu_c0,
            outcome_range=self.outcome_range,
        )


@dataclass(frozen=True)
class WelfareSpec:
    """Per-capita cost of treating, in outcome units."""

    cost: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.cost):
            raise InvalidConfig(f"cost must be finite, got {self.cost!r}")


def _contrast(share, treated, control, label):
    # A group with zero share contributes nothing even when its means are undefined.
    if share == 0:
        return 0 * share
    if treated is None or control is None:
        raise InvalidConfig(f"{label} means undefined but share is {share!r}")
    return share * (treated - control)


def ate_decompose(shares: TypeShares, means: OutcomeMeans) -> float:
    """Population ATE as the share-weighted sum of type-specific effects.

    Raises
    ------
    MissingNonidentifiedMean
        If ``mu_a0`` or ``mu_n1`` is absent.
    """
    if means.mu_a0 is None or means.mu_n1 is None:
        raise MissingNonidentifiedMean(
            "ate_decompose needs mu_a0 and mu_n1; supply them or use bounds"
        )
    return (
        _contrast(shares.pi_c, means.mu_c1, means.mu_c0, "complier")
        + _contrast(shares.pi_a, means.mu_a1, means.mu_a0, "always-taker")
        + _contrast(shares.pi_n, means.mu_n1, means.mu_n0, "never-taker")
    )


def welfare_gain(shares: TypeShares, means: OutcomeMeans, spec: WelfareSpec) -> float:
    """Per-capita welfare of treat-all minus treat-none."""
    return ate_decompose(shares, means) - spec.cost
