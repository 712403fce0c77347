"""Step-size schedules for the learning updates.

One family is supported: inverse-power decay

    value(k) = 1 / (scale * (k + 1)) ** exponent,   capped at 1.0.

Indexing starts at k + 1 so value(0) is defined (1/k^e is not). The
exponent is restricted to (0.5, 1]: that is exactly the range where the
sequence is square-summable but not summable, which the convergence
analysis of both learner families assumes. ``assumption_flags`` exposes
those properties as metadata so a scenario validation report can state
them without re-deriving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class StepSchedule:
    """Deterministic step-size sequence value(k), k = 0, 1, 2, ..."""

    kind: str
    scale: float
    exponent: float

    def __post_init__(self):
        if self.kind != "power":
            raise DomainError(f"unknown schedule kind {self.kind!r}")
        if not self.scale > 0:
            raise DomainError(f"schedule scale must be > 0, got {self.scale}")
        if not 0.5 < self.exponent <= 1.0:
            raise DomainError(
                f"schedule exponent must lie in (0.5, 1], got {self.exponent}"
            )

    def value(self, k: int) -> float:
        if k < 0:
            raise DomainError(f"schedule index must be >= 0, got {k}")
        v = 1.0 / (self.scale * (k + 1)) ** self.exponent
        return v if v < 1.0 else 1.0

    def assumption_flags(self) -> dict:
        """Decay properties the convergence analysis relies on.

        For 1/(scale*(k+1))^e with e in (0.5, 1]: the sequence decays to 0,
        diverges in sum (e <= 1), and converges in squared sum (e > 0.5) -
        all true by construction, recorded here as schedule metadata.
        """
        return {
            "decays_to_zero": True,
            "sum_diverges": self.exponent <= 1.0,
            "sum_of_squares_converges": self.exponent > 0.5,
        }

    def limit_ratio_to(self, other: "StepSchedule") -> float | None:
        """lim_k value(k) / other.value(k), or None if it is 0 or infinite.

        Finite and positive exactly when the exponents match, in which case
        the ratio is (other.scale / self.scale) ** exponent. A None means
        the two schedules decay at incomparable rates.
        """
        if self.exponent != other.exponent:
            return None
        return (other.scale / self.scale) ** self.exponent


def make_schedule(kind: str, scale: float, exponent: float) -> StepSchedule:
    """Construct a schedule, validating domain constraints."""
    return StepSchedule(kind=kind, scale=scale, exponent=exponent)


def power_schedule(scale: float = 1.0, exponent: float = 0.96) -> StepSchedule:
    return make_schedule("power", scale, exponent)


def limit_ratio(num: StepSchedule, den: StepSchedule) -> float | None:
    """Convenience wrapper: lim num.value(k)/den.value(k) (None if 0/inf)."""
    return num.limit_ratio_to(den)


def normalized_rate_ratio(
    a1: StepSchedule, a2: StepSchedule
) -> tuple[float | None, float | None]:
    """(raw ratio lim a1/a2, ratio normalized into (0, 1]).

    The two-timescale analysis labels agents so the ratio lies in (0, 1];
    when the raw ratio exceeds 1 the normalized value is its reciprocal
    (the agent labels swap roles in the bounds). Both are None when the
    schedules are incomparable.
    """
    raw = a1.limit_ratio_to(a2)
    if raw is None:
        return None, None
    norm = raw if raw <= 1.0 else 1.0 / raw
    return raw, norm


def _schedule_sanity(s: StepSchedule, k_max: int = 1000) -> bool:
    """Monotone non-increasing and in (0, 1] over a prefix - test hook."""
    prev = math.inf
    for k in range(k_max):
        v = s.value(k)
        if not (0.0 < v <= 1.0 and v <= prev):
            return False
        prev = v
    return True
