"""Exception types shared across the package.

Three failure classes are kept distinct so callers (and the CLI exit-code
mapping) can tell malformed inputs apart from out-of-domain parameters and
from solver breakdowns.
"""

from __future__ import annotations


class GameStructureError(ValueError):
    """A game, config, or trace object is structurally invalid.

    Examples: payoff matrix shape mismatch, kernel row not summing to one,
    zero-sum flag contradicted by the reward tables.
    """


class DomainError(ValueError):
    """A parameter lies outside the domain a formula or rule requires.

    Examples: temperature <= 0 where a smoothed response is mandatory,
    discount factor outside the validity region of a bound.
    """


class NumericalError(RuntimeError):
    """An iterative solver failed to reach its tolerance.

    Carries the final residual so callers can report how close it got.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual
