"""Per-stage learning updates for repeated matrix games.

Each agent keeps a payoff estimate q over its own actions and refreshes it
with a decaying step size after every stage. Two information regimes share
one update form q <- q + a * (target - q), differing in target and in the
per-action step vector a:

* belief update (opponent action observed and own payoff table known):
  the target is the payoff column against the observed opponent action,
  and every coordinate moves with the full step alpha_k - classical
  fictitious-play belief averaging in payoff space.
* payoff update (anything less): only the played action's coordinate
  moves, toward the realized reward, with the step renormalized by the
  play probability - min(1, alpha_k / mu(a)) - so that on average each
  coordinate still drifts at rate alpha_k toward its expected payoff.

Action selection is the exact best response (lowest index on ties) when
the temperature is zero, otherwise a sample from the softmax response.
A zero temperature is only coherent with full observation and a known
payoff table; the config constructor enforces that.

The empirical mixed strategy of an agent is averaged with the *opponent's*
step schedule: the averaging that the convergence analysis couples q to
weighs agent i's actions exactly at the rate the opponent updates with,
so the harness's trackers take the cross schedule, not the agent's own.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .errors import DomainError
from .responses import _argmax_lowest, _softmax_list
from .rng import SplitMix64
from .schedules import StepSchedule

__all__ = [
    "MatrixAgentConfig",
    "MatrixAgentState",
    "StageObservation",
    "initial_state",
    "select_action",
    "stage_update",
    "empirical_average_step",
]


@dataclass(frozen=True)
class MatrixAgentConfig:
    """Information regime and hyperparameters of one matrix-game learner.

    observe_prob: per-stage probability of observing the opponent's action.
    temperature: softmax temperature; 0 means exact best response.
    knows_payoffs: whether the agent can evaluate its own payoff table.
    q_step: step-size schedule for the payoff-estimate update.
    """

    observe_prob: float
    temperature: float
    knows_payoffs: bool
    q_step: StepSchedule

    def __post_init__(self):
        if not 0.0 <= self.observe_prob <= 1.0:
            raise DomainError(f"observe_prob must lie in [0, 1], got {self.observe_prob}")
        if self.temperature < 0.0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature}")
        if self.temperature == 0.0 and (self.observe_prob < 1.0 or not self.knows_payoffs):
            raise DomainError(
                "temperature 0 (exact best response) requires observe_prob = 1 and a "
                "known payoff table; smoothed responses (temperature > 0) are mandatory "
                "for payoff-only or partially observing agents"
            )


@dataclass(frozen=True)
class MatrixAgentState:
    """q: payoff estimate per own action; k: stages completed."""

    q: tuple
    k: int = 0


@dataclass(frozen=True)
class StageObservation:
    """What one agent saw in one stage."""

    own_action: int
    reward: float
    opponent_observed: bool
    opponent_action: Optional[int] = None

    def __post_init__(self):
        if self.opponent_observed and self.opponent_action is None:
            raise DomainError("opponent_observed without an opponent_action")


def initial_state(n_actions: int, q0: Optional[Sequence[float]] = None) -> MatrixAgentState:
    if q0 is None:
        return MatrixAgentState(q=(0.0,) * n_actions, k=0)
    if len(q0) != n_actions:
        raise DomainError(f"q0 has length {len(q0)}, expected {n_actions}")
    return MatrixAgentState(q=tuple(float(v) for v in q0), k=0)


def select_action(
    state: MatrixAgentState,
    cfg: MatrixAgentConfig,
    will_observe: bool,
    rng: SplitMix64,
) -> int:
    """Pick this stage's action from the current payoff estimate.

    Exact best response (deterministic, no draw consumed) only in the
    fully-informed branch with temperature 0; every other combination
    samples the softmax response (one draw).
    """
    if will_observe and cfg.knows_payoffs and cfg.temperature == 0.0:
        return _argmax_lowest(state.q)
    if cfg.temperature <= 0.0:
        raise DomainError("sampling branch reached with temperature 0")
    return rng.categorical(_softmax_list(state.q, cfg.temperature))


def stage_update(
    state: MatrixAgentState,
    cfg: MatrixAgentConfig,
    payoffs_own,
    obs: StageObservation,
) -> MatrixAgentState:
    """One q refresh from this stage's observation; returns the new state.

    Belief branch (opponent observed and payoffs known): target is the
    column payoffs_own[:, opponent_action], every coordinate steps with
    alpha_k. Payoff branch: only the played coordinate steps toward the
    realized reward, with step min(1, alpha_k / mu(own_action)) where mu
    is the softmax response the action was drawn from.
    """
    alpha = cfg.q_step.value(state.k)
    q = state.q
    if obs.opponent_observed and cfg.knows_payoffs:
        if payoffs_own is None:
            raise DomainError("belief update requires the agent's payoff table")
        col = payoffs_own[:, obs.opponent_action] if hasattr(payoffs_own, "ndim") else [
            row[obs.opponent_action] for row in payoffs_own
        ]
        new_q = tuple(v + alpha * (float(c) - v) for v, c in zip(q, col))
    else:
        mu = _softmax_list(q, cfg.temperature)
        a = obs.own_action
        step = alpha / mu[a]
        if step > 1.0:
            step = 1.0
        new_q = tuple(
            v + step * (obs.reward - v) if i == a else v for i, v in enumerate(q)
        )
    return replace(state, q=new_q, k=state.k + 1)


def empirical_average_step(avg: Sequence[float], action: int, step: float) -> tuple:
    """avg + step * (one_hot(action) - avg).

    ``step`` is the cross schedule value: when maintaining agent i's
    empirical strategy, pass opponent j's schedule evaluated at the same
    stage (see module docstring).
    """
    if not 0.0 <= step <= 1.0:
        raise DomainError(f"averaging step must lie in [0, 1], got {step}")
    return tuple(
        v + step * ((1.0 if i == action else 0.0) - v) for i, v in enumerate(avg)
    )
