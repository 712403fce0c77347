"""Per-stage learning updates for discounted stochastic games.

Each agent keeps, per state, a payoff estimate q(s, .) over its own
actions, a scalar value estimate v(s), and a visit counter t(s). Updates
are delayed by one stage: the experience collected at stage k-1 is folded
in at the start of stage k, before acting, so the continuation value of
the *current* state enters the payoff-based target, mirroring one-step
lookahead. Stage 0 has nothing pending and only acts.

Update for the previous state s (counters index the schedules, not the
global stage):

* model branch (opponent action observed and model known): target per own
  action a is r(s, a, a_opp) + gamma * sum_s' p(s' | s, a, a_opp) v(s'),
  every coordinate stepping with alpha_t.
* payoff branch: only the played coordinate steps toward
  r_{k-1} + gamma * v(s_k), with the probability-renormalized step
  min(1, alpha_t / mu(a)).

Then v(s) steps with beta_t toward mu' q(s, .) evaluated at the
*pre-update* q and the response distribution mu it induces (softmax for
positive temperature, the lowest-index best response - which equals the
action actually played - for temperature 0), and t(s) increments.

All tables are agent-relative: rewards (A_own, A_opp), kernel
(A_own, A_opp, S). The harness hands agent 2 transposed views.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .errors import DomainError
from .responses import _softmax_list, response_distribution
from .rng import SplitMix64
from .schedules import StepSchedule

__all__ = [
    "SGAgentConfig",
    "SGAgentState",
    "PendingStage",
    "initial_state",
    "model_target",
    "payoff_target",
    "local_q_update",
    "value_update",
    "advance",
    "select_action",
    "record_stage",
    "process_stage",
]


@dataclass(frozen=True)
class SGAgentConfig:
    """Information regime and hyperparameters of one stochastic-game learner."""

    observe_prob: float
    temperature: float
    knows_model: bool
    q_step: StepSchedule
    v_step: StepSchedule

    def __post_init__(self):
        if not 0.0 <= self.observe_prob <= 1.0:
            raise DomainError(f"observe_prob must lie in [0, 1], got {self.observe_prob}")
        if self.temperature < 0.0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature}")
        if self.temperature == 0.0 and (self.observe_prob < 1.0 or not self.knows_model):
            raise DomainError(
                "temperature 0 (exact best response) requires observe_prob = 1 and a "
                "known model; smoothed responses (temperature > 0) are mandatory for "
                "payoff-only or partially observing agents"
            )


@dataclass(frozen=True)
class PendingStage:
    """Experience from the previous stage, awaiting its delayed update."""

    state: int
    own_action: int
    reward: float
    opponent_action: Optional[int] = None  # None when not observed


@dataclass(frozen=True)
class SGAgentState:
    """q: per-state payoff estimates; v: value estimates; counters: visits
    already folded in per state (sum equals the current stage index)."""

    q: tuple
    v: tuple
    counters: tuple
    k: int = 0
    pending: Optional[PendingStage] = None


def initial_state(n_states: int, n_own_actions: int) -> SGAgentState:
    return SGAgentState(
        q=tuple((0.0,) * n_own_actions for _ in range(n_states)),
        v=(0.0,) * n_states,
        counters=(0,) * n_states,
        k=0,
        pending=None,
    )


def model_target(rewards_s, kernel_s, opp_action: int, v: Sequence[float], gamma: float) -> list[float]:
    """Per-own-action target r(s, ., a_opp) + gamma * E_p[v]; tables are
    state-s slices in agent-relative (A_own, A_opp[, S]) layout."""
    out = []
    n_states = len(v)
    for a in range(len(rewards_s)):
        cont = 0.0
        row = kernel_s[a][opp_action]
        for sp in range(n_states):
            cont += row[sp] * v[sp]
        out.append(float(rewards_s[a][opp_action]) + gamma * cont)
    return out


def payoff_target(reward: float, v_next: float, gamma: float) -> float:
    """Realized reward plus discounted value of the state that followed."""
    return reward + gamma * v_next


def local_q_update(q_s: Sequence[float], steps: Sequence[float], targets: Sequence[float]) -> tuple:
    """q + steps * (targets - q), coordinatewise; every step must lie in [0, 1]."""
    out = []
    for v, a, t in zip(q_s, steps, targets):
        if not 0.0 <= a <= 1.0:
            raise DomainError(f"q step {a} outside [0, 1]")
        out.append(v + a * (t - v))
    return tuple(out)


def value_update(v_s: float, target: float, beta: float) -> float:
    """v + beta * (target - v); beta in [0, 1] keeps v a convex average."""
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"v step {beta} outside [0, 1]")
    return v_s + beta * (target - v_s)


def advance(
    state: SGAgentState,
    cfg: SGAgentConfig,
    rewards_own,
    kernel_own,
    gamma: float,
    current_state: int,
) -> SGAgentState:
    """Fold in the pending stage's experience (no-op when nothing pends).

    current_state is where the agent stands *now*; its value estimate is
    the continuation term of the payoff-branch target.
    """
    pend = state.pending
    if pend is None:
        return state
    s = pend.state
    t = state.counters[s]
    alpha = cfg.q_step.value(t)
    beta = cfg.v_step.value(t)
    old_q_s = state.q[s]
    n = len(old_q_s)

    if pend.opponent_action is not None and cfg.knows_model:
        targets = model_target(rewards_own[s], kernel_own[s], pend.opponent_action, state.v, gamma)
        steps = [alpha] * n
    else:
        mu_play = _softmax_list(old_q_s, cfg.temperature)
        a = pend.own_action
        step = alpha / mu_play[a]
        if step > 1.0:
            step = 1.0
        steps = [0.0] * n
        steps[a] = step
        tgt = payoff_target(pend.reward, state.v[current_state], gamma)
        targets = [tgt] * n

    new_q_s = local_q_update(old_q_s, steps, targets)

    # value target reads the pre-update estimates
    mu = response_distribution(old_q_s, cfg.temperature)
    v_target = 0.0
    for m, qv in zip(mu, old_q_s):
        v_target += m * qv
    new_v_s = value_update(state.v[s], v_target, beta)

    q = tuple(new_q_s if i == s else row for i, row in enumerate(state.q))
    v = tuple(new_v_s if i == s else x for i, x in enumerate(state.v))
    counters = tuple(c + 1 if i == s else c for i, c in enumerate(state.counters))
    return replace(state, q=q, v=v, counters=counters, pending=None)


def select_action(
    state: SGAgentState,
    cfg: SGAgentConfig,
    current_state: int,
    will_observe: bool,
    rng: SplitMix64,
) -> int:
    """Action at the current state from its payoff estimate; exact best
    response (no draw) only in the fully-informed zero-temperature branch."""
    q_s = state.q[current_state]
    if will_observe and cfg.knows_model and cfg.temperature == 0.0:
        best = 0
        top = q_s[0]
        for i in range(1, len(q_s)):
            if q_s[i] > top:
                top = q_s[i]
                best = i
        return best
    if cfg.temperature <= 0.0:
        raise DomainError("sampling branch reached with temperature 0")
    return rng.categorical(_softmax_list(q_s, cfg.temperature))


def record_stage(
    state: SGAgentState,
    s: int,
    own_action: int,
    opponent_action: Optional[int],
    reward: float,
) -> SGAgentState:
    """Close the stage: store its experience for the next-stage update."""
    if state.pending is not None:
        raise DomainError("previous stage was never folded in")
    pend = PendingStage(state=s, own_action=own_action, reward=reward, opponent_action=opponent_action)
    return replace(state, pending=pend, k=state.k + 1)


def process_stage(
    state: SGAgentState,
    cfg: SGAgentConfig,
    rewards_own,
    kernel_own,
    gamma: float,
    current_state: int,
    will_observe: bool,
    rng: SplitMix64,
) -> tuple[int, SGAgentState]:
    """Delayed update, then action selection - one agent's half of a stage.

    The caller completes the stage with ``record_stage`` once the joint
    outcome (opponent action, reward) is known; selection here must not
    see any same-stage information, which is why the two halves are split.
    """
    advanced = advance(state, cfg, rewards_own, kernel_own, gamma, current_state)
    action = select_action(advanced, cfg, current_state, will_observe, rng)
    return action, advanced
