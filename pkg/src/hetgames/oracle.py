"""Exact equilibrium computation and closed-form convergence bounds.

``shapley_iterate`` computes the discounted value of a zero-sum stochastic
game by value iteration on the per-state stage games: v <- val(r + gamma
P v) is a gamma-contraction in the sup norm, so stopping once successive
iterates move less than tol * (1 - gamma) / (2 gamma) certifies
||v - v*|| <= tol / 2. Equilibrium stage matrices and stationary
strategies are read off the converged values, and an independent policy
evaluation (dense linear solve against the induced Markov chain) is
available to cross-check them.

The bound calculators translate run parameters into the widths of the
long-run guarantees the diagnostics compare against:

* ``value_gap_bound``: asymptotic |v_t - v*| band for two smoothed
  learners whose step-size ratio converges to d in (0, 1]; valid for
  gamma < d/2. (Derivations exist with the stricter domain gamma <
  d/(2 lambda) for a weighting constant lambda slightly above 1; the
  implemented form is the stated d - 2 gamma denominator.)
* ``near_equilibrium_bounds``: per-agent band on long-run average payoff
  around the regularized value when the payoff tables deviate from
  zero-sum by at most ``deviation`` (max-norm of P1 + P2').
* ``fixed_opponent_value_bound``: |v_t - v*| band for a single smoothed
  learner against a stationary opponent, gamma < 1/2; v* is the value of
  the induced Markov decision process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GameStructureError, NumericalError
from .games import StochasticGame
from .responses import minimax_value

__all__ = [
    "EquilibriumSolution",
    "shapley_iterate",
    "global_q_from_values",
    "policy_evaluation",
    "restrict_to_fixed_opponent",
    "value_gap_bound",
    "near_equilibrium_bounds",
    "fixed_opponent_value_bound",
]


@dataclass(frozen=True)
class EquilibriumSolution:
    """Converged values, stage matrices, and stationary strategies.

    v1/v2: per-state values (v2 = -v1); q1: (S, |A1|, |A2|) stage
    matrices for agent 1, q2 the agent-2 counterpart (q2 = -q1 transposed
    per state); pi1/pi2: stationary equilibrium strategies; residual:
    sup-norm one-step change at termination; iterations: sweeps used.
    """

    v1: np.ndarray
    v2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray
    residual: float
    iterations: int


def _require_zero_sum(game: StochasticGame):
    if not game.is_zero_sum():
        raise GameStructureError(
            "equilibrium oracle requires a zero-sum game (rewards1 + rewards2' = 0)"
        )


def global_q_from_values(game: StochasticGame, v, agent: int) -> np.ndarray:
    """Stage matrices r + gamma * E_p[v] from a per-state value vector.

    agent 1 -> (S, |A1|, |A2|); agent 2 -> (S, |A2|, |A1|), using that
    agent's own reward table and the kernel viewed own-action-first.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (game.n_states,):
        raise GameStructureError(f"value vector has shape {v.shape}, expected ({game.n_states},)")
    cont = game.kernel @ v  # (S, |A1|, |A2|)
    if agent == 1:
        return game.rewards1 + game.gamma * cont
    if agent == 2:
        return game.rewards2 + game.gamma * np.transpose(cont, (0, 2, 1))
    raise DomainError(f"agent must be 1 or 2, got {agent}")


def shapley_iterate(game: StochasticGame, tol: float = 1e-9, max_iter: int = 100_000) -> EquilibriumSolution:
    """Value iteration with exact stage-game solves, to sup-norm error tol/2."""
    _require_zero_sum(game)
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    gamma = game.gamma
    n_states = game.n_states
    v = np.zeros(n_states)
    # contraction argument: ||v_n - v*|| <= gamma/(1-gamma) * change
    stop = tol * (1.0 - gamma) / (2.0 * gamma) if gamma > 0 else math.inf
    change = math.inf
    iterations = 0
    while iterations < max_iter:
        q1 = global_q_from_values(game, v, agent=1)
        v_next = np.array([minimax_value(q1[s]).value for s in range(n_states)])
        change = float(np.abs(v_next - v).max())
        v = v_next
        iterations += 1
        if gamma == 0.0 or change <= stop:
            break
    else:
        raise NumericalError(
            f"value iteration did not converge in {max_iter} sweeps", residual=change
        )

    q1 = global_q_from_values(game, v, agent=1)
    q2 = global_q_from_values(game, -v, agent=2)
    pi1 = np.empty((n_states, game.n_actions[0]))
    pi2 = np.empty((n_states, game.n_actions[1]))
    for s in range(n_states):
        cert = minimax_value(q1[s])
        pi1[s] = cert.maximizer
        pi2[s] = cert.minimizer
    return EquilibriumSolution(
        v1=v, v2=-v, q1=q1, q2=q2, pi1=pi1, pi2=pi2, residual=change, iterations=iterations
    )


def policy_evaluation(game: StochasticGame, pi1, pi2) -> tuple[np.ndarray, np.ndarray]:
    """Exact discounted values of a stationary strategy pair.

    Solves (I - gamma P_pi) u = r_pi per agent with a dense linear solve;
    independent of the value-iteration route, so it serves as its
    cross-check.
    """
    pi1 = np.asarray(pi1, dtype=float)
    pi2 = np.asarray(pi2, dtype=float)
    n_states = game.n_states
    n1, n2 = game.n_actions
    if pi1.shape != (n_states, n1) or pi2.shape != (n_states, n2):
        raise GameStructureError(
            f"strategy shapes {pi1.shape}/{pi2.shape} incompatible with game"
        )
    # joint action distribution per state: (S, |A1|, |A2|)
    joint = pi1[:, :, None] * pi2[:, None, :]
    p_pi = np.einsum("sab,sabt->st", joint, game.kernel)
    r1_pi = np.einsum("sab,sab->s", joint, game.rewards1)
    r2_pi = np.einsum("sab,sba->s", joint, game.rewards2)
    lhs = np.eye(n_states) - game.gamma * p_pi
    u1 = np.linalg.solve(lhs, r1_pi)
    u2 = np.linalg.solve(lhs, r2_pi)
    return u1, u2


def restrict_to_fixed_opponent(game: StochasticGame, strategy, opponent: int = 2) -> StochasticGame:
    """Collapse one agent to a fixed stationary strategy.

    Returns a game where the chosen opponent has a single action whose
    rewards and transitions are the strategy-weighted averages; solving it
    solves the Markov decision process the remaining agent faces.
    """
    strategy = np.asarray(strategy, dtype=float)
    n_states = game.n_states
    n1, n2 = game.n_actions
    if strategy.ndim == 2 and (
        strategy.min() < 0.0 or np.abs(strategy.sum(axis=1) - 1.0).max() > 1e-9
    ):
        raise DomainError("strategy rows must be distributions over actions")
    if opponent == 2:
        if strategy.shape != (n_states, n2):
            raise GameStructureError(f"strategy shape {strategy.shape}, expected {(n_states, n2)}")
        r1 = np.einsum("sab,sb->sa", game.rewards1, strategy)[:, :, None]
        r2 = np.einsum("sba,sb->sa", game.rewards2, strategy)[:, None, :]
        kernel = np.einsum("sabt,sb->sat", game.kernel, strategy)[:, :, None, :]
        return StochasticGame(rewards1=r1, rewards2=r2, kernel=kernel, gamma=game.gamma)
    if opponent == 1:
        if strategy.shape != (n_states, n1):
            raise GameStructureError(f"strategy shape {strategy.shape}, expected {(n_states, n1)}")
        r1 = np.einsum("sab,sa->sb", game.rewards1, strategy)[:, None, :]
        r2 = np.einsum("sba,sa->sb", game.rewards2, strategy)[:, :, None]
        kernel = np.einsum("sabt,sa->sbt", game.kernel, strategy)[:, None, :, :]
        return StochasticGame(rewards1=r1, rewards2=r2, kernel=kernel, gamma=game.gamma)
    raise DomainError(f"opponent must be 1 or 2, got {opponent}")


def value_gap_bound(
    d: float, gamma: float, tau_1: float, tau_2: float, n_actions_1: int, n_actions_2: int
) -> float:
    """Asymptotic |v_t - v*| band width for two smoothed learners.

    d is the limit ratio of the two q-step schedules normalized into
    (0, 1]; requires gamma in [0, d/2). Zero temperatures give a zero
    band: exact best responses introduce no smoothing bias.
    """
    if not 0.0 < d <= 1.0:
        raise DomainError(f"step-ratio d must lie in (0, 1], got {d}")
    if not 0.0 <= gamma < d / 2.0:
        raise DomainError(f"gamma must lie in [0, d/2) = [0, {d / 2.0}), got {gamma}")
    if tau_1 < 0 or tau_2 < 0:
        raise DomainError("temperatures must be >= 0")
    if n_actions_1 < 1 or n_actions_2 < 1:
        raise DomainError("action counts must be >= 1")
    smoothing = tau_1 * math.log(n_actions_1) + tau_2 * math.log(n_actions_2)
    coeff = (2.0 * d + 2.0 * gamma - 3.0 * gamma * d) / ((1.0 - gamma) * (d - 2.0 * gamma))
    return coeff * smoothing


def near_equilibrium_bounds(d: float, deviation: float) -> dict:
    """Per-agent (lower, upper) band on long-run payoff minus regularized value.

    deviation is the max-norm of payoffs1 + payoffs2'; the faster agent
    (index 1 by the d <= 1 normalization) has rate weight 1, the slower
    one weight d. Upper width scales with the agent's own weight, lower
    width with the opponent's.
    """
    if not 0.0 < d <= 1.0:
        raise DomainError(f"step-ratio d must lie in (0, 1], got {d}")
    if deviation < 0:
        raise DomainError(f"deviation must be >= 0, got {deviation}")
    weights = {1: 1.0, 2: d}
    out = {}
    for agent in (1, 2):
        other = 2 if agent == 1 else 1
        upper = (2.0 / weights[agent]) * deviation
        lower = -2.0 * (1.0 + 1.0 / weights[other]) * deviation
        out[agent] = (lower, upper)
    return out


def fixed_opponent_value_bound(gamma: float, tau: float, n_actions: int) -> float:
    """|v_t - v*| band for one smoothed learner against a stationary opponent.

    v* is the induced MDP's optimum; requires gamma in [0, 1/2).
    """
    if not 0.0 <= gamma < 0.5:
        raise DomainError(f"gamma must lie in [0, 1/2), got {gamma}")
    if tau < 0:
        raise DomainError(f"temperature must be >= 0, got {tau}")
    if n_actions < 1:
        raise DomainError("action count must be >= 1")
    return (2.0 - gamma) * tau * math.log(n_actions) / ((1.0 - gamma) * (1.0 - 2.0 * gamma))
