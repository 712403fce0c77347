"""Trajectory diagnostics: distance-to-saddle quantities logged along runs.

For an agent holding local estimate q against an opponent whose empirical
play average is pi, the response gap

    delta = max_mu { mu' q + tau_own H(mu) } - tau_opp H(pi) - val_reg

measures how much the agent's smoothed best response to its own estimate
overshoots the regularized game value. At the regularized saddle with a
consistent estimate (q equal to the payoff matrix applied to the
opponent's strategy) delta is exactly zero.

The composite quantity

    V = (L1 + d L2 - c)_+ + tracking_1 + tracking_2,
    L_i = delta_i + tracking_i,

with c a ceiling that absorbs deviation from zero-sum, is nonnegative by
construction and shrinks toward zero as both agents' estimates settle on
the saddle. Along trajectories its windowed running maximum tends to
decrease; that is a heuristic reading of the long-run behavior, not a
per-step guarantee, and the test suite checks it only with slack.

delta_i dominates tracking_i along trajectories of the learning dynamics
(once q tracks the payoff-times-average target); it is not an algebraic
identity over arbitrary (q, pi) snapshots, so nothing here enforces it at
construction. The run-level tests assert it on logged rows.

Values here are pure functions of snapshots. The one stateful helper is
``WarmStartSaddle``, which caches the previous saddle iterate so that
logging points along a slowly moving trajectory re-solve the regularized
value in a couple of Newton steps instead of a full temperature anneal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .responses import (
    ValueCertificate,
    _as_matrix,
    _effective_temperatures,
    _fixed_point_residual,
    _saddle_softmax,
    _solve_saddle,
    entropy,
    minimax_value,
    regularized_value,
)

__all__ = [
    "DiagnosticSample",
    "LyapunovBreakdown",
    "tracking_error",
    "soft_value",
    "response_gap",
    "gap_ceiling",
    "lyapunov_value",
    "regularized_payoff",
    "best_regularized_payoff",
    "WarmStartSaddle",
]


@dataclass(frozen=True)
class DiagnosticSample:
    """One logged snapshot of the trajectory diagnostics.

    state is None for matrix-game runs. value_gap carries per-agent
    |v - v*| vectors for stochastic-game runs, None otherwise.
    """

    k: int
    state: Optional[int]
    delta: tuple
    c: float
    lyapunov: float
    tracking_error: tuple
    value_gap: Optional[tuple] = None


@dataclass(frozen=True)
class LyapunovBreakdown:
    """The composite diagnostic and every term it is assembled from."""

    value: float
    l1: float
    l2: float
    c: float
    delta: tuple
    tracking: tuple


def tracking_error(q, payoffs, pi) -> float:
    """Euclidean distance between q and the payoff response target.

    ||q - R pi||_2 with R the agent's own payoff matrix (own actions as
    rows) and pi the opponent's strategy or empirical average.
    """
    q = np.asarray(q, dtype=float)
    r = np.asarray(payoffs, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return float(np.linalg.norm(q - r @ pi))


def soft_value(q: Sequence[float], tau: float) -> float:
    """max_mu { mu' q + tau H(mu) }: plain max at tau = 0, otherwise the
    temperature-scaled log-sum-exp of q."""
    if tau < 0:
        raise DomainError(f"temperature must be >= 0, got {tau}")
    vals = [float(v) for v in q]
    top = max(vals)
    if tau == 0.0:
        return top
    z = 0.0
    for v in vals:
        z += math.exp((v - top) / tau)
    return top + tau * math.log(z)


def response_gap(
    q,
    pi_opp,
    tau_own: float,
    tau_opp: float,
    regularized_val: float,
    mu=None,
) -> float:
    """delta: smoothed best-response payoff at q minus the value benchmark.

    mu' q + tau_own H(mu) - tau_opp H(pi_opp) - regularized_val, with mu
    the agent's response rule applied to q when not given explicitly
    (softmax for tau_own > 0, lowest-index argmax for tau_own = 0).
    regularized_val is the regularized value of the matrix q estimates
    (the agent's payoff matrix, or its current global stage matrix).
    """
    if mu is None:
        own_term = soft_value(q, tau_own)
    else:
        own_term = 0.0
        for m_a, q_a in zip(mu, q):
            own_term += float(m_a) * float(q_a)
        own_term += tau_own * entropy([float(m_a) for m_a in mu])
    return own_term - tau_opp * entropy([float(p) for p in pi_opp]) - regularized_val


def _regularized_pair(payoffs1, payoffs2, tau_1, tau_2, regularized_vals):
    if regularized_vals is not None:
        return float(regularized_vals[0]), float(regularized_vals[1])
    v1 = regularized_value(payoffs1, tau_1, tau_2).value
    v2 = regularized_value(payoffs2, tau_2, tau_1).value
    return v1, v2


def gap_ceiling(
    payoffs1,
    payoffs2,
    tau_1: float,
    tau_2: float,
    lam: float = 1.001,
    regularized_vals=None,
) -> float:
    """c: the deviation ceiling the composite diagnostic is measured against.

    lam * max|P1 + P2'| - (val_reg_1 + val_reg_2), lam > 1. Exactly zero
    for zero-sum matrices (the value sum vanishes with the deviation).
    Accepts either a game's two payoff matrices or a pair of per-state
    stage matrices; regularized_vals short-circuits the two value solves
    when the caller already has them.
    """
    if not lam > 1.0:
        raise DomainError(f"ceiling weight lam must be > 1, got {lam}")
    m1 = _as_matrix(payoffs1)
    m2 = _as_matrix(payoffs2)
    if m1.shape != m2.T.shape:
        raise DomainError(f"payoff shapes incompatible: {m1.shape} vs {m2.shape}")
    deviation = float(np.abs(m1 + m2.T).max())
    v1, v2 = _regularized_pair(m1, m2, tau_1, tau_2, regularized_vals)
    return lam * deviation - (v1 + v2)


def lyapunov_value(
    q1,
    pi2,
    q2,
    pi1,
    payoffs1,
    payoffs2,
    tau_1: float,
    tau_2: float,
    d: float = 1.0,
    lam: float = 1.001,
    regularized_vals=None,
) -> LyapunovBreakdown:
    """The composite diagnostic V and its parts.

    q_i is agent i's local estimate, pi_j the opponent average it is
    responding to, d in (0, 1] the normalized ratio of the two agents'
    step schedules. Returns the breakdown; .value is

        (L1 + d L2 - c)_+ + tracking_1 + tracking_2

    which is >= 0 always and >= each tracking error alone.
    """
    if not 0.0 < d <= 1.0:
        raise DomainError(f"step-ratio d must lie in (0, 1], got {d}")
    m1 = _as_matrix(payoffs1)
    m2 = _as_matrix(payoffs2)
    val1, val2 = _regularized_pair(m1, m2, tau_1, tau_2, regularized_vals)
    tr1 = tracking_error(q1, m1, pi2)
    tr2 = tracking_error(q2, m2, pi1)
    d1 = response_gap(q1, pi2, tau_1, tau_2, val1)
    d2 = response_gap(q2, pi1, tau_2, tau_1, val2)
    l1 = d1 + tr1
    l2 = d2 + tr2
    c = gap_ceiling(m1, m2, tau_1, tau_2, lam, regularized_vals=(val1, val2))
    value = max(0.0, l1 + d * l2 - c) + tr1 + tr2
    return LyapunovBreakdown(value=value, l1=l1, l2=l2, c=c, delta=(d1, d2), tracking=(tr1, tr2))


def regularized_payoff(pi_own, payoffs_own, pi_opp, tau_own: float) -> float:
    """Entropy-regularized payoff of playing pi_own against pi_opp:
    pi_own' R pi_opp + tau_own H(pi_own)."""
    pi_own = np.asarray(pi_own, dtype=float)
    r = _as_matrix(payoffs_own)
    pi_opp = np.asarray(pi_opp, dtype=float)
    return float(pi_own @ r @ pi_opp) + tau_own * entropy(pi_own)


def best_regularized_payoff(payoffs_own, pi_opp, tau_own: float) -> float:
    """max over own strategies of the entropy-regularized payoff.

    Linear-plus-entropy maximization has the softmax closed form, so this
    is just the soft value of R pi_opp at tau_own.
    """
    r = _as_matrix(payoffs_own)
    pi_opp = np.asarray(pi_opp, dtype=float)
    return soft_value(r @ pi_opp, tau_own)


class WarmStartSaddle:
    """Regularized-value solver that restarts from its previous solution.

    Stage matrices along a trajectory drift by one step-size per stage,
    so at logging resolution the previous saddle is an excellent Newton
    starting point: a couple of corrector steps replace the full
    temperature anneal of a cold solve. Dedicate one instance per
    (agent, state) stream; instances are stateful and single-threaded.
    A shape change or a stalled warm start silently falls back to the
    cold path.
    """

    __slots__ = ("_qx", "_qy")

    def __init__(self):
        self._qx = None
        self._qy = None

    def solve(self, payoffs, tau_x: float, tau_y: float) -> ValueCertificate:
        if tau_x < 0 or tau_y < 0:
            raise DomainError(f"temperatures must be >= 0, got ({tau_x}, {tau_y})")
        m = _as_matrix(payoffs)
        if tau_x == 0.0 and tau_y == 0.0:
            return minimax_value(m)
        nx, ny = m.shape
        if self._qx is not None and (len(self._qx) != nx or len(self._qy) != ny):
            self._qx = None
            self._qy = None
        eff_x, eff_y = _effective_temperatures(nx, ny, tau_x, tau_y)
        qx, qy, _ = _solve_saddle(m, eff_x, eff_y, self._qx, self._qy)
        self._qx = qx
        self._qy = qy
        x = _saddle_softmax(qx, eff_x)
        y = _saddle_softmax(qy, eff_y)
        value = float(x @ m @ y) + tau_x * entropy(x) - tau_y * entropy(y)
        return ValueCertificate(
            value=value,
            maximizer=x,
            minimizer=y,
            residual=_fixed_point_residual(m, x, y, eff_x, eff_y),
        )
