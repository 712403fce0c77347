"""Response maps and exact value operators for finite matrix games.

The simulation side of the package only ever needs four primitives:

* Shannon entropy of a mixed strategy,
* (epsilon-)best-response sets of a payoff vector,
* the smoothed (softmax) best response at temperature tau,
* exact game values - the plain minimax value and its entropy-regularized
  counterpart, each returned with the optimal strategy pair and a
  certificate residual.

The minimax value is solved as a pair of linear programs (HiGHS). The
regularized value is the saddle point of

    x' M y + tau_x * H(x) - tau_y * H(y),   x maximizing, y minimizing,

whose optimality conditions are mutual softmax responses. That fixed-point
system is solved by Newton's method on q-space variables (qx = M y,
qy = -M' x) with a temperature homotopy: start at a temperature high
enough that the damped response iteration is a contraction, then anneal
down to the target temperatures with Newton polishing at each level. The
Jacobian of the q-space system is I - K with K spectrally purely
imaginary, so the Newton systems are nonsingular at every temperature;
plain damped iteration, by contrast, spirals outward once the temperature
is small relative to the payoff scale, which is exactly the regime the
simulations run in.

A side with temperature exactly zero is handled by flooring it at
1e-9 / log(n): the induced value error is at most floor * log(n) <= 1e-9,
far below every tolerance used downstream, and the homotopy path stays
smooth. When both temperatures are zero the LP route is used directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError, NumericalError

__all__ = [
    "ValueCertificate",
    "ValueBoundsReport",
    "entropy",
    "best_response_set",
    "smoothed_best_response",
    "minimax_value",
    "regularized_value",
    "check_value_bounds",
]


@dataclass(frozen=True)
class ValueCertificate:
    """Game value with the strategy pair that attains it.

    residual measures how far the pair is from exact optimality: the
    primal-dual gap for the LP route, the infinity-norm fixed-point
    residual of the mutual-softmax conditions for the regularized route.
    """

    value: float
    maximizer: np.ndarray
    minimizer: np.ndarray
    residual: float


@dataclass(frozen=True)
class ValueBoundsReport:
    """Outcome of the exact/regularized value consistency checks."""

    sum_bounds_ok: bool
    sandwich_ok: bool
    worst_violation: float
    values: dict


def entropy(p: Sequence[float]) -> float:
    """Shannon entropy -sum p log p, with 0 log 0 = 0. Natural log.

    Bounded by log(len(p)) on the simplex. Entries may carry tiny negative
    rounding noise; anything below -1e-9 is rejected.
    """
    h = 0.0
    for x in p:
        if x < 0.0:
            if x < -1e-9:
                raise DomainError(f"negative probability {x} in entropy()")
            continue
        if x > 0.0:
            h -= x * math.log(x)
    return h


def best_response_set(q: Sequence[float], eps: float = 0.0) -> set[int]:
    """Indices within eps of the maximum of q."""
    if eps < 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    top = max(q)
    return {i for i, v in enumerate(q) if v >= top - eps}


def _argmax_lowest(q: Sequence[float]) -> int:
    """Lowest index attaining max(q) - the deterministic tie-break rule."""
    best = 0
    top = q[0]
    for i in range(1, len(q)):
        if q[i] > top:
            top = q[i]
            best = i
    return best


def _softmax_list(q: Sequence[float], tau: float) -> list[float]:
    # max-subtraction keeps every exponent <= 0, so no overflow for any tau
    top = max(q)
    es = [math.exp((v - top) / tau) for v in q]
    z = 0.0
    for e in es:
        z += e
    return [e / z for e in es]


def smoothed_best_response(q: Sequence[float], tau: float) -> np.ndarray:
    """softmax(q / tau) over action indices.

    Requires tau > 0. Every entry is at least exp(-2 max|q| / tau) / n, so
    the result has full support regardless of how peaked q is.
    """
    if not tau > 0:
        raise DomainError(f"smoothed best response needs tau > 0, got {tau}")
    if len(q) == 0:
        raise DomainError("empty payoff vector")
    return np.asarray(_softmax_list([float(v) for v in q], tau))


def response_distribution(q: Sequence[float], tau: float) -> list[float]:
    """The agent's play distribution at estimate q: softmax for tau > 0,
    the lowest-index exact best response as a one-hot for tau = 0."""
    if tau > 0.0:
        return _softmax_list([float(v) for v in q], tau)
    out = [0.0] * len(q)
    out[_argmax_lowest(q)] = 1.0
    return out


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DomainError(f"payoff matrix must be 2-d and non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("payoff matrix contains non-finite entries")
    return a


def _clean_simplex(x: np.ndarray) -> np.ndarray:
    x = np.maximum(x, 0.0)
    return x / x.sum()


def minimax_value(payoffs) -> ValueCertificate:
    """Exact value of the matrix game max_x min_y x' M y.

    Solved as two LPs (the maximizer's and the minimizer's side) with
    HiGHS; the certificate residual is the primal-dual gap of the returned
    strategy pair, max_a (M y)_a - min_b (M' x)_b >= 0.
    """
    m = _as_matrix(payoffs)
    nx, ny = m.shape
    lo, hi = float(m.min()), float(m.max())
    if hi - lo < 1e-15:
        # constant game: every strategy pair is optimal
        u_x = np.full(nx, 1.0 / nx)
        u_y = np.full(ny, 1.0 / ny)
        return ValueCertificate(value=lo, maximizer=u_x, minimizer=u_y, residual=0.0)

    # maximizer: variables (x, v); max v  s.t.  M' x >= v 1, sum x = 1
    c = np.zeros(nx + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-m.T, np.ones((ny, 1))])
    b_ub = np.zeros(ny)
    a_eq = np.zeros((1, nx + 1))
    a_eq[0, :nx] = 1.0
    bounds = [(0.0, 1.0)] * nx + [(lo, hi)]
    row = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if not row.success:
        raise NumericalError(f"maximizer LP failed: {row.message}")

    # minimizer: variables (y, u); min u  s.t.  M y <= u 1, sum y = 1
    c = np.zeros(ny + 1)
    c[-1] = 1.0
    a_ub = np.hstack([m, -np.ones((nx, 1))])
    b_ub = np.zeros(nx)
    a_eq = np.zeros((1, ny + 1))
    a_eq[0, :ny] = 1.0
    bounds = [(0.0, 1.0)] * ny + [(lo, hi)]
    col = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if not col.success:
        raise NumericalError(f"minimizer LP failed: {col.message}")

    x = _clean_simplex(np.asarray(row.x[:nx]))
    y = _clean_simplex(np.asarray(col.x[:ny]))
    gap = float((m @ y).max() - (m.T @ x).min())
    gap = max(gap, abs(float(row.x[-1]) - float(col.x[-1])))
    if gap > 1e-6:
        raise NumericalError("minimax LP pair failed to certify optimality", residual=gap)
    value = 0.5 * (float(row.x[-1]) + float(col.x[-1]))
    return ValueCertificate(value=value, maximizer=x, minimizer=y, residual=gap)


# floor used in place of an exactly-zero temperature on one side; the value
# error it introduces is bounded by floor * log(n) <= 1e-9
_TAU_FLOOR_BUDGET = 1e-9


def _saddle_softmax(q: np.ndarray, tau: float) -> np.ndarray:
    top = q.max()
    e = np.exp((q - top) / tau)
    return e / e.sum()


def _fixed_point_residual(m, x, y, tau_x, tau_y) -> float:
    rx = np.abs(x - _saddle_softmax(m @ y, tau_x)).max()
    ry = np.abs(y - _saddle_softmax(-(m.T @ x), tau_y)).max()
    return float(max(rx, ry))


def _newton_level(m, qx, qy, tau_x, tau_y, tol, max_iter=80):
    """Newton on F = (qx - M y(qy), qy + M' x(qx)) at fixed temperatures."""
    nx, ny = m.shape
    eye = np.eye(nx + ny)
    best = math.inf
    for _ in range(max_iter):
        x = _saddle_softmax(qx, tau_x)
        y = _saddle_softmax(qy, tau_y)
        f = np.concatenate([qx - m @ y, qy + m.T @ x])
        res = float(np.abs(f).max())
        if res < best:
            best = res
        if res <= tol:
            break
        dx = (np.diag(x) - np.outer(x, x)) / tau_x
        dy = (np.diag(y) - np.outer(y, y)) / tau_y
        jac = eye.copy()
        jac[:nx, nx:] = -m @ dy
        jac[nx:, :nx] = m.T @ dx
        step_dir = np.linalg.solve(jac, -f)
        fnorm = float(np.linalg.norm(f))
        step = 1.0
        while step > 1e-8:
            qx_n = qx + step * step_dir[:nx]
            qy_n = qy + step * step_dir[nx:]
            x_n = _saddle_softmax(qx_n, tau_x)
            y_n = _saddle_softmax(qy_n, tau_y)
            f_n = np.concatenate([qx_n - m @ y_n, qy_n + m.T @ x_n])
            if float(np.linalg.norm(f_n)) <= (1.0 - 1e-4 * step) * fnorm:
                break
            step *= 0.5
        qx = qx + step * step_dir[:nx]
        qy = qy + step * step_dir[nx:]
    return qx, qy, best


def _solve_saddle(m, eff_x, eff_y, qx0=None, qy0=None):
    """Drive the q-space system to its fixed point; returns (qx, qy, res).

    Temperatures must already be positive (flooring happens upstream). A
    warm start is tried with Newton directly at the target temperatures;
    without one, or if it stalls, the solve anneals down from a hot
    temperature where the damped response iteration contracts. Raises
    NumericalError if the residual cannot be brought below 1e-10 * scale.
    """
    nx, ny = m.shape
    scale = max(1.0, float(np.abs(m).max()))
    final_tol = 1e-12 * scale
    # Near the floor temperature the Newton system's conditioning grows like
    # scale/eff, which caps the attainable residual; keep the acceptance bar
    # proportionate so an honestly converged stiff solve is not rejected.
    accept_tol = 1e-10 * scale * max(1.0, 1e-6 / min(eff_x, eff_y))

    if qx0 is not None and qy0 is not None:
        qx, qy, res = _newton_level(
            m,
            np.asarray(qx0, dtype=float),
            np.asarray(qy0, dtype=float),
            eff_x,
            eff_y,
            final_tol,
            max_iter=40,
        )
        if res <= accept_tol:
            return qx, qy, res
        # stale warm start; fall through to the annealed cold path

    spectral = float(np.linalg.norm(m, 2)) if min(nx, ny) > 1 else float(np.abs(m).max())
    t_hot = max(eff_x, eff_y, 2.0 * spectral, 1.0)

    # hot start: uniform responses, then damped iteration while it contracts
    qx = m @ np.full(ny, 1.0 / ny)
    qy = -(m.T @ np.full(nx, 1.0 / nx))
    for _ in range(50):
        x = _saddle_softmax(qx, max(eff_x, t_hot))
        y = _saddle_softmax(qy, max(eff_y, t_hot))
        qx_t, qy_t = m @ y, -(m.T @ x)
        if max(np.abs(qx_t - qx).max(), np.abs(qy_t - qy).max()) < 1e-3 * scale:
            qx, qy = qx_t, qy_t
            break
        qx = 0.5 * qx + 0.5 * qx_t
        qy = 0.5 * qy + 0.5 * qy_t

    inner_tol = 1e-9 * scale
    t = t_hot
    while True:
        lx, ly = max(eff_x, t), max(eff_y, t)
        at_target = lx == eff_x and ly == eff_y
        qx, qy, res = _newton_level(
            m, qx, qy, lx, ly, final_tol if at_target else inner_tol
        )
        if at_target:
            break
        t /= 5.0

    if res > accept_tol:
        raise NumericalError(
            f"regularized saddle solve stalled at residual {res:.3e}", residual=res
        )
    return qx, qy, res


def _effective_temperatures(nx: int, ny: int, tau_x: float, tau_y: float) -> tuple[float, float]:
    eff_x = tau_x if tau_x > 0 else _TAU_FLOOR_BUDGET / max(1.0, math.log(max(nx, 2)))
    eff_y = tau_y if tau_y > 0 else _TAU_FLOOR_BUDGET / max(1.0, math.log(max(ny, 2)))
    return eff_x, eff_y


def regularized_value(payoffs, tau_x: float, tau_y: float) -> ValueCertificate:
    """Value and saddle point of the entropy-regularized game.

    tau_x regularizes the maximizer (entropy bonus), tau_y the minimizer
    (entropy penalty on the quantity being minimized). Both zero reduces
    to ``minimax_value``. With both positive the returned pair is the
    unique mutual-softmax fixed point; with exactly one zero that side is
    solved at the 1e-9/log(n) floor temperature, which perturbs the value
    by at most 1e-9.
    """
    if tau_x < 0 or tau_y < 0:
        raise DomainError(f"temperatures must be >= 0, got ({tau_x}, {tau_y})")
    m = _as_matrix(payoffs)
    if tau_x == 0.0 and tau_y == 0.0:
        return minimax_value(m)

    nx, ny = m.shape
    eff_x, eff_y = _effective_temperatures(nx, ny, tau_x, tau_y)
    qx, qy, _ = _solve_saddle(m, eff_x, eff_y)
    x = _saddle_softmax(qx, eff_x)
    y = _saddle_softmax(qy, eff_y)
    value = float(x @ m @ y) + tau_x * entropy(x) - tau_y * entropy(y)
    return ValueCertificate(
        value=value,
        maximizer=x,
        minimizer=y,
        residual=_fixed_point_residual(m, x, y, eff_x, eff_y),
    )


def check_value_bounds(game, tau_1: float, tau_2: float, tol: float = 1e-6) -> ValueBoundsReport:
    """Consistency checks tying the two agents' values together.

    For payoff matrices M1 (agent 1) and M2 (agent 2), let S = M1 + M2'
    measure the deviation from zero-sum. The checks are:

    * min(S) - tol <= val(M1) + val(M2) <= max(S) + tol, and the same for
      the regularized values at (tau_1, tau_2);
    * per agent, the regularized value stays within the entropy envelope
      of the exact one:
      -tau_j log(n_j) - tol <= reg_i - val_i <= tau_i log(n_i) + tol.

    Returns which groups hold and the largest one-sided violation.
    """
    m1 = _as_matrix(game.payoffs1)
    m2 = _as_matrix(game.payoffs2)
    if m1.shape != m2.T.shape:
        raise DomainError(f"payoff shapes incompatible: {m1.shape} vs {m2.shape}")
    n1, n2 = m1.shape
    s = m1 + m2.T
    r_lo, r_hi = float(s.min()), float(s.max())

    val1 = minimax_value(m1).value
    val2 = minimax_value(m2).value
    reg1 = regularized_value(m1, tau_1, tau_2).value
    reg2 = regularized_value(m2, tau_2, tau_1).value

    violations = [
        r_lo - (val1 + val2),
        (val1 + val2) - r_hi,
        r_lo - (reg1 + reg2),
        (reg1 + reg2) - r_hi,
    ]
    sum_bounds_ok = max(violations) <= tol

    sandwich_violations = [
        -tau_2 * math.log(n2) - (reg1 - val1),
        (reg1 - val1) - tau_1 * math.log(n1),
        -tau_1 * math.log(n1) - (reg2 - val2),
        (reg2 - val2) - tau_2 * math.log(n2),
    ]
    sandwich_ok = max(sandwich_violations) <= tol

    worst = max(0.0, max(violations + sandwich_violations))
    return ValueBoundsReport(
        sum_bounds_ok=sum_bounds_ok,
        sandwich_ok=sandwich_ok,
        worst_violation=worst,
        values={
            "val1": val1,
            "val2": val2,
            "reg1": reg1,
            "reg2": reg2,
            "sum_lo": r_lo,
            "sum_hi": r_hi,
        },
    )
