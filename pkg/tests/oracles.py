"""Independent reference implementations the test suite checks against.

Everything here is deliberately slow and simple: grid search instead of
linear programming, brute-force closure instead of Tarjan, a pure-Python
trial loop instead of the compiled kernel. None of it imports private
solver internals; agreements between these and the package are therefore
meaningful evidence.
"""

from __future__ import annotations

import itertools

import numpy as np

from hetgames import (
    SplitMix64,
    derive_trial_seed,
    empirical_average_step,
)
from hetgames.harness import ScenarioConfig, _avg_schedules, _draw_observation
from hetgames.sg_learners import (
    advance,
    initial_state,
    record_stage,
    select_action,
)


_GRID_CACHE: dict = {}


def _simplex_grid(n: int, step: float) -> np.ndarray:
    """All points of the n-simplex with coordinates on a step lattice."""
    key = (n, step)
    if key in _GRID_CACHE:
        return _GRID_CACHE[key]
    m = round(1.0 / step)
    if n == 2:
        i = np.arange(m + 1)
        grid = np.stack([i, m - i], axis=1) / m
    elif n == 3:
        i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        keep = i + j <= m
        i, j = i[keep], j[keep]
        grid = np.stack([i, j, m - i - j], axis=1) / m
    else:
        raise ValueError(f"grid search supports 2 or 3 actions, got {n}")
    _GRID_CACHE[key] = grid
    return grid


def grid_minimax(payoffs, step: float = 1e-3):
    """Minimax value of a zero-sum matrix by simplex grid search.

    Exhaustive over the row player's mixed strategies on a grid of the
    given resolution (2 and 3 actions only); the inner minimization is
    exact (pure responses suffice). Accurate to O(step * payoff range).
    """
    m = np.asarray(payoffs, dtype=float)
    grid = _simplex_grid(m.shape[0], step)
    return float((grid @ m).min(axis=1).max())


def support_enumeration_value(payoffs):
    """Zero-sum value via support enumeration (exact, small matrices).

    For each support pair, solve the indifference system and keep the
    solution that is a valid equilibrium; the value is unique even when
    the strategies are not.
    """
    m = np.asarray(payoffs, dtype=float)
    n_r, n_c = m.shape
    for rows in _supports(n_r):
        for cols in _supports(n_c):
            sol = _try_support(m, rows, cols)
            if sol is not None:
                return sol
    raise RuntimeError("support enumeration failed (no valid support pair)")


def _supports(n):
    for size in range(1, n + 1):
        yield from itertools.combinations(range(n), size)


def _try_support(m, rows, cols):
    n_r, n_c = m.shape
    k_r, k_c = len(rows), len(cols)
    # unknowns: x on rows, y on cols, value v; indifference inside the
    # support, equality constraints for the simplex
    a = np.zeros((k_r + k_c + 2, k_r + k_c + 1))
    b = np.zeros(k_r + k_c + 2)
    for i, c in enumerate(cols):
        a[i, :k_r] = m[rows, c]
        a[i, -1] = -1.0
    for i, r in enumerate(rows):
        a[k_c + i, k_r:k_r + k_c] = m[r, cols]
        a[k_c + i, -1] = -1.0
    a[k_r + k_c, :k_r] = 1.0
    b[k_r + k_c] = 1.0
    a[k_r + k_c + 1, k_r:k_r + k_c] = 1.0
    b[k_r + k_c + 1] = 1.0
    sol, residual, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.linalg.norm(a @ sol - b) > 1e-8:
        return None
    x = np.zeros(n_r)
    y = np.zeros(n_c)
    x[list(rows)] = sol[:k_r]
    y[list(cols)] = sol[k_r:k_r + k_c]
    v = sol[-1]
    if x.min() < -1e-9 or y.min() < -1e-9:
        return None
    x = np.clip(x, 0.0, None)
    y = np.clip(y, 0.0, None)
    x /= x.sum()
    y /= y.sum()
    # saddle check: no profitable pure deviation either way
    if (m @ y).max() > v + 1e-7:
        return None
    if (x @ m).min() < v - 1e-7:
        return None
    return float(v)


def transitive_closure_connected(n: int, edges) -> bool:
    """Strong connectivity by brute-force boolean closure."""
    reach = np.eye(n, dtype=bool)
    for u, v in edges:
        reach[u, v] = True
    for _ in range(n):
        reach = reach | (reach @ reach)
    return bool(reach.all())


def reference_sg_trial(cfg: ScenarioConfig, trial_id: int):
    """Pure-Python stochastic-game trial on the public per-stage ops.

    Reproduces the compiled runner's semantics exactly: start state 0,
    zero estimates, uniform play averages, the documented per-stage draw
    order, and a final fold of the last stage's experience. Returns a
    dict of final arrays plus per-logged-row value estimates and
    counters, all built from plain Python floats for bitwise comparison.
    """
    game = cfg.game
    n_states = game.n_states
    n1, n2 = game.n_actions
    spec1, spec2 = cfg.agents
    kern1 = game.kernel
    kern2 = game.kernel.transpose(0, 2, 1, 3)
    r1 = game.rewards1
    r2 = game.rewards2
    gamma = game.gamma

    rng = SplitMix64(derive_trial_seed(cfg.base_seed, trial_id))
    st1 = None if spec1.is_fixed else initial_state(n_states, n1)
    st2 = None if spec2.is_fixed else initial_state(n_states, n2)
    cfg1 = None if spec1.is_fixed else spec1.sg_config()
    cfg2 = None if spec2.is_fixed else spec2.sg_config()
    strat1 = cfg.fixed_rows(0)
    strat2 = cfg.fixed_rows(1)
    avg1 = [[1.0 / n1] * n1 for _ in range(n_states)]
    avg2 = [[1.0 / n2] * n2 for _ in range(n_states)]
    counters = [0] * n_states
    avg_sched1, avg_sched2 = _avg_schedules(cfg)
    cur = 0
    pending_s = None  # state of the not-yet-folded stage

    def fold():
        nonlocal st1, st2, pending_s
        if pending_s is None:
            return
        if st1 is not None:
            st1 = advance(st1, cfg1, r1, kern1, gamma, cur)
        if st2 is not None:
            st2 = advance(st2, cfg2, r2, kern2, gamma, cur)
        counters[pending_s] += 1
        pending_s = None

    rows_v = []
    rows_counters = []
    for k in range(cfg.horizon):
        if k % cfg.log_interval == 0:
            fold()
            rows_v.append((
                None if st1 is None else tuple(st1.v),
                None if st2 is None else tuple(st2.v),
            ))
            rows_counters.append(tuple(counters))
        fold()
        s = cur
        t_s = counters[s]
        obs1 = _draw_observation(spec1, rng)
        obs2 = _draw_observation(spec2, rng)
        if st1 is not None:
            a1 = select_action(st1, cfg1, s, obs1, rng)
        else:
            a1 = rng.categorical(list(strat1[s]))
        if st2 is not None:
            a2 = select_action(st2, cfg2, s, obs2, rng)
        else:
            a2 = rng.categorical(list(strat2[s]))
        avg1[s] = list(empirical_average_step(avg1[s], a1, avg_sched1.value(t_s)))
        avg2[s] = list(empirical_average_step(avg2[s], a2, avg_sched2.value(t_s)))
        rr1 = float(r1[s, a1, a2])
        rr2 = float(r2[s, a2, a1])
        sn = rng.categorical(kern1[s, a1, a2])
        if st1 is not None:
            st1 = record_stage(st1, s, a1, a2 if obs1 else None, rr1)
        if st2 is not None:
            st2 = record_stage(st2, s, a2, a1 if obs2 else None, rr2)
        pending_s = s
        cur = sn
    fold()

    return {
        "q1": None if st1 is None else st1.q,
        "q2": None if st2 is None else st2.q,
        "v1": None if st1 is None else st1.v,
        "v2": None if st2 is None else st2.v,
        "counters": tuple(counters),
        "avg1": tuple(tuple(row) for row in avg1),
        "avg2": tuple(tuple(row) for row in avg2),
        "rng_state": rng.state,
        "rows_v": rows_v,
        "rows_counters": rows_counters,
        "final_state": cur,
    }
