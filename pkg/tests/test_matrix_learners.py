"""One-shot game learners: branch selection, step clamping, draw accounting."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetgames import (
    DomainError,
    MatrixAgentConfig,
    SplitMix64,
    StageObservation,
    empirical_average_step,
    initial_state,
    power_schedule,
    select_action,
    smoothed_best_response,
    stage_update,
)

R = np.array([[1.0, -1.0], [-1.0, 1.0]])


def _cfg(**kw):
    base = dict(
        observe_prob=1.0,
        temperature=0.002,
        knows_payoffs=True,
        q_step=power_schedule(1.0, 0.9),
    )
    base.update(kw)
    return MatrixAgentConfig(**base)


def test_config_validation():
    with pytest.raises(DomainError):
        _cfg(observe_prob=1.2)
    with pytest.raises(DomainError):
        _cfg(temperature=-0.1)
    # exact best response needs full information
    with pytest.raises(DomainError):
        _cfg(temperature=0.0, observe_prob=0.5)
    with pytest.raises(DomainError):
        _cfg(temperature=0.0, knows_payoffs=False)
    assert _cfg(temperature=0.0).temperature == 0.0


def test_initial_state():
    st0 = initial_state(3)
    assert st0.q == (0.0, 0.0, 0.0)
    assert st0.k == 0
    st1 = initial_state(2, q0=[0.5, -0.5])
    assert st1.q == (0.5, -0.5)
    with pytest.raises(DomainError):
        initial_state(2, q0=[1.0])


def test_observation_requires_action():
    with pytest.raises(DomainError):
        StageObservation(own_action=0, reward=1.0, opponent_observed=True)


def test_exact_best_response_is_deterministic_lowest_index():
    cfg = _cfg(temperature=0.0)
    rng = SplitMix64(1)
    before = rng.state
    state = initial_state(2, q0=[2.0, 2.0])  # tie
    assert select_action(state, cfg, True, rng) == 0
    assert rng.state == before  # no draw consumed
    state = initial_state(2, q0=[0.0, 1.0])
    assert select_action(state, cfg, True, rng) == 1


def test_smoothed_selection_consumes_one_draw():
    cfg = _cfg()
    a = SplitMix64(9)
    b = SplitMix64(9)
    select_action(initial_state(2), cfg, True, a)
    b.next_uint64()
    assert a.state == b.state


def test_smoothed_selection_matches_softmax_frequencies():
    cfg = _cfg(temperature=0.5)
    state = initial_state(2, q0=[0.3, -0.3])
    mu = smoothed_best_response(state.q, 0.5)
    rng = SplitMix64(40)
    n = 60_000
    hits = sum(select_action(state, cfg, True, rng) == 0 for _ in range(n))
    se = float(np.sqrt(mu[0] * (1 - mu[0]) / n))
    assert abs(hits / n - mu[0]) < 4 * se


def test_belief_branch_steps_every_coordinate():
    cfg = _cfg()
    state = initial_state(2, q0=[0.2, 0.2])
    obs = StageObservation(own_action=0, reward=1.0, opponent_observed=True, opponent_action=1)
    new = stage_update(state, cfg, R, obs)
    alpha = cfg.q_step.value(0)
    # target is the opponent-action column of the payoff table
    want = tuple(v + alpha * (c - v) for v, c in zip(state.q, R[:, 1]))
    assert new.q == pytest.approx(want, rel=1e-12)
    assert new.k == 1


def test_payoff_branch_touches_only_played_coordinate():
    cfg = _cfg(observe_prob=0.0, knows_payoffs=False)
    state = initial_state(2, q0=[0.1, -0.4])
    obs = StageObservation(own_action=1, reward=-1.0, opponent_observed=False)
    new = stage_update(state, cfg, None, obs)
    assert new.q[0] == state.q[0]
    mu = smoothed_best_response(state.q, cfg.temperature)
    step = min(1.0, cfg.q_step.value(0) / mu[1])
    assert new.q[1] == pytest.approx(state.q[1] + step * (-1.0 - state.q[1]), rel=1e-12)


def test_payoff_branch_without_observation_even_if_model_known():
    # knowing the table is not enough; the update needs the opponent action
    cfg = _cfg(observe_prob=0.0)
    state = initial_state(2, q0=[0.0, 0.0])
    obs = StageObservation(own_action=0, reward=1.0, opponent_observed=False)
    new = stage_update(state, cfg, R, obs)
    assert new.q[1] == 0.0
    assert new.q[0] != 0.0


def test_belief_update_requires_table():
    cfg = _cfg()
    obs = StageObservation(own_action=0, reward=1.0, opponent_observed=True, opponent_action=0)
    with pytest.raises(DomainError):
        stage_update(initial_state(2), cfg, None, obs)


def test_importance_step_clamped_to_one():
    # improbable action: alpha / mu(a) blows past 1 and must clamp
    cfg = _cfg(observe_prob=0.0, knows_payoffs=False, temperature=0.01)
    state = initial_state(2, q0=[1.0, 0.0])  # mu(1) ~ e^-100
    obs = StageObservation(own_action=1, reward=0.7, opponent_observed=False)
    new = stage_update(state, cfg, None, obs)
    assert new.q[1] == pytest.approx(0.7)  # step 1 lands exactly on the target


@given(
    st.lists(st.floats(min_value=-1, max_value=1), min_size=2, max_size=4),
    st.integers(min_value=0, max_value=3),
    st.integers(min_value=0, max_value=500),
)
@settings(max_examples=80)
def test_payoff_branch_stays_in_reward_hull(q0, action, k):
    # q entries are convex averages of the current value and a reward in
    # [-1, 1], so they can never escape the hull
    from dataclasses import replace

    n = len(q0)
    action = action % n
    cfg = _cfg(observe_prob=0.0, knows_payoffs=False, temperature=0.1)
    state = replace(initial_state(n, q0=q0), k=k)
    obs = StageObservation(own_action=action, reward=0.5, opponent_observed=False)
    new = stage_update(state, cfg, None, obs)
    for v in new.q:
        assert -1.0 - 1e-12 <= v <= 1.0 + 1e-12


def test_long_run_belief_tracking_vs_static_opponent():
    # against a fixed observed column the estimate converges to it
    cfg = _cfg()
    state = initial_state(2)
    for _ in range(5000):
        obs = StageObservation(own_action=0, reward=1.0, opponent_observed=True, opponent_action=0)
        state = stage_update(state, cfg, R, obs)
    np.testing.assert_allclose(state.q, R[:, 0], atol=1e-2)


def test_average_step_moves_toward_played_action():
    avg = (0.5, 0.5)
    out = empirical_average_step(avg, 0, 0.1)
    assert out == pytest.approx((0.55, 0.45), rel=1e-12)
    assert sum(out) == pytest.approx(1.0, abs=1e-12)


def test_average_step_validates_range():
    with pytest.raises(DomainError):
        empirical_average_step((0.5, 0.5), 0, 1.1)
    with pytest.raises(DomainError):
        empirical_average_step((0.5, 0.5), 0, -0.1)


@given(
    st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=5),
    st.data(),
)
def test_average_step_preserves_simplex(weights, data):
    total = sum(weights)
    avg = tuple(w / total for w in weights)
    a = data.draw(st.integers(min_value=0, max_value=len(avg) - 1))
    step = data.draw(st.floats(min_value=0.0, max_value=1.0))
    out = empirical_average_step(avg, a, step)
    assert sum(out) == pytest.approx(1.0, abs=1e-9)
    assert all(v >= 0.0 for v in out)
