"""Scenario configuration, seeded trial execution, aggregation, persistence.

A scenario pairs a game with two agent specifications and run parameters.
Trials are deterministic functions of (base_seed, trial_id): each trial
owns a splitmix64 stream seeded by a documented derivation, and every
random decision consumes draws in a fixed per-stage order:

    1. agent 1's observation coin, only when 0 < observe_prob < 1
       (certain and impossible observations consume nothing);
    2. agent 2's observation coin, same rule;
    3. agent 1's action: one categorical draw for a sampling learner or a
       fixed player (fixed players always consume exactly one draw, even
       with a degenerate strategy), none for an exact best responder;
    4. agent 2's action, same rule;
    5. the next-state draw (stochastic games only).

Stochastic-game trials start in state 0, with zero payoff and value
estimates and uniform empirical averages; matrix-game trials start with
zero estimates and uniform averages. Empirical averages use the cross
schedule: agent i's play average steps with agent j's payoff-estimate
schedule (an agent facing a fixed opponent averages with its own).

The stochastic-game stage loop runs in a compiled kernel (bitwise
identical to the public per-stage operations; see ``_sg_kernel``) in
chunks of one logging interval; diagnostics are evaluated between chunks
on snapshots in which every completed stage has been folded in, so visit
counters sum to the stage index on every logged row. Matrix-game trials
run directly on the public operations.

Output layout for a persisted run: run.json (resolved config and derived
constants), trials/trial_<id>.csv (per-trial rows), aggregate.csv
(cross-trial mean/std), plot.svg. All CSV and JSON exports share one row
schema; floats are written in shortest round-trip form, so re-reading
them reproduces the in-memory values exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._version import __version__
from .diagnostics import (
    WarmStartSaddle,
    lyapunov_value,
    response_gap,
    soft_value,
    tracking_error,
)
from .errors import DomainError, GameStructureError, NumericalError
from .games import (
    GameValidationReport,
    MatrixGame,
    StochasticGame,
    build_reachability_graph,
    game_from_json,
    game_to_json,
    generate_random_zssg,
    is_strongly_connected,
    load_game,
    validate_matrix_game,
    validate_stochastic_game,
)
from .matrix_learners import (
    MatrixAgentConfig,
    StageObservation,
    empirical_average_step,
)
from .matrix_learners import initial_state as matrix_initial_state
from .matrix_learners import select_action as matrix_select_action
from .matrix_learners import stage_update
from .oracle import shapley_iterate, value_gap_bound
from .responses import regularized_value
from .rng import SplitMix64, derive_trial_seed
from .schedules import StepSchedule, make_schedule, normalized_rate_ratio, power_schedule
from .sg_learners import SGAgentConfig

__all__ = [
    "AgentSpec",
    "ScenarioConfig",
    "TrialTrace",
    "Aggregate",
    "ExperimentResult",
    "CSV_COLUMNS",
    "PRESET_NAMES",
    "preset_game",
    "scenario_preset",
    "scenario_from_json",
    "scenario_to_json",
    "load_scenario",
    "validate_config",
    "step_ratio_info",
    "access_label",
    "run_trial",
    "run_experiment",
    "aggregate_traces",
    "trace_rows",
    "aggregate_rows",
    "export",
    "write_trace_csv",
    "write_aggregate_csv",
    "read_csv_rows",
    "read_run",
]

CSV_COLUMNS = (
    "k",
    "state",
    "agent",
    "v_est_mean",
    "v_est_std",
    "v_star",
    "bound_lo",
    "bound_hi",
    "delta",
    "tracking_err",
    "lyapunov",
)

PRESET_NAMES = ("scenario1", "scenario2", "scenario3")

# seeds behind the shipped presets; frozen so preset runs are reproducible
PRESET_GAME_SEED = 8128
PRESET_BASE_SEED = 424242


def _default_v_step() -> StepSchedule:
    return power_schedule(1.0, 1.0)


@dataclass(frozen=True)
class AgentSpec:
    """One side of a scenario: a learner or a fixed stationary player.

    A learner is described by its information regime (observe_prob,
    knows_model), temperature and step schedules. Setting fixed_strategy
    (a distribution over own actions, per state for stochastic games)
    replaces all of that with stationary play; the learner fields are
    then ignored.
    """

    observe_prob: float = 1.0
    temperature: float = 0.002
    knows_model: bool = True
    q_step: StepSchedule = field(default_factory=power_schedule)
    v_step: StepSchedule = field(default_factory=_default_v_step)
    fixed_strategy: Optional[tuple] = None

    def __post_init__(self):
        if self.fixed_strategy is not None:
            object.__setattr__(self, "fixed_strategy", _freeze_strategy(self.fixed_strategy))
        else:
            # constructing the learner config enforces the regime invariants
            SGAgentConfig(
                observe_prob=self.observe_prob,
                temperature=self.temperature,
                knows_model=self.knows_model,
                q_step=self.q_step,
                v_step=self.v_step,
            )

    @property
    def is_fixed(self) -> bool:
        return self.fixed_strategy is not None

    def matrix_config(self) -> MatrixAgentConfig:
        if self.is_fixed:
            raise DomainError("fixed players have no learner config")
        return MatrixAgentConfig(
            observe_prob=self.observe_prob,
            temperature=self.temperature,
            knows_payoffs=self.knows_model,
            q_step=self.q_step,
        )

    def sg_config(self) -> SGAgentConfig:
        if self.is_fixed:
            raise DomainError("fixed players have no learner config")
        return SGAgentConfig(
            observe_prob=self.observe_prob,
            temperature=self.temperature,
            knows_model=self.knows_model,
            q_step=self.q_step,
            v_step=self.v_step,
        )


def _freeze_strategy(strategy) -> tuple:
    arr = np.asarray(strategy, dtype=float)
    if arr.ndim == 1:
        rows = arr[None, :]
    elif arr.ndim == 2:
        rows = arr
    else:
        raise DomainError(f"fixed strategy must be 1-d or 2-d, got shape {arr.shape}")
    if not np.all(np.isfinite(rows)) or np.any(rows < 0):
        raise DomainError("fixed strategy entries must be finite and >= 0")
    sums = rows.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise DomainError("each fixed strategy row must sum to 1")
    if arr.ndim == 1:
        return tuple(float(x) for x in arr)
    return tuple(tuple(float(x) for x in row) for row in rows)


def access_label(spec: AgentSpec) -> str:
    """Human-readable information regime, for legends and reports."""
    if spec.is_fixed:
        return "fixed strategy"
    if spec.observe_prob >= 1.0 and spec.knows_model:
        return "full information"
    if spec.observe_prob <= 0.0:
        return "payoff only"
    pct = int(round(100 * spec.observe_prob))
    if spec.knows_model:
        return f"observes {pct}% of stages"
    return f"observes {pct}% of stages, payoff updates"


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything needed to reproduce an experiment."""

    game: object
    agents: tuple
    horizon: int = 1_000_000
    n_trials: int = 30
    base_seed: int = PRESET_BASE_SEED
    log_interval: int = 1000
    lam: float = 1.001
    diagnostics_enabled: bool = True
    name: str = "custom"

    def __post_init__(self):
        if not isinstance(self.game, (MatrixGame, StochasticGame)):
            raise GameStructureError(f"game must be a matrix or stochastic game, got {type(self.game).__name__}")
        agents = tuple(self.agents)
        if len(agents) != 2 or not all(isinstance(a, AgentSpec) for a in agents):
            raise DomainError("agents must be a pair of AgentSpec")
        object.__setattr__(self, "agents", agents)
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if self.n_trials < 1:
            raise DomainError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.log_interval < 1:
            raise DomainError(f"log_interval must be >= 1, got {self.log_interval}")
        if not self.lam > 1.0:
            raise DomainError(f"lam must be > 1, got {self.lam}")
        if not 0 <= self.base_seed < 2**64:
            raise DomainError("base_seed must fit in an unsigned 64-bit integer")
        for idx, spec in enumerate(agents):
            if spec.fixed_strategy is not None:
                self._check_strategy_shape(idx, spec)

    def _check_strategy_shape(self, idx: int, spec: AgentSpec):
        n_own = self.game.n_actions[idx]
        strat = spec.fixed_strategy
        if isinstance(self.game, StochasticGame):
            rows = strat if isinstance(strat[0], tuple) else (strat,) * self.game.n_states
            if len(rows) != self.game.n_states or any(len(r) != n_own for r in rows):
                raise DomainError(
                    f"agent {idx + 1} fixed strategy must be ({self.game.n_states}, {n_own})"
                )
        else:
            if isinstance(strat[0], tuple):
                if len(strat) != 1:
                    raise DomainError(
                        f"agent {idx + 1} fixed strategy has {len(strat)} rows; "
                        "matrix games take a single distribution"
                    )
                strat = strat[0]
            if len(strat) != n_own:
                raise DomainError(f"agent {idx + 1} fixed strategy must have length {n_own}")

    def fixed_rows(self, idx: int) -> Optional[np.ndarray]:
        """Fixed strategy as a (n_states, n_own) array, or None for learners."""
        spec = self.agents[idx]
        if not spec.is_fixed:
            return None
        strat = spec.fixed_strategy
        n_states = self.game.n_states if isinstance(self.game, StochasticGame) else 1
        if isinstance(strat[0], tuple):
            return np.asarray(strat, dtype=float)
        return np.tile(np.asarray(strat, dtype=float), (n_states, 1))


def step_ratio_info(cfg: ScenarioConfig) -> dict:
    """Limit ratio of the two q-step schedules, normalized into (0, 1].

    Fixed agents or incomparable schedules (different exponents) have no
    ratio; diagnostics then fall back to d = 1 and record why.
    """
    s1, s2 = cfg.agents
    if s1.is_fixed or s2.is_fixed:
        return {"raw": None, "d": 1.0, "comparable": False, "reason": "fixed agent"}
    raw, norm = normalized_rate_ratio(s1.q_step, s2.q_step)
    if raw is None:
        return {"raw": None, "d": 1.0, "comparable": False, "reason": "exponents differ"}
    return {"raw": raw, "d": norm, "comparable": True, "reason": None}


def _reach_mode(spec: AgentSpec) -> str:
    if spec.is_fixed:
        rows = spec.fixed_strategy
        flat = [x for r in (rows if isinstance(rows[0], tuple) else (rows,)) for x in r]
        return "smoothed" if min(flat) > 0.0 else "best"
    return "best" if spec.temperature == 0.0 else "smoothed"


def validate_config(cfg: ScenarioConfig) -> GameValidationReport:
    """Semantic checks beyond the constructor invariants.

    Errors: invalid game tables; a disconnected reachability graph while
    an exact-best-response (temperature 0) learner is present. Everything
    else that merely weakens guarantees is a warning.
    """
    errors: list = []
    warnings_: list = []
    details: dict = {}
    if isinstance(cfg.game, StochasticGame):
        rep = validate_stochastic_game(cfg.game)
    else:
        rep = validate_matrix_game(cfg.game)
    errors.extend(rep.errors)
    warnings_.extend(rep.warnings)
    details.update(rep.details)

    info = step_ratio_info(cfg)
    details["step_ratio"] = info
    if all(s.is_fixed for s in cfg.agents):
        warnings_.append("both agents are fixed: nothing learns")
    elif not info["comparable"] and not any(s.is_fixed for s in cfg.agents):
        warnings_.append(
            "q-step schedules are not comparable (different exponents); diagnostics use d = 1"
        )

    if isinstance(cfg.game, StochasticGame):
        modes = tuple(_reach_mode(s) for s in cfg.agents)
        connected = is_strongly_connected(build_reachability_graph(cfg.game, modes))
        details["reachability"] = {"modes": modes, "strongly_connected": connected}
        zero_temp = any((not s.is_fixed) and s.temperature == 0.0 for s in cfg.agents)
        if not connected:
            msg = "state reachability graph is not strongly connected under the configured play modes"
            if zero_temp:
                errors.append(
                    msg + "; with a temperature-0 agent every state must remain mutually reachable"
                )
            else:
                warnings_.append(msg + "; some states may stop being visited")
        if info["comparable"] and not cfg.game.gamma < info["d"] / 2.0:
            warnings_.append(
                f"discount {cfg.game.gamma} is not below d/2 = {info['d'] / 2.0}; "
                "no long-run value band applies"
            )
    return GameValidationReport(ok=not errors, errors=errors, warnings=warnings_, details=details)


# ---------------------------------------------------------------------------
# presets


def preset_game() -> StochasticGame:
    """The shared 2-state, 2-action game all shipped scenarios run on."""
    return generate_random_zssg(
        n_states=2,
        n_actions=2,
        reward_ranges=((0.0, 1.0), (0.0, 0.2)),
        gamma=0.3,
        seed=PRESET_GAME_SEED,
    )


def _reference_learner(**overrides) -> AgentSpec:
    base = dict(
        observe_prob=1.0,
        temperature=0.002,
        knows_model=True,
        q_step=power_schedule(1.0, 0.96),
        v_step=power_schedule(1.0, 1.0),
    )
    base.update(overrides)
    return AgentSpec(**base)


def scenario_preset(name: str) -> ScenarioConfig:
    """Shipped scenarios: the same game under three information regimes.

    scenario1: full information vs payoff-only.
    scenario2: full information vs 50% observation.
    scenario3: both full information, agent 2 on faster schedules
    (q-step scale 0.92, v-step scale 0.96).
    """
    if name == "scenario1":
        agents = (
            _reference_learner(),
            _reference_learner(observe_prob=0.0, knows_model=False),
        )
    elif name == "scenario2":
        agents = (_reference_learner(), _reference_learner(observe_prob=0.5))
    elif name == "scenario3":
        agents = (
            _reference_learner(),
            _reference_learner(
                q_step=power_schedule(0.92, 0.96), v_step=power_schedule(0.96, 1.0)
            ),
        )
    else:
        raise DomainError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return ScenarioConfig(game=preset_game(), agents=agents, name=name)


# ---------------------------------------------------------------------------
# config wire format


def _schedule_to_json(s: StepSchedule) -> dict:
    return {"scale": s.scale, "exponent": s.exponent}


def _agent_to_json(spec: AgentSpec) -> dict:
    if spec.is_fixed:
        strat = spec.fixed_strategy
        return {"fixed": [list(r) for r in strat] if isinstance(strat[0], tuple) else list(strat)}
    return {
        "theta": spec.observe_prob,
        "tau": spec.temperature,
        "knows_model": spec.knows_model,
        "alpha": _schedule_to_json(spec.q_step),
        "beta": _schedule_to_json(spec.v_step),
    }


def _agent_from_json(d: dict) -> AgentSpec:
    if "fixed" in d:
        return AgentSpec(fixed_strategy=d["fixed"])
    alpha = d.get("alpha", {})
    beta = d.get("beta", {})
    return AgentSpec(
        observe_prob=float(d.get("theta", 1.0)),
        temperature=float(d.get("tau", 0.002)),
        knows_model=bool(d.get("knows_model", True)),
        q_step=make_schedule("power", float(alpha.get("scale", 1.0)), float(alpha.get("exponent", 0.96))),
        v_step=make_schedule("power", float(beta.get("scale", 1.0)), float(beta.get("exponent", 1.0))),
    )


def scenario_to_json(cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name,
        "game": game_to_json(cfg.game),
        "agents": [_agent_to_json(a) for a in cfg.agents],
        "horizon": cfg.horizon,
        "n_trials": cfg.n_trials,
        "base_seed": cfg.base_seed,
        "log_interval": cfg.log_interval,
        "lambda": cfg.lam,
        "diagnostics": cfg.diagnostics_enabled,
    }


def scenario_from_json(data: dict, base_dir: str = ".") -> ScenarioConfig:
    if "game" in data:
        game = game_from_json(data["game"])
    elif "game_file" in data:
        game = load_game(os.path.join(base_dir, data["game_file"]))
    else:
        raise DomainError("scenario needs a 'game' object or a 'game_file' path")
    if "gamma" in data:
        if isinstance(game, StochasticGame):
            game = replace(game, gamma=float(data["gamma"]))
        else:
            raise DomainError("gamma override only applies to stochastic games")
    agents = data.get("agents")
    if not isinstance(agents, list) or len(agents) != 2:
        raise DomainError("scenario needs an 'agents' list of exactly two entries")
    return ScenarioConfig(
        game=game,
        agents=tuple(_agent_from_json(a) for a in agents),
        horizon=int(data.get("horizon", 1_000_000)),
        n_trials=int(data.get("n_trials", 30)),
        base_seed=int(data.get("base_seed", PRESET_BASE_SEED)),
        log_interval=int(data.get("log_interval", 1000)),
        lam=float(data.get("lambda", 1.001)),
        diagnostics_enabled=bool(data.get("diagnostics", True)),
        name=str(data.get("name", "custom")),
    )


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return scenario_from_json(data, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# traces and aggregation


@dataclass(frozen=True, eq=False)
class TrialTrace:
    """Logged rows and final state of one trial.

    Array shapes: stochastic runs carry a state axis (rows, n_states, 2)
    for v_est/delta/tracking and (rows, n_states) for lyapunov/counters;
    matrix runs drop the state axis. NaN marks not-applicable entries
    (fixed agents, diagnostics disabled); exports render them empty.
    """

    trial_id: int
    kind: str
    ks: np.ndarray
    v_est: Optional[np.ndarray]
    delta: np.ndarray
    tracking: np.ndarray
    lyapunov: np.ndarray
    counters: Optional[np.ndarray]
    final_q: tuple
    final_v: Optional[tuple]
    final_averages: tuple


@dataclass(frozen=True, eq=False)
class Aggregate:
    """Cross-trial mean and spread of every traced quantity.

    Standard deviations use the n-1 estimator; a single trial has zero
    spread. v_star and bound_width are the equilibrium values and band
    half-width the value curves are compared against (None when no band
    applies, e.g. matrix games or fixed opponents).
    """

    kind: str
    ks: np.ndarray
    n_trials: int
    v_est_mean: Optional[np.ndarray]
    v_est_std: Optional[np.ndarray]
    delta_mean: np.ndarray
    delta_std: np.ndarray
    tracking_mean: np.ndarray
    tracking_std: np.ndarray
    lyapunov_mean: np.ndarray
    lyapunov_std: np.ndarray
    v_star: Optional[np.ndarray]
    bound_width: Optional[float]
    d: float
    d_raw: Optional[float]
    d_comparable: bool


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: ScenarioConfig
    traces: tuple
    aggregate: Aggregate
    out_dir: Optional[Path]


def _mean_std(stack: np.ndarray, n: int):
    mean = stack.mean(axis=0)
    if n > 1:
        std = stack.std(axis=0, ddof=1)
    else:
        std = np.where(np.isfinite(mean), 0.0, np.nan)
    return mean, std


def aggregate_traces(
    traces: Sequence[TrialTrace],
    v_star: Optional[np.ndarray] = None,
    bound_width: Optional[float] = None,
    d_info: Optional[dict] = None,
) -> Aggregate:
    if not traces:
        raise DomainError("cannot aggregate zero traces")
    traces = sorted(traces, key=lambda t: t.trial_id)
    first = traces[0]
    for t in traces[1:]:
        if t.kind != first.kind or not np.array_equal(t.ks, first.ks):
            raise DomainError("traces disagree on kind or logged stages")
    n = len(traces)
    d_info = d_info or {"d": 1.0, "raw": None, "comparable": False}
    if first.v_est is not None:
        v_mean, v_std = _mean_std(np.stack([t.v_est for t in traces]), n)
    else:
        v_mean = v_std = None
    dl_mean, dl_std = _mean_std(np.stack([t.delta for t in traces]), n)
    tr_mean, tr_std = _mean_std(np.stack([t.tracking for t in traces]), n)
    ly_mean, ly_std = _mean_std(np.stack([t.lyapunov for t in traces]), n)
    return Aggregate(
        kind=first.kind,
        ks=first.ks.copy(),
        n_trials=n,
        v_est_mean=v_mean,
        v_est_std=v_std,
        delta_mean=dl_mean,
        delta_std=dl_std,
        tracking_mean=tr_mean,
        tracking_std=tr_std,
        lyapunov_mean=ly_mean,
        lyapunov_std=ly_std,
        v_star=None if v_star is None else np.asarray(v_star, dtype=float),
        bound_width=bound_width,
        d=float(d_info["d"]),
        d_raw=d_info.get("raw"),
        d_comparable=bool(d_info.get("comparable", False)),
    )


# ---------------------------------------------------------------------------
# trial execution


def run_trial(cfg: ScenarioConfig, trial_id: int) -> TrialTrace:
    """Simulate one seeded trial; deterministic in (base_seed, trial_id).

    Raises NumericalError naming the first logged row at which any
    iterate stopped being finite.
    """
    if trial_id < 0:
        raise DomainError(f"trial_id must be >= 0, got {trial_id}")
    if isinstance(cfg.game, StochasticGame):
        return _run_sg_trial(cfg, trial_id)
    return _run_matrix_trial(cfg, trial_id)


def _avg_schedules(cfg: ScenarioConfig) -> tuple:
    """Cross schedules for the two play averages (see module docstring)."""
    s1, s2 = cfg.agents
    fallback = power_schedule(1.0, 0.96)

    def pick(own: AgentSpec, other: AgentSpec) -> StepSchedule:
        if not other.is_fixed:
            return other.q_step
        if not own.is_fixed:
            return own.q_step
        return fallback

    return pick(s1, s2), pick(s2, s1)


def _effective_taus(cfg: ScenarioConfig) -> tuple:
    return tuple(0.0 if s.is_fixed else s.temperature for s in cfg.agents)


def _run_matrix_trial(cfg: ScenarioConfig, trial_id: int) -> TrialTrace:
    game: MatrixGame = cfg.game
    n1, n2 = game.n_actions
    p1 = game.payoffs1
    p2 = game.payoffs2
    spec1, spec2 = cfg.agents
    mcfg1 = None if spec1.is_fixed else spec1.matrix_config()
    mcfg2 = None if spec2.is_fixed else spec2.matrix_config()
    strat1 = None if mcfg1 else list(cfg.fixed_rows(0)[0])
    strat2 = None if mcfg2 else list(cfg.fixed_rows(1)[0])
    avg_sched1, avg_sched2 = _avg_schedules(cfg)
    tau1, tau2 = _effective_taus(cfg)

    rng = SplitMix64(derive_trial_seed(cfg.base_seed, trial_id))
    st1 = matrix_initial_state(n1) if mcfg1 else None
    st2 = matrix_initial_state(n2) if mcfg2 else None
    avg1 = (1.0 / n1,) * n1
    avg2 = (1.0 / n2,) * n2

    diag = cfg.diagnostics_enabled
    if diag:
        # Against a fixed opponent the meaningful reference is the best
        # regularized payoff attainable vs that known strategy (closed
        # form), not the saddle value; delta then tends to zero iff the
        # learner ends up playing a regularized best response.
        if mcfg1 is None:
            val1 = None
        elif strat2 is not None:
            val1 = soft_value(p1 @ np.asarray(strat2), tau1)
        else:
            val1 = regularized_value(p1, tau1, tau2).value
        if mcfg2 is None:
            val2 = None
        elif strat1 is not None:
            val2 = soft_value(p2 @ np.asarray(strat1), tau2)
        else:
            val2 = regularized_value(p2, tau2, tau1).value
        d_info = step_ratio_info(cfg)

    ks = np.arange(0, cfg.horizon, cfg.log_interval, dtype=np.int64)
    n_rows = len(ks)
    delta = np.full((n_rows, 2), np.nan)
    tracking = np.full((n_rows, 2), np.nan)
    lyap = np.full(n_rows, np.nan)

    row = 0
    for k in range(cfg.horizon):
        if row < n_rows and k == int(ks[row]):
            if diag:
                q1 = st1.q if st1 else None
                q2 = st2.q if st2 else None
                if q1 is not None:
                    delta[row, 0] = response_gap(q1, avg2, tau1, tau2, val1)
                    tracking[row, 0] = tracking_error(q1, p1, avg2)
                if q2 is not None:
                    delta[row, 1] = response_gap(q2, avg1, tau2, tau1, val2)
                    tracking[row, 1] = tracking_error(q2, p2, avg1)
                if q1 is not None and q2 is not None:
                    lyap[row] = lyapunov_value(
                        q1, avg2, q2, avg1, p1, p2, tau1, tau2,
                        d=d_info["d"], lam=cfg.lam, regularized_vals=(val1, val2),
                    ).value
            row += 1

        obs1 = _draw_observation(spec1, rng)
        obs2 = _draw_observation(spec2, rng)
        if mcfg1:
            a1 = matrix_select_action(st1, mcfg1, obs1, rng)
        else:
            a1 = rng.categorical(strat1)
        if mcfg2:
            a2 = matrix_select_action(st2, mcfg2, obs2, rng)
        else:
            a2 = rng.categorical(strat2)

        r1 = float(p1[a1, a2])
        r2 = float(p2[a2, a1])
        if mcfg1:
            st1 = stage_update(
                st1, mcfg1, p1,
                StageObservation(a1, r1, obs1, a2 if obs1 else None),
            )
        if mcfg2:
            st2 = stage_update(
                st2, mcfg2, p2,
                StageObservation(a2, r2, obs2, a1 if obs2 else None),
            )
        avg1 = empirical_average_step(avg1, a1, avg_sched1.value(k))
        avg2 = empirical_average_step(avg2, a2, avg_sched2.value(k))

        if mcfg1 and not all(math.isfinite(v) for v in st1.q):
            raise NumericalError(f"non-finite estimate for agent 1 at stage {k} (row {row})")
        if mcfg2 and not all(math.isfinite(v) for v in st2.q):
            raise NumericalError(f"non-finite estimate for agent 2 at stage {k} (row {row})")

    return TrialTrace(
        trial_id=trial_id,
        kind="matrix",
        ks=ks,
        v_est=None,
        delta=delta,
        tracking=tracking,
        lyapunov=lyap,
        counters=None,
        final_q=(st1.q if st1 else None, st2.q if st2 else None),
        final_v=None,
        final_averages=(avg1, avg2),
    )


def _draw_observation(spec: AgentSpec, rng: SplitMix64) -> bool:
    """Observation coin per the draw-order contract: a draw is consumed
    only when the outcome is actually random."""
    if spec.is_fixed:
        return False
    if spec.observe_prob >= 1.0:
        return True
    if spec.observe_prob <= 0.0:
        return False
    return rng.bernoulli(spec.observe_prob)


def _kernel_agent_args(spec: AgentSpec) -> tuple:
    if spec.is_fixed:
        return 1, 0.0, 0.0, 0, 1.0, 1.0, 1.0, 1.0
    for sched in (spec.q_step, spec.v_step):
        if sched.kind != "power":
            raise DomainError(f"compiled runner supports power schedules, got {sched.kind!r}")
    return (
        0,
        spec.observe_prob,
        spec.temperature,
        1 if spec.knows_model else 0,
        spec.q_step.scale,
        spec.q_step.exponent,
        spec.v_step.scale,
        spec.v_step.exponent,
    )


def _run_sg_trial(cfg: ScenarioConfig, trial_id: int) -> TrialTrace:
    from ._sg_kernel import run_chunk

    game: StochasticGame = cfg.game
    n_states = game.n_states
    n1, n2 = game.n_actions
    spec1, spec2 = cfg.agents
    r1 = np.ascontiguousarray(game.rewards1)
    r2 = np.ascontiguousarray(game.rewards2)
    kern = np.ascontiguousarray(game.kernel)
    gamma = game.gamma

    f1, th1, tk1, kn1, as1, ae1, bs1, be1 = _kernel_agent_args(spec1)
    f2, th2, tk2, kn2, as2, ae2, bs2, be2 = _kernel_agent_args(spec2)
    strat1 = cfg.fixed_rows(0)
    strat2 = cfg.fixed_rows(1)
    strat1 = np.zeros((n_states, n1)) if strat1 is None else np.ascontiguousarray(strat1)
    strat2 = np.zeros((n_states, n2)) if strat2 is None else np.ascontiguousarray(strat2)
    avg_sched1, avg_sched2 = _avg_schedules(cfg)
    for sched in (avg_sched1, avg_sched2):
        if sched.kind != "power":
            raise DomainError(f"compiled runner supports power schedules, got {sched.kind!r}")

    q1 = np.zeros((n_states, n1))
    q2 = np.zeros((n_states, n2))
    v1 = np.zeros(n_states)
    v2 = np.zeros(n_states)
    counters = np.zeros(n_states, dtype=np.int64)
    avg1 = np.full((n_states, n1), 1.0 / n1)
    avg2 = np.full((n_states, n2), 1.0 / n2)
    cur = np.zeros(1, dtype=np.int64)
    ipend = np.zeros(6, dtype=np.int64)
    fpend = np.zeros(2, dtype=np.float64)
    rng_state = np.array([derive_trial_seed(cfg.base_seed, trial_id)], dtype=np.uint64)

    tau1, tau2 = _effective_taus(cfg)
    diag = cfg.diagnostics_enabled
    d_info = step_ratio_info(cfg)
    warm1 = [WarmStartSaddle() for _ in range(n_states)]
    warm2 = [WarmStartSaddle() for _ in range(n_states)]

    ks = np.arange(0, cfg.horizon, cfg.log_interval, dtype=np.int64)
    n_rows = len(ks)
    v_est = np.full((n_rows, n_states, 2), np.nan)
    delta = np.full((n_rows, n_states, 2), np.nan)
    tracking = np.full((n_rows, n_states, 2), np.nan)
    lyap = np.full((n_rows, n_states), np.nan)
    cnt_rows = np.zeros((n_rows, n_states), dtype=np.int64)

    def log_row(row: int):
        cnt_rows[row] = counters
        if f1 == 0:
            v_est[row, :, 0] = v1
        if f2 == 0:
            v_est[row, :, 1] = v2
        if not diag:
            return
        cont = kern @ np.stack([v1, v2], axis=1)  # (S, n1, n2, 2)
        for s in range(n_states):
            q1m = r1[s] + gamma * cont[s, :, :, 0]
            q2m = r2[s] + gamma * cont[s, :, :, 1].T
            # fixed opponent: reference is the closed-form best regularized
            # payoff against the known row, not a saddle value
            if f1 == 0:
                if f2 == 1:
                    rv1 = soft_value(q1m @ strat2[s], tau1)
                else:
                    rv1 = warm1[s].solve(q1m, tau1, tau2).value
            else:
                rv1 = None
            if f2 == 0:
                if f1 == 1:
                    rv2 = soft_value(q2m @ strat1[s], tau2)
                else:
                    rv2 = warm2[s].solve(q2m, tau2, tau1).value
            else:
                rv2 = None
            if f1 == 0:
                delta[row, s, 0] = response_gap(q1[s], avg2[s], tau1, tau2, rv1)
                tracking[row, s, 0] = tracking_error(q1[s], q1m, avg2[s])
            if f2 == 0:
                delta[row, s, 1] = response_gap(q2[s], avg1[s], tau2, tau1, rv2)
                tracking[row, s, 1] = tracking_error(q2[s], q2m, avg1[s])
            if f1 == 0 and f2 == 0:
                lyap[row, s] = lyapunov_value(
                    q1[s], avg2[s], q2[s], avg1[s], q1m, q2m, tau1, tau2,
                    d=d_info["d"], lam=cfg.lam, regularized_vals=(rv1, rv2),
                ).value

    k = 0
    row = 0
    while True:
        if row < n_rows and k == int(ks[row]):
            log_row(row)
            row += 1
        if k >= cfg.horizon:
            break
        n = min(cfg.log_interval, cfg.horizon - k)
        run_chunk(
            r1, r2, kern, gamma,
            f1, th1, tk1, kn1, as1, ae1, bs1, be1, strat1,
            f2, th2, tk2, kn2, as2, ae2, bs2, be2, strat2,
            avg_sched1.scale, avg_sched1.exponent, avg_sched2.scale, avg_sched2.exponent,
            q1, q2, v1, v2, counters, avg1, avg2,
            cur, ipend, fpend, rng_state, n,
        )
        k += n
        if not (
            np.isfinite(q1).all()
            and np.isfinite(q2).all()
            and np.isfinite(v1).all()
            and np.isfinite(v2).all()
        ):
            raise NumericalError(f"non-finite iterate by stage {k} (row {row})")

    return TrialTrace(
        trial_id=trial_id,
        kind="stochastic",
        ks=ks,
        v_est=v_est,
        delta=delta,
        tracking=tracking,
        lyapunov=lyap,
        counters=cnt_rows,
        final_q=(None if f1 else q1.copy(), None if f2 else q2.copy()),
        final_v=(None if f1 else v1.copy(), None if f2 else v2.copy()),
        final_averages=(avg1.copy(), avg2.copy()),
    )


# ---------------------------------------------------------------------------
# experiments


def run_experiment(
    cfg: ScenarioConfig,
    parallelism: int = 1,
    out_dir: Optional[str] = None,
) -> ExperimentResult:
    """Run all trials, aggregate, and optionally persist the run.

    The result is independent of the parallelism degree: trials are
    deterministic in their ids and aggregation runs over sorted ids.
    """
    if parallelism < 1:
        raise DomainError(f"parallelism must be >= 1, got {parallelism}")
    report = validate_config(cfg)
    if not report.ok:
        raise DomainError("invalid scenario: " + "; ".join(report.errors))

    v_star = None
    bound_width = None
    d_info = step_ratio_info(cfg)
    if isinstance(cfg.game, StochasticGame) and cfg.game.is_zero_sum():
        sol = shapley_iterate(cfg.game)
        v_star = np.stack([sol.v1, sol.v2], axis=1)
        if d_info["comparable"]:
            tau1, tau2 = _effective_taus(cfg)
            try:
                bound_width = value_gap_bound(
                    d_info["d"], cfg.game.gamma, tau1, tau2, *cfg.game.n_actions
                )
            except DomainError:
                bound_width = None

    ids = list(range(cfg.n_trials))
    aborted = []
    traces = []
    if parallelism == 1 or cfg.n_trials == 1:
        for tid in ids:
            try:
                traces.append(run_trial(cfg, tid))
            except NumericalError as exc:
                aborted.append((tid, str(exc)))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [(tid, pool.submit(run_trial, cfg, tid)) for tid in ids]
            for tid, fut in futures:
                try:
                    traces.append(fut.result())
                except NumericalError as exc:
                    aborted.append((tid, str(exc)))
    if aborted:
        listing = "; ".join(f"trial {tid}: {msg}" for tid, msg in aborted)
        raise NumericalError(f"aborted trials: {listing}")

    agg = aggregate_traces(traces, v_star=v_star, bound_width=bound_width, d_info=d_info)
    out_path = None
    if out_dir is not None:
        out_path = Path(out_dir)
        _write_outputs(cfg, traces, agg, out_path)
    return ExperimentResult(config=cfg, traces=tuple(traces), aggregate=agg, out_dir=out_path)


def _write_outputs(cfg, traces, agg: Aggregate, out: Path):
    from .plotting import render_plot

    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "config": scenario_to_json(cfg),
        "package_version": __version__,
        "d": agg.d,
        "d_raw": agg.d_raw,
        "d_comparable": agg.d_comparable,
        "bound_width": agg.bound_width,
        "v_star": None if agg.v_star is None else agg.v_star.tolist(),
    }
    with open(out / "run.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    trials_dir = out / "trials"
    trials_dir.mkdir(exist_ok=True)
    for tr in traces:
        write_trace_csv(
            tr, trials_dir / f"trial_{tr.trial_id}.csv",
            v_star=agg.v_star, bound_width=agg.bound_width,
        )
    write_aggregate_csv(agg, out / "aggregate.csv")
    labels = tuple(access_label(s) for s in cfg.agents)
    render_plot(agg, out / "plot.svg", title=cfg.name, labels=labels)


# ---------------------------------------------------------------------------
# export


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    if math.isnan(xf):
        return ""
    return repr(xf)


def _opt(x):
    """None for missing/NaN, a plain float otherwise (JSON-friendly)."""
    if x is None:
        return None
    xf = float(x)
    return None if math.isnan(xf) else xf


def _bound_cells(v_star, bound_width, s: int, agent: int):
    if v_star is None:
        return None, None, None
    vs = float(v_star[s, agent])
    if bound_width is None:
        return vs, None, None
    return vs, vs - bound_width, vs + bound_width


def trace_rows(trace: TrialTrace, v_star=None, bound_width=None) -> list:
    """Rows of one trial in the shared schema (v_est_std stays empty)."""
    rows = []
    if trace.kind == "stochastic":
        n_states = trace.delta.shape[1]
        for ri, k in enumerate(trace.ks):
            for s in range(n_states):
                for agent in range(2):
                    vs, lo, hi = _bound_cells(v_star, bound_width, s, agent)
                    rows.append([
                        int(k), s, agent + 1,
                        _opt(trace.v_est[ri, s, agent]), None,
                        vs, lo, hi,
                        _opt(trace.delta[ri, s, agent]),
                        _opt(trace.tracking[ri, s, agent]),
                        _opt(trace.lyapunov[ri, s]),
                    ])
    else:
        for ri, k in enumerate(trace.ks):
            for agent in range(2):
                rows.append([
                    int(k), None, agent + 1,
                    None, None, None, None, None,
                    _opt(trace.delta[ri, agent]),
                    _opt(trace.tracking[ri, agent]),
                    _opt(trace.lyapunov[ri]),
                ])
    return rows


def aggregate_rows(agg: Aggregate) -> list:
    rows = []
    if agg.kind == "stochastic":
        n_states = agg.delta_mean.shape[1]
        for ri, k in enumerate(agg.ks):
            for s in range(n_states):
                for agent in range(2):
                    vs, lo, hi = _bound_cells(agg.v_star, agg.bound_width, s, agent)
                    rows.append([
                        int(k), s, agent + 1,
                        _opt(agg.v_est_mean[ri, s, agent]),
                        _opt(agg.v_est_std[ri, s, agent]),
                        vs, lo, hi,
                        _opt(agg.delta_mean[ri, s, agent]),
                        _opt(agg.tracking_mean[ri, s, agent]),
                        _opt(agg.lyapunov_mean[ri, s]),
                    ])
    else:
        for ri, k in enumerate(agg.ks):
            for agent in range(2):
                rows.append([
                    int(k), None, agent + 1,
                    None, None, None, None, None,
                    _opt(agg.delta_mean[ri, agent]),
                    _opt(agg.tracking_mean[ri, agent]),
                    _opt(agg.lyapunov_mean[ri]),
                ])
    return rows


def _object_rows(obj, v_star=None, bound_width=None) -> list:
    if isinstance(obj, Aggregate):
        return aggregate_rows(obj)
    if isinstance(obj, TrialTrace):
        return trace_rows(obj, v_star=v_star, bound_width=bound_width)
    raise DomainError(f"cannot export {type(obj).__name__}")


def _write_rows_csv(rows: list, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_cell(x) for x in row])


def write_trace_csv(trace: TrialTrace, path, v_star=None, bound_width=None):
    _write_rows_csv(trace_rows(trace, v_star=v_star, bound_width=bound_width), path)


def write_aggregate_csv(agg: Aggregate, path):
    _write_rows_csv(aggregate_rows(agg), path)


def export(obj, fmt: str, path, v_star=None, bound_width=None):
    """Write a trace or aggregate to path as 'csv' or 'json'.

    Both formats share the column schema; JSON carries {"columns", "rows"}
    with null where CSV leaves a field empty. Floats survive a round trip
    exactly in either format.
    """
    rows = _object_rows(obj, v_star=v_star, bound_width=bound_width)
    path = Path(path)
    try:
        if fmt == "csv":
            _write_rows_csv(rows, path)
        elif fmt == "json":
            with open(path, "w", encoding="utf-8") as fh:
                json.dump({"columns": list(CSV_COLUMNS), "rows": rows}, fh)
                fh.write("\n")
        else:
            raise DomainError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_run(run_dir) -> tuple:
    """Load a run directory back as (config, aggregate).

    Rebuilt from run.json and aggregate.csv. The row schema carries
    spread only for value estimates, so the diagnostic std arrays come
    back as NaN; everything the figure needs survives the round trip.
    """
    run_dir = Path(run_dir)
    with open(run_dir / "run.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    cfg = scenario_from_json(meta["config"], base_dir=str(run_dir))
    header, rows = read_csv_rows(run_dir / "aggregate.csv")
    if header != list(CSV_COLUMNS):
        raise DomainError(f"unexpected aggregate columns in {run_dir}: {header}")
    kind = "stochastic" if isinstance(cfg.game, StochasticGame) else "matrix"
    n_states = cfg.game.n_states if kind == "stochastic" else 1

    ks: list = []
    k_index: dict = {}
    for row in rows:
        if row[0] not in k_index:
            k_index[row[0]] = len(ks)
            ks.append(row[0])
    n_rows = len(ks)

    def nan(*shape):
        return np.full(shape, np.nan)

    if kind == "stochastic":
        v_mean, v_std = nan(n_rows, n_states, 2), nan(n_rows, n_states, 2)
        dl, tr = nan(n_rows, n_states, 2), nan(n_rows, n_states, 2)
        ly = nan(n_rows, n_states)
        for k, s, agent, vm, vs, _, _, _, d, t, l in rows:
            ri, ai = k_index[k], agent - 1
            if vm is not None:
                v_mean[ri, s, ai] = vm
            if vs is not None:
                v_std[ri, s, ai] = vs
            if d is not None:
                dl[ri, s, ai] = d
            if t is not None:
                tr[ri, s, ai] = t
            if l is not None:
                ly[ri, s] = l
    else:
        v_mean = v_std = None
        dl, tr = nan(n_rows, 2), nan(n_rows, 2)
        ly = nan(n_rows)
        for k, _, agent, _, _, _, _, _, d, t, l in rows:
            ri, ai = k_index[k], agent - 1
            if d is not None:
                dl[ri, ai] = d
            if t is not None:
                tr[ri, ai] = t
            if l is not None:
                ly[ri] = l

    agg = Aggregate(
        kind=kind,
        ks=np.asarray(ks, dtype=np.int64),
        n_trials=cfg.n_trials,
        v_est_mean=v_mean,
        v_est_std=v_std,
        delta_mean=dl,
        delta_std=np.full_like(dl, np.nan),
        tracking_mean=tr,
        tracking_std=np.full_like(tr, np.nan),
        lyapunov_mean=ly,
        lyapunov_std=np.full_like(ly, np.nan),
        v_star=None if meta.get("v_star") is None else np.asarray(meta["v_star"], dtype=float),
        bound_width=meta.get("bound_width"),
        d=float(meta.get("d", 1.0)),
        d_raw=meta.get("d_raw"),
        d_comparable=bool(meta.get("d_comparable", False)),
    )
    return cfg, agg


_INT_COLUMNS = {"k", "state", "agent"}


def read_csv_rows(path) -> tuple:
    """Read an exported CSV back: (columns, rows) with None for empty
    cells, ints for index columns, floats elsewhere. Lossless against
    the writer."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for raw in reader:
            row = []
            for col, val in zip(header, raw):
                if val == "":
                    row.append(None)
                elif col in _INT_COLUMNS:
                    row.append(int(val))
                else:
                    row.append(float(val))
            rows.append(row)
    return header, rows
