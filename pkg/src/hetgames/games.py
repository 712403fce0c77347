"""Game containers, validation, random generation, and reachability.

Two game kinds are supported. A ``MatrixGame`` holds each agent's payoff
table with the agent's own action as the row index: payoffs1 is
|A1| x |A2|, payoffs2 is |A2| x |A1|. A ``StochasticGame`` adds states, a
transition kernel indexed (s, a1, a2, s'), and a discount factor; reward
tables follow the same own-action-first convention per agent.

Zero-sum means payoffs1 + payoffs2' == 0 (per state, for the stochastic
kind) within 1e-12. Validation never mutates; constructors check structure
(shapes, finiteness) and ``validate_*`` functions run the full semantic
checks and return a report instead of raising, so the CLI can print every
problem at once.

Reachability: when an agent plays exact best responses, its action at a
state is adversarially unpredictable, so guaranteeing a state-to-state
transition requires positive probability under *all* of that agent's
actions; a smoothed agent plays every action with positive probability, so
*some* action suffices. ``build_reachability_graph`` encodes the resulting
three edge rules, and ``is_strongly_connected`` runs Tarjan's algorithm
(iterative, explicit stack) on the induced digraph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GameStructureError
from .rng import SplitMix64

ZERO_SUM_ATOL = 1e-12
KERNEL_ROW_ATOL = 1e-12

__all__ = [
    "MatrixGame",
    "StochasticGame",
    "GameValidationReport",
    "ReachabilityGraph",
    "matrix_game_from_zero_sum",
    "validate_matrix_game",
    "validate_stochastic_game",
    "build_reachability_graph",
    "is_strongly_connected",
    "generate_random_zssg",
    "game_to_json",
    "game_from_json",
    "load_game",
    "save_game",
]


def _check_table(name: str, a: np.ndarray, ndim: int):
    if a.ndim != ndim:
        raise GameStructureError(f"{name} must be {ndim}-d, got shape {a.shape}")
    if 0 in a.shape:
        raise GameStructureError(f"{name} has an empty axis: shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise GameStructureError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class MatrixGame:
    """One-shot two-agent game; own action is the row index per agent."""

    payoffs1: np.ndarray
    payoffs2: np.ndarray

    def __post_init__(self):
        p1 = np.asarray(self.payoffs1, dtype=float)
        p2 = np.asarray(self.payoffs2, dtype=float)
        object.__setattr__(self, "payoffs1", p1)
        object.__setattr__(self, "payoffs2", p2)
        _check_table("payoffs1", p1, 2)
        _check_table("payoffs2", p2, 2)
        if p1.shape != p2.shape[::-1]:
            raise GameStructureError(
                f"payoff shapes incompatible: {p1.shape} vs {p2.shape}"
            )

    @property
    def n_actions(self) -> tuple[int, int]:
        return self.payoffs1.shape

    def is_zero_sum(self, atol: float = ZERO_SUM_ATOL) -> bool:
        return bool(np.abs(self.payoffs1 + self.payoffs2.T).max() <= atol)


def matrix_game_from_zero_sum(payoffs1) -> MatrixGame:
    """Zero-sum matrix game from the first agent's payoff table."""
    p1 = np.asarray(payoffs1, dtype=float)
    return MatrixGame(payoffs1=p1, payoffs2=-p1.T)


@dataclass(frozen=True)
class StochasticGame:
    """Discounted two-agent stochastic game.

    rewards1: (S, |A1|, |A2|); rewards2: (S, |A2|, |A1|);
    kernel: (S, |A1|, |A2|, S) with rows on the last axis.
    """

    rewards1: np.ndarray
    rewards2: np.ndarray
    kernel: np.ndarray
    gamma: float

    def __post_init__(self):
        r1 = np.asarray(self.rewards1, dtype=float)
        r2 = np.asarray(self.rewards2, dtype=float)
        p = np.asarray(self.kernel, dtype=float)
        object.__setattr__(self, "rewards1", r1)
        object.__setattr__(self, "rewards2", r2)
        object.__setattr__(self, "kernel", p)
        _check_table("rewards1", r1, 3)
        _check_table("rewards2", r2, 3)
        _check_table("kernel", p, 4)
        s, n1, n2 = r1.shape
        if r2.shape != (s, n2, n1):
            raise GameStructureError(
                f"rewards2 shape {r2.shape} incompatible with rewards1 {r1.shape}"
            )
        if p.shape != (s, n1, n2, s):
            raise GameStructureError(
                f"kernel shape {p.shape} incompatible with rewards {r1.shape}"
            )
        if not 0.0 <= self.gamma < 1.0:
            raise DomainError(f"gamma must lie in [0, 1), got {self.gamma}")

    @property
    def n_states(self) -> int:
        return self.rewards1.shape[0]

    @property
    def n_actions(self) -> tuple[int, int]:
        return self.rewards1.shape[1], self.rewards1.shape[2]

    def stage_game(self, s: int) -> MatrixGame:
        """The immediate-reward matrix game at state s."""
        return MatrixGame(payoffs1=self.rewards1[s], payoffs2=self.rewards2[s])

    def is_zero_sum(self, atol: float = ZERO_SUM_ATOL) -> bool:
        swapped = np.transpose(self.rewards2, (0, 2, 1))
        return bool(np.abs(self.rewards1 + swapped).max() <= atol)


@dataclass
class GameValidationReport:
    ok: bool
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    details: dict = field(default_factory=dict)


def validate_matrix_game(game: MatrixGame) -> GameValidationReport:
    rep = GameValidationReport(ok=True)
    rep.details["n_actions"] = game.n_actions
    rep.details["zero_sum"] = game.is_zero_sum()
    dev = float(np.abs(game.payoffs1 + game.payoffs2.T).max())
    rep.details["zero_sum_deviation"] = dev
    if not rep.details["zero_sum"]:
        rep.warnings.append(
            f"payoff tables deviate from zero-sum by {dev:.3e} (max entry of P1 + P2')"
        )
    return rep


def validate_stochastic_game(game: StochasticGame) -> GameValidationReport:
    rep = GameValidationReport(ok=True)
    rep.details["n_states"] = game.n_states
    rep.details["n_actions"] = game.n_actions
    rep.details["gamma"] = game.gamma

    p = game.kernel
    if p.min() < 0.0:
        rep.ok = False
        rep.errors.append(f"kernel has negative entries (min {p.min():.3e})")
    row_sums = p.sum(axis=-1)
    worst = float(np.abs(row_sums - 1.0).max())
    rep.details["kernel_row_sum_error"] = worst
    if worst > KERNEL_ROW_ATOL:
        rep.ok = False
        rep.errors.append(
            f"kernel rows must sum to 1 within {KERNEL_ROW_ATOL:g}; worst error {worst:.3e}"
        )

    rep.details["zero_sum"] = game.is_zero_sum()
    swapped = np.transpose(game.rewards2, (0, 2, 1))
    dev = float(np.abs(game.rewards1 + swapped).max())
    rep.details["zero_sum_deviation"] = dev
    if not rep.details["zero_sum"]:
        rep.warnings.append(
            f"reward tables deviate from zero-sum by {dev:.3e}"
        )
    return rep


@dataclass(frozen=True)
class ReachabilityGraph:
    """State digraph of transitions guaranteed under the agents' modes.

    modes is a pair drawn from {"best", "smoothed"}; adjacency[s, s'] is
    True when the transition s -> s' has positive probability no matter
    which actions the "best"-mode agents pick, assuming "smoothed"-mode
    agents randomize with full support.
    """

    adjacency: np.ndarray
    modes: tuple[str, str]


def build_reachability_graph(game: StochasticGame, modes: tuple[str, str]) -> ReachabilityGraph:
    for m in modes:
        if m not in ("best", "smoothed"):
            raise DomainError(f"agent mode must be 'best' or 'smoothed', got {m!r}")
    positive = game.kernel > 0.0  # (s, a1, a2, s')
    m1, m2 = modes
    if m1 == "best" and m2 == "best":
        adj = positive.all(axis=(1, 2))
    elif m1 == "best" and m2 == "smoothed":
        # for every action of agent 1, some action of agent 2 works
        adj = positive.any(axis=2).all(axis=1)
    elif m1 == "smoothed" and m2 == "best":
        adj = positive.any(axis=1).all(axis=1)
    else:
        adj = positive.any(axis=(1, 2))
    return ReachabilityGraph(adjacency=adj, modes=(m1, m2))


def is_strongly_connected(graph: ReachabilityGraph) -> bool:
    """Tarjan's SCC algorithm with an explicit stack; True iff one SCC."""
    adj = graph.adjacency
    n = adj.shape[0]
    if n == 1:
        return True
    succ = [np.flatnonzero(adj[v]).tolist() for v in range(n)]

    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    counter = 0
    n_sccs = 0

    for root in range(n):
        if index[root] != -1:
            continue
        # work entries: (vertex, iterator position into succ[vertex])
        work = [(root, 0)]
        while work:
            v, pi = work.pop()
            if pi == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(succ[v]):
                w = succ[v][pi]
                pi += 1
                if index[w] == -1:
                    work.append((v, pi))
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            if lowlink[v] == index[v]:
                n_sccs += 1
                if n_sccs > 1:
                    return False
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    if w == v:
                        break
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return n_sccs == 1


def generate_random_zssg(
    n_states: int,
    n_actions: int,
    reward_ranges,
    gamma: float,
    seed: int,
    min_kernel_entry: float = 1e-6,
) -> StochasticGame:
    """Random zero-sum stochastic game, deterministic in the seed.

    reward_ranges is one (lo, hi) pair per state; agent 1's rewards are
    uniform in the state's range and agent 2's are their negation. Kernel
    rows are uniform on the simplex (normalized unit exponentials), with a
    row resampled while any entry falls below min_kernel_entry, so every
    transition has strictly positive probability.

    Draw order (fixed, part of the reproducibility contract): all rewards
    in (s, a1, a2) lexicographic order, then kernel rows in (s, a1, a2)
    order, each row consuming n_states exponential draws per attempt.
    """
    if n_states < 1 or n_actions < 1:
        raise DomainError("need at least one state and one action")
    if len(reward_ranges) != n_states:
        raise DomainError(
            f"need one reward range per state, got {len(reward_ranges)} for {n_states}"
        )
    if not 0.0 < min_kernel_entry < 1.0 / n_states:
        raise DomainError(f"min_kernel_entry {min_kernel_entry} infeasible for {n_states} states")

    rng = SplitMix64(seed)
    r1 = np.empty((n_states, n_actions, n_actions))
    for s in range(n_states):
        lo, hi = reward_ranges[s]
        if not hi >= lo:
            raise DomainError(f"bad reward range for state {s}: ({lo}, {hi})")
        for a1 in range(n_actions):
            for a2 in range(n_actions):
                r1[s, a1, a2] = rng.uniform_range(lo, hi)

    kernel = np.empty((n_states, n_actions, n_actions, n_states))
    for s in range(n_states):
        for a1 in range(n_actions):
            for a2 in range(n_actions):
                while True:
                    draws = [rng.exponential() for _ in range(n_states)]
                    total = sum(draws)
                    row = [d / total for d in draws]
                    if min(row) >= min_kernel_entry:
                        break
                kernel[s, a1, a2] = row

    return StochasticGame(
        rewards1=r1,
        rewards2=-np.transpose(r1, (0, 2, 1)),
        kernel=kernel,
        gamma=gamma,
    )


def game_to_json(game) -> dict:
    """JSON-ready dict; 'kind' discriminates the two game types."""
    if isinstance(game, MatrixGame):
        return {
            "kind": "matrix",
            "actions": list(game.n_actions),
            "payoffs": [game.payoffs1.tolist(), game.payoffs2.tolist()],
        }
    if isinstance(game, StochasticGame):
        n1, n2 = game.n_actions
        return {
            "kind": "stochastic",
            "states": game.n_states,
            "actions": [n1, n2],
            "rewards": [game.rewards1.tolist(), game.rewards2.tolist()],
            "kernel": game.kernel.tolist(),
            "gamma": game.gamma,
        }
    raise GameStructureError(f"cannot serialize object of type {type(game).__name__}")


def game_from_json(data: dict):
    kind = data.get("kind")
    if kind == "matrix":
        p1, p2 = data["payoffs"]
        return MatrixGame(payoffs1=np.asarray(p1, float), payoffs2=np.asarray(p2, float))
    if kind == "stochastic":
        r1, r2 = data["rewards"]
        return StochasticGame(
            rewards1=np.asarray(r1, float),
            rewards2=np.asarray(r2, float),
            kernel=np.asarray(data["kernel"], float),
            gamma=float(data["gamma"]),
        )
    raise GameStructureError(f"unknown game kind {kind!r}")


def save_game(game, path: str):
    with open(path, "w") as fh:
        json.dump(game_to_json(game), fh, indent=2)


def load_game(path: str):
    with open(path) as fh:
        return game_from_json(json.load(fh))
