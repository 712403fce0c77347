"""Command-line front end.

Subcommands:
  gen       sample a random zero-sum stochastic game and write it as JSON
  oracle    solve a game file exactly and print values and strategies
  run       execute a scenario (a shipped preset name or a config file)
  plot      re-render the figure for a previously written run directory
  validate  check a scenario config and report errors and warnings

Exit codes: 0 on success, 1 for usage and configuration problems
(including invalid games and scenario constraints), 2 for numerical
failures and filesystem errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import DomainError, GameStructureError, NumericalError
from .games import MatrixGame, StochasticGame, generate_random_zssg, load_game, save_game
from .harness import (
    PRESET_NAMES,
    ScenarioConfig,
    access_label,
    load_scenario,
    read_run,
    run_experiment,
    scenario_preset,
    validate_config,
)
from .oracle import shapley_iterate
from .responses import minimax_value

__all__ = ["main"]


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract here is
    # usage on stderr and status 1, so route through an exception
    def error(self, message):
        raise _UsageError(self, message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hetgames", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_gen = sub.add_parser("gen", help="sample a random zero-sum stochastic game")
    p_gen.add_argument("--states", type=int, default=2)
    p_gen.add_argument("--actions", type=int, default=2)
    p_gen.add_argument("--gamma", type=float, default=0.3)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument(
        "--reward-range", nargs=2, type=float, action="append",
        metavar=("LO", "HI"),
        help="reward range; give once for all states or once per state",
    )
    p_gen.add_argument("--min-kernel-entry", type=float, default=1e-6)
    p_gen.add_argument("--out", help="output file (stdout when omitted)")
    p_gen.set_defaults(func=_cmd_gen)

    p_oracle = sub.add_parser("oracle", help="solve a game file exactly")
    p_oracle.add_argument("--game", required=True, help="game JSON file")
    p_oracle.add_argument("--tol", type=float, default=1e-9)
    p_oracle.add_argument("--out", help="output file (stdout when omitted)")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_run = sub.add_parser("run", help="execute a scenario")
    p_run.add_argument("scenario", nargs="?", help=f"preset name, one of {', '.join(PRESET_NAMES)}")
    p_run.add_argument("--config", help="scenario config JSON file")
    p_run.add_argument("--seed", type=int, help="override base seed")
    p_run.add_argument("--trials", type=int, help="override trial count")
    p_run.add_argument("--horizon", type=int, help="override stage count")
    p_run.add_argument("--log-interval", type=int, help="override logging interval")
    p_run.add_argument("--parallelism", type=int, default=1)
    p_run.add_argument("--out", help="run directory to write")
    p_run.set_defaults(func=_cmd_run)

    p_plot = sub.add_parser("plot", help="re-render the figure for a run directory")
    p_plot.add_argument("--run", required=True, help="directory written by 'run --out'")
    p_plot.add_argument("--out", help="SVG path (default: plot.svg inside the run directory)")
    p_plot.set_defaults(func=_cmd_plot)

    p_val = sub.add_parser("validate", help="check a scenario config")
    p_val.add_argument("scenario", nargs="?", help="preset name")
    p_val.add_argument("--config", help="scenario config JSON file")
    p_val.set_defaults(func=_cmd_validate)
    return parser


def _emit(payload: dict, out: str | None):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {out}")
    else:
        print(text)


def _cmd_gen(args) -> int:
    ranges = args.reward_range or [[0.0, 1.0]]
    if len(ranges) == 1:
        ranges = ranges * args.states
    if len(ranges) != args.states:
        raise DomainError(
            f"got {len(ranges)} reward ranges for {args.states} states; give one or one per state"
        )
    game = generate_random_zssg(
        n_states=args.states,
        n_actions=args.actions,
        reward_ranges=tuple(tuple(r) for r in ranges),
        gamma=args.gamma,
        seed=args.seed,
        min_kernel_entry=args.min_kernel_entry,
    )
    if args.out:
        save_game(game, args.out)
        print(f"wrote {args.out}")
    else:
        from .games import game_to_json

        _emit(game_to_json(game), None)
    return 0


def _cmd_oracle(args) -> int:
    game = load_game(args.game)
    if isinstance(game, StochasticGame):
        sol = shapley_iterate(game, tol=args.tol)
        payload = {
            "kind": "stochastic",
            "v1": sol.v1.tolist(),
            "v2": sol.v2.tolist(),
            "pi1": sol.pi1.tolist(),
            "pi2": sol.pi2.tolist(),
            "iterations": sol.iterations,
            "residual": sol.residual,
        }
    elif isinstance(game, MatrixGame):
        cert = minimax_value(game.payoffs1)
        payload = {
            "kind": "matrix",
            "value": cert.value,
            "maximizer": list(cert.maximizer),
            "minimizer": list(cert.minimizer),
            "residual": cert.residual,
        }
    else:
        raise GameStructureError(f"unsupported game type {type(game).__name__}")
    _emit(payload, args.out)
    return 0


def _resolve_scenario(args) -> ScenarioConfig:
    if args.config and args.scenario:
        raise DomainError("give a preset name or --config, not both")
    if args.config:
        return load_scenario(args.config)
    if args.scenario:
        return scenario_preset(args.scenario)
    raise DomainError(f"nothing to run: give a preset ({', '.join(PRESET_NAMES)}) or --config")


def _cmd_run(args) -> int:
    cfg = _resolve_scenario(args)
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.trials is not None:
        overrides["n_trials"] = args.trials
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.log_interval is not None:
        overrides["log_interval"] = args.log_interval
    if overrides:
        cfg = replace(cfg, **overrides)
    result = run_experiment(cfg, parallelism=args.parallelism, out_dir=args.out)
    agg = result.aggregate
    print(f"{cfg.name}: {agg.n_trials} trials, horizon {cfg.horizon}, {len(agg.ks)} logged rows")
    for idx, spec in enumerate(cfg.agents):
        line = f"  agent {idx + 1}: {access_label(spec)}"
        final_delta = (
            agg.delta_mean[-1, :, idx] if agg.kind == "stochastic" else agg.delta_mean[-1, idx]
        )
        if np.isfinite(final_delta).any():
            line += f", final mean response gap {np.nanmax(final_delta):.6g}"
        print(line)
    if agg.v_star is not None and agg.v_est_mean is not None:
        gap = np.nanmax(np.abs(agg.v_est_mean[-1] - agg.v_star))
        print(f"  final max |v_est - v_star|: {gap:.6g}")
        if agg.bound_width is not None:
            print(f"  long-run band half-width: {agg.bound_width:.6g} (d = {agg.d:.6g})")
    if result.out_dir is not None:
        print(f"  outputs in {result.out_dir}")
    return 0


def _cmd_plot(args) -> int:
    cfg, agg = read_run(args.run)
    out = args.out or str(Path(args.run) / "plot.svg")
    from .plotting import render_plot

    labels = tuple(access_label(s) for s in cfg.agents)
    render_plot(agg, out, title=cfg.name, labels=labels)
    print(f"wrote {out}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _resolve_scenario(args)
    report = validate_config(cfg)
    for err in report.errors:
        print(f"error: {err}")
    for warn in report.warnings:
        print(f"warning: {warn}")
    if report.ok:
        print(f"{cfg.name}: ok ({len(report.warnings)} warnings)")
        return 0
    return 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        print("error: no subcommand given", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (DomainError, GameStructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
