"""Command line interface: subcommand round trip and exit codes.

Everything runs in-process through main(argv) so exit codes and output
can be asserted directly; one subprocess test covers the installed
console script.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from hetgames import (
    AgentSpec,
    ScenarioConfig,
    StochasticGame,
    load_game,
    scenario_to_json,
)
from hetgames.cli import main


def _write_scenario(path, cfg):
    path.write_text(json.dumps(scenario_to_json(cfg)))
    return str(path)


def test_gen_oracle_run_plot_validate_round_trip(tmp_path, capsys):
    game_path = tmp_path / "game.json"
    assert (
        main(["gen", "--seed", "11", "--states", "2", "--actions", "2", "--out", str(game_path)])
        == 0
    )
    assert game_path.exists()
    game = load_game(game_path)
    assert game.n_states == 2

    sol_path = tmp_path / "sol.json"
    assert main(["oracle", "--game", str(game_path), "--out", str(sol_path)]) == 0
    sol = json.loads(sol_path.read_text())
    assert sol["kind"] == "stochastic"
    assert len(sol["v1"]) == 2
    assert sol["residual"] <= 1e-9
    np.testing.assert_allclose(np.array(sol["v1"]), -np.array(sol["v2"]), atol=1e-9)

    cfg = ScenarioConfig(
        game=game,
        agents=(AgentSpec(), AgentSpec(observe_prob=0.0, knows_model=False)),
        horizon=600,
        n_trials=2,
        log_interval=200,
        name="clidemo",
    )
    cfg_path = _write_scenario(tmp_path / "scenario.json", cfg)
    run_dir = tmp_path / "rundir"
    capsys.readouterr()
    assert main(["run", "--config", cfg_path, "--out", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert "clidemo: 2 trials" in out
    for name in ("run.json", "aggregate.csv", "plot.svg"):
        assert (run_dir / name).exists()
    assert (run_dir / "trials" / "trial_1.csv").exists()

    # re-render the figure from the run directory alone
    (run_dir / "plot.svg").unlink()
    assert main(["plot", "--run", str(run_dir)]) == 0
    assert (run_dir / "plot.svg").exists()
    custom = tmp_path / "alt.svg"
    assert main(["plot", "--run", str(run_dir), "--out", str(custom)]) == 0
    assert custom.read_bytes().startswith(b"<?xml")

    assert main(["validate", "--config", cfg_path]) == 0
    assert "ok" in capsys.readouterr().out


def test_oracle_matrix_game_to_stdout(tmp_path, capsys):
    from hetgames import matrix_game_from_zero_sum, save_game

    game_path = tmp_path / "pennies.json"
    save_game(matrix_game_from_zero_sum([[1.0, -1.0], [-1.0, 1.0]]), game_path)
    assert main(["oracle", "--game", str(game_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["kind"] == "matrix"
    assert payload["value"] == pytest.approx(0.0, abs=1e-9)


def test_run_preset_with_overrides(tmp_path, capsys):
    rc = main(
        [
            "run",
            "scenario1",
            "--horizon",
            "400",
            "--trials",
            "2",
            "--log-interval",
            "200",
            "--seed",
            "99",
        ]
    )
    assert rc == 0
    assert "2 trials, horizon 400" in capsys.readouterr().out


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["run", "scenario1", "--frobnicate"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_preset_rejected(capsys):
    assert main(["run", "nosuch"]) == 1
    err = capsys.readouterr().err
    assert "error" in err and "scenario1" in err


def test_preset_and_config_conflict(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{}")
    assert main(["run", "scenario1", "--config", str(p)]) == 1


def test_malformed_config_is_exit_1(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["validate", "--config", str(p)]) == 1
    assert "error" in capsys.readouterr().err


def test_validate_failure_is_exit_1(tmp_path, capsys):
    # second state absorbing: an exact-best-response learner may never
    # leave it, so validation must reject the pairing
    r1 = np.array([[[1.0, -1.0], [-1.0, 1.0]], [[0.5, -0.5], [-0.5, 0.5]]])
    kern = np.zeros((2, 2, 2, 2))
    kern[0, :, :, :] = [0.5, 0.5]
    kern[1, :, :, 1] = 1.0
    game = StochasticGame(rewards1=r1, rewards2=-r1, kernel=kern, gamma=0.3)
    cfg = ScenarioConfig(
        game=game,
        agents=(AgentSpec(temperature=0.0), AgentSpec()),
        horizon=100,
        n_trials=1,
        log_interval=50,
    )
    cfg_path = _write_scenario(tmp_path / "absorbing.json", cfg)
    assert main(["validate", "--config", cfg_path]) == 1
    assert "error:" in capsys.readouterr().out


def test_missing_game_file_is_exit_2(tmp_path, capsys):
    assert main(["oracle", "--game", str(tmp_path / "nope.json")]) == 2
    assert "io failure" in capsys.readouterr().err


def test_unwritable_output_is_exit_2(tmp_path, capsys):
    target = tmp_path / "no" / "such" / "dir" / "g.json"
    assert main(["gen", "--seed", "3", "--out", str(target)]) == 2


def test_console_script_entry():
    proc = subprocess.run(
        [sys.executable, "-c", "import hetgames.cli, sys; sys.exit(hetgames.cli.main(['validate', 'scenario1']))"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "ok" in proc.stdout
