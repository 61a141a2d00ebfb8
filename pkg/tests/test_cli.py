"""
Flight Stack - Command Line Tests
"""

import os

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from src.cli import EXIT_CONFIG, cli
from src.config import load_config
from src.evalbench import TRAJECTORY_COLUMNS
from src.world import load_world


@pytest.fixture
def runner():
    return CliRunner()


def run_dir(out, name):
    matches = sorted(out.glob(f"*-{name}"))
    assert len(matches) == 1
    return matches[0]


def test_eval_names_the_missing_checkpoint(runner, tmp_path):
    missing = tmp_path / "teacher_nowhere.ckpt"
    result = runner.invoke(cli, ["--out", str(tmp_path), "eval", "--teacher", str(missing)])

    assert result.exit_code == EXIT_CONFIG
    assert "teacher_nowhere.ckpt" in result.output


def test_eval_needs_a_policy(runner, tmp_path):
    result = runner.invoke(cli, ["--out", str(tmp_path), "eval"])
    assert result.exit_code == EXIT_CONFIG


@pytest.mark.parametrize("args", [
    ["train-ae", "--dataset", "no_such_dataset"],
    ["distill", "--teacher", "no_such_teacher.ckpt", "--encoder", "no_such_encoder.ckpt"],
    ["bench-latency", "--student", "no_such_student.ckpt", "--encoder", "no_such_encoder.ckpt"],
    ["ablate", "--teacher-nonpa", "no_such_teacher.ckpt"],
])
def test_missing_inputs_exit_with_config_code(runner, tmp_path, args):
    result = runner.invoke(cli, ["--out", str(tmp_path)] + args)
    assert result.exit_code == EXIT_CONFIG
    assert "no_such" in result.output


def test_invalid_config_key_exits_with_config_code(runner, tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text("ppo:\n  learning_rat: 0.1\n", encoding="utf-8")
    result = runner.invoke(cli, ["--config", str(config), "--out", str(tmp_path), "export-path"])

    assert result.exit_code == EXIT_CONFIG
    assert "ppo.learning_rat" in result.output


def test_export_path_writes_trajectory_format(runner, tmp_path):
    result = runner.invoke(cli, ["--out", str(tmp_path), "export-path"])
    assert result.exit_code == 0, result.output

    directory = run_dir(tmp_path, "export-path")
    frame = pd.read_csv(directory / "path.csv")
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    assert len(frame) >= 2
    assert frame["t"].iloc[0] == 0.0
    assert np.all(np.diff(frame["t"]) > 0)
    assert (directory / "config.yaml").exists()


def test_render_env_writes_world_and_depth(runner, tmp_path):
    result = runner.invoke(cli, ["--out", str(tmp_path), "--seed", "3", "render-env", "--frames", "2"])
    assert result.exit_code == 0, result.output

    directory = run_dir(tmp_path, "render-env")
    world = load_world(directory / "world.yaml")
    assert world.kind == "Columns"
    for index in range(2):
        assert (directory / f"depth_{index:03d}.pgm").read_bytes().startswith(b"P5\n64 48\n65535\n")
        assert (directory / f"depth_{index:03d}.bin").stat().st_size == 8 + 64 * 48 * 4


def test_rerun_from_saved_config_reproduces_path_bytes(runner, tmp_path):
    first_out, second_out = tmp_path / "first", tmp_path / "second"
    result = runner.invoke(cli, ["--out", str(first_out), "--seed", "5", "export-path", "--kind", "Office"])
    assert result.exit_code == 0, result.output
    first = run_dir(first_out, "export-path")

    result = runner.invoke(cli, ["--config", str(first / "config.yaml"), "--out", str(second_out), "export-path"])
    assert result.exit_code == 0, result.output
    second = run_dir(second_out, "export-path")

    assert load_config(second / "config.yaml").environment.kind == "Office"
    assert (first / "path.csv").read_bytes() == (second / "path.csv").read_bytes()


def test_default_workers_recorded_as_logical_cores(runner, tmp_path):
    result = runner.invoke(cli, ["--out", str(tmp_path), "export-path"])
    assert result.exit_code == 0, result.output

    saved = load_config(run_dir(tmp_path, "export-path") / "config.yaml")
    assert saved.runtime.workers == (os.cpu_count() or 1)


def test_explicit_workers_option_is_kept(runner, tmp_path):
    result = runner.invoke(cli, ["--out", str(tmp_path), "--workers", "1", "export-path"])
    assert result.exit_code == 0, result.output

    saved = load_config(run_dir(tmp_path, "export-path") / "config.yaml")
    assert saved.runtime.workers == 1
