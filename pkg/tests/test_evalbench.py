"""
Flight Stack - Evaluation Bench Tests
"""

import numpy as np
import pandas as pd
import pytest

from conftest import straight_env
from src.evalbench import (
    AWARENESS,
    MODES,
    TRAJECTORY_COLUMNS,
    AblationCell,
    Trajectory,
    ablation_perception,
    bench_latency,
    evaluate_policy,
    evaluation_seeds,
    export_trajectory,
    flight_report,
    format_time,
    policy_env,
    prerender_frames,
    read_trajectory,
    write_evaluation_outputs,
)
from src.nn import build_encoder
from src.planner import GuidingPath
from src.rl_env import FlightEnv
from src.training import ConstantPolicy, EpisodeRecord, build_student
from src.utils import EvaluationError
from src.world import open_world

HOVER = ConstantPolicy(action=(0.0, 0.0, 0.0, 0.0))


def goal_adjacent_env() -> FlightEnv:
    """Start already within goal tolerance: every episode succeeds after one step"""
    world = open_world(goal=(1.8, 10.0, 1.5))
    return FlightEnv(world, GuidingPath.from_vertices([world.start_center, world.goal]))


def one_step_record() -> EpisodeRecord:
    env = straight_env()
    env.reset(0)
    record = EpisodeRecord(states=[env.state])
    _, reward, _, info = env.step(np.zeros(4))
    record.states.append(env.state)
    record.commands.append(info["command"])
    record.components.append(info["components"])
    record.rewards.append(reward)
    record.r_pa.append(info["r_pa"])
    return record


def test_one_step_trajectory_export(tmp_path):
    trajectory = Trajectory.from_record(one_step_record())
    path = export_trajectory(trajectory, tmp_path / "traj.csv")

    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[0].split(",") == TRAJECTORY_COLUMNS
    assert len(lines[1].split(",")) == 20

    loaded = read_trajectory(path)
    assert loaded.frame.dtypes.unique().tolist() == [np.dtype(np.float32)]
    assert np.array_equal(loaded.frame.to_numpy(), trajectory.frame.to_numpy())
    assert loaded.frame["t"].iloc[0] == pytest.approx(0.02)


def test_trajectory_file_errors(tmp_path):
    with pytest.raises(EvaluationError):
        export_trajectory(pd.DataFrame(columns=TRAJECTORY_COLUMNS), tmp_path / "empty.csv")
    with pytest.raises(EvaluationError):
        read_trajectory(tmp_path / "missing.csv")

    partial = tmp_path / "partial.csv"
    partial.write_text("t,px\n0.0,1.0\n", encoding="utf-8")
    with pytest.raises(EvaluationError):
        read_trajectory(partial)


def test_evaluation_of_a_falling_policy(env):
    report = evaluate_policy(ConstantPolicy(), env, n_runs=3, seed=4, label="falling")

    assert report.success_rate == 0.0
    assert report.time_mean is None
    assert report.outcomes == ["collision"] * 3
    assert report.seeds == evaluation_seeds(4, 3)
    assert format_time(report.time_mean, report.time_std) == "-"


def test_evaluation_of_a_succeeding_policy():
    report = evaluate_policy(HOVER, goal_adjacent_env(), n_runs=4, label="hover")

    assert report.success_rate == 100.0
    assert report.time_mean == pytest.approx(0.02)
    assert report.time_std == pytest.approx(0.0)
    assert format_time(report.time_mean, report.time_std) == "0.02 ± 0.00"


def test_ablation_table_has_every_cell():
    policies = {(awareness, mode): HOVER for awareness in AWARENESS for mode in MODES}
    report = ablation_perception(policies, goal_adjacent_env(), n_runs=2)
    table = report.table()

    assert list(table[""]) == list(AWARENESS)
    assert (table["Vision-based Success[%]"] == 100.0).all()
    assert "Perception-aware" in report.to_text()

    del policies[("Perception-aware", "Vision-based")]
    with pytest.raises(EvaluationError) as excinfo:
        ablation_perception(policies, goal_adjacent_env(), n_runs=2)
    assert excinfo.value.cell == "Perception-aware / Vision-based"


def test_ablation_cell_reports_missing_checkpoint(tmp_path, small_camera):
    cell = AblationCell("Non-perception-aware", "Vision-based", policy_path=str(tmp_path / "student.ckpt"))
    with pytest.raises(EvaluationError) as excinfo:
        cell.load(small_camera)
    assert excinfo.value.cell == "Non-perception-aware / Vision-based"
    assert "student.ckpt" in str(excinfo.value)


def test_latency_report(env, small_camera):
    frames = prerender_frames(env, small_camera, n_frames=3)
    report = bench_latency(build_student(16, hidden=(8,)), build_encoder(24, 24, 16), frames, env,
                           n_frames=20, warmup=5)

    assert report.n_frames == 20
    assert list(report.stages["stage"]) == ["Pre-processing", "NN inference"]
    assert report.stages["percent"].sum() == pytest.approx(100.0)
    assert report.total_ms == pytest.approx(report.stages["mean_ms"].sum())
    assert "Total" in report.to_text()

    with pytest.raises(EvaluationError):
        bench_latency(build_student(16, hidden=(8,)), build_encoder(24, 24, 16), [], env)
    with pytest.raises(EvaluationError):
        bench_latency(build_student(16, hidden=(8,)), build_encoder(24, 24, 16), frames, env, n_frames=0)


def test_write_evaluation_outputs(tmp_path):
    report = evaluate_policy(HOVER, goal_adjacent_env(), n_runs=2, label="hover test")
    write_evaluation_outputs(report, tmp_path, verbose=True)

    assert (tmp_path / "hover_test_run0.csv").exists()
    assert (tmp_path / "hover_test_run1.csv").exists()
    rewards = pd.read_csv(tmp_path / "hover_test_run0_rewards.csv")
    assert list(rewards.columns) == ["step", "progress", "reached", "waypoint", "collision", "omega",
                                     "perception", "total"]
    np.testing.assert_allclose(rewards.drop(columns=["step", "total"]).sum(axis=1), rewards["total"], atol=1e-6)
    summary = pd.read_csv(tmp_path / "hover_test_summary.csv")
    assert summary["success_rate"].iloc[0] == 100.0


def test_flight_report_over_cases():
    report = flight_report({"Teacher": HOVER, "Student": ConstantPolicy()}, lambda case: goal_adjacent_env(),
                           kind="Open", n_runs=2, cases=(0, 1))
    table = report.table()

    assert list(table["Case"]) == [1, 2]
    assert (table["Teacher Success[%]"] == 100.0).all()
    assert report.to_text().startswith("Open")


def test_each_ablation_cell_flies_with_its_own_action_scale():
    yaw = (0.0, 0.0, 0.0, 0.5)
    policies = {(awareness, mode): ConstantPolicy(action=yaw) for awareness in AWARENESS for mode in MODES}
    slow = ("Perception-aware", "Vision-based")
    policies[slow] = ConstantPolicy(action=yaw, action_scale=0.5)
    env = goal_adjacent_env()

    report = ablation_perception(policies, env, n_runs=1)

    full_rate = report.reports[("Perception-aware", "State-based")].records[0].commands[0].body_rates[2]
    slow_rate = report.reports[slow].records[0].commands[0].body_rates[2]
    assert slow_rate == pytest.approx(0.5 * full_rate)
    assert full_rate > 0.0
    assert env.settings.action_scale == 1.0
    assert policy_env(env, policies[slow]).settings.action_scale == 0.5
