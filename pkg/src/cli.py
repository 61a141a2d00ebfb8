"""
Flight Stack - Command Line Interface
One subcommand per pipeline stage; every run writes into its own timestamped directory

Usage:
    python -m src.cli --config config/experiment_config.yaml train-teacher --kind Columns
    python -m src.cli collect-depth --teacher runs/<id>/teacher.ckpt
    python -m src.cli train-ae --dataset runs/<id>/dataset
    python -m src.cli distill --teacher ... --encoder ...
    python -m src.cli eval --teacher ... [--student ... --encoder ...] [--all-cases]
"""

import functools
import os
import sys
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

import click

from .config import ExperimentConfig, load_config, save_config
from .depthcam import CameraIntrinsics, save_depth_blob, save_pgm
from .evalbench import (
    AWARENESS,
    MODES,
    AblationCell,
    ablation_perception,
    bench_latency,
    cell_name,
    evaluate_policy,
    export_trajectory,
    flight_report,
    policy_env,
    prerender_frames,
    write_evaluation_outputs
)
from .nn import read_checkpoint, write_checkpoint
from .planner import path_to_frame
from .rl_env import create_flight_env
from .training import (
    StudentPolicy,
    TeacherPolicy,
    collect_depth_dataset,
    distill_student,
    load_dataset,
    save_dataset,
    train_autoencoder,
    train_teacher
)
from .utils import (
    ConfigurationError,
    FlightStackError,
    ErrorReporter,
    get_error_handler,
    get_logger,
    log_system_info,
    log_system_shutdown
)
from .world import ENVIRONMENT_KINDS, save_world

logger = get_logger("cli")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


@dataclass
class RunContext:
    """Global options shared by every subcommand"""
    config_path: Optional[str]
    seed: Optional[int]
    out: Optional[str]
    workers: Optional[int]
    verbose: bool

    def resolve(self) -> ExperimentConfig:
        config = load_config(self.config_path)
        if self.seed is not None:
            config = config.override("runtime", seed=self.seed)
        if self.workers is not None:
            config = config.override("runtime", workers=self.workers)
        if config.runtime.workers == 0:
            config = config.override("runtime", workers=os.cpu_count() or 1)
        if self.out is not None:
            config = config.override("runtime", output_dir=self.out)
        if self.verbose:
            config = config.override("evaluation", verbose=True)
        return config

    def start_run(self, name: str, **overrides):
        """
        Resolve the config, apply subcommand overrides and create the run directory

        Returns:
            (config, run directory) with the resolved config already saved as config.yaml
        """
        config = self.resolve()
        for section, values in overrides.items():
            values = {k: v for k, v in values.items() if v is not None}
            if values:
                config = config.override(section, **values)
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
        run_dir = Path(config.runtime.output_dir) / f"{stamp}-{name}"
        run_dir.mkdir(parents=True, exist_ok=True)
        save_config(config, run_dir / "config.yaml")
        logger.info(f"📁 Run directory: {run_dir}")
        return config, run_dir


def require_file(path: Optional[str], what: str) -> Path:
    """Missing inputs are reported like configuration errors"""
    if path is None or not Path(path).exists():
        raise ConfigurationError(f"{what} not found: {path}", config_key=what)
    return Path(path)


def handle_errors(func):
    """Map ConfigurationError to exit code 2 and any other FlightStackError to exit code 1"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigurationError as e:
            get_error_handler().handle_error(e, context=func.__name__)
            click.echo(f"❌ {e.message}", err=True)
            sys.exit(EXIT_CONFIG)
        except FlightStackError as e:
            get_error_handler().handle_error(e, context=func.__name__)
            click.echo(f"❌ {e.message}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def _intrinsics(config: ExperimentConfig) -> CameraIntrinsics:
    return CameraIntrinsics.from_config(config.camera)


def _student_policy(student_path: str, encoder_path: str, config: ExperimentConfig) -> StudentPolicy:
    student = read_checkpoint(require_file(student_path, "student checkpoint"))
    encoder = read_checkpoint(require_file(encoder_path, "encoder checkpoint"))
    return StudentPolicy(student, encoder, _intrinsics(config))


kind_option = click.option("--kind", type=click.Choice(ENVIRONMENT_KINDS), default=None,
                           help="Environment kind (defaults to environment.kind)")


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Experiment YAML config")
@click.option("--seed", type=int, default=None, help="Override runtime.seed")
@click.option("--out", type=click.Path(), default=None, help="Override runtime.output_dir")
@click.option("--workers", type=int, default=None, help="Rollout/evaluation worker processes (default: logical cores)")
@click.option("--verbose", is_flag=True, help="Write per-step reward components during evaluation")
@click.pass_context
def cli(ctx, config_path, seed, out, workers, verbose):
    """Perception-aware quadrotor flight stack"""
    ctx.obj = RunContext(config_path, seed, out, workers, verbose)
    log_system_info()

    def shutdown():
        ErrorReporter(get_error_handler()).log_error_summary()
        log_system_shutdown()

    ctx.call_on_close(shutdown)


@cli.command("train-teacher")
@kind_option
@click.option("--iterations", type=int, default=None, help="Override ppo.iterations")
@click.pass_obj
@handle_errors
def train_teacher_command(run: RunContext, kind, iterations):
    """Train the state-based teacher with PPO and the curriculum"""
    config, run_dir = run.start_run("train-teacher", ppo={"iterations": iterations})
    result = train_teacher(config, run_dir, kind=kind, workers=config.runtime.workers)
    click.echo(f"✅ Teacher checkpoint: {result.checkpoint_path}")


@cli.command("collect-depth")
@kind_option
@click.option("--teacher", "teacher_path", type=click.Path(), default=None, help="Teacher checkpoint")
@click.option("--episodes", type=int, default=None, help="Override autoencoder.n_episodes")
@click.pass_obj
@handle_errors
def collect_depth_command(run: RunContext, kind, teacher_path, episodes):
    """Roll out the frozen teacher and record depth images"""
    teacher = TeacherPolicy(read_checkpoint(require_file(teacher_path, "teacher checkpoint")))
    config, run_dir = run.start_run("collect-depth", autoencoder={"n_episodes": episodes})
    env = create_flight_env(config, kind=kind, action_scale=teacher.action_scale)
    dataset = collect_depth_dataset(teacher, env, config.autoencoder.n_episodes, config.runtime.seed,
                                    _intrinsics(config), config.autoencoder.validation_fraction)
    path = save_dataset(dataset, run_dir / "dataset")
    click.echo(f"✅ Dataset: {path} ({len(dataset)} frames)")


@cli.command("train-ae")
@click.option("--dataset", "dataset_path", type=click.Path(), default=None, help="Dataset directory")
@click.option("--epochs", type=int, default=None, help="Override autoencoder.epochs")
@click.pass_obj
@handle_errors
def train_ae_command(run: RunContext, dataset_path, epochs):
    """Train the depth autoencoder"""
    dataset = load_dataset(require_file(dataset_path, "dataset directory"))
    config, run_dir = run.start_run("train-ae", autoencoder={"epochs": epochs})
    result = train_autoencoder(dataset, config.autoencoder.epochs, config.runtime.seed, config.autoencoder)
    encoder_path, _ = result.save(run_dir)
    final = result.history["validation_mse"].iloc[-1]
    click.echo(f"✅ Encoder: {encoder_path} (validation MSE {final:.5f})")


@cli.command("distill")
@kind_option
@click.option("--teacher", "teacher_path", type=click.Path(), default=None, help="Teacher checkpoint")
@click.option("--encoder", "encoder_path", type=click.Path(), default=None, help="Encoder checkpoint")
@click.option("--rounds", type=int, default=None, help="Override distillation.rounds")
@click.pass_obj
@handle_errors
def distill_command(run: RunContext, kind, teacher_path, encoder_path, rounds):
    """Distill the depth-based student from the teacher"""
    teacher = TeacherPolicy(read_checkpoint(require_file(teacher_path, "teacher checkpoint")))
    encoder = read_checkpoint(require_file(encoder_path, "encoder checkpoint"))
    config, run_dir = run.start_run("distill", distillation={"rounds": rounds})
    env = create_flight_env(config, kind=kind, action_scale=teacher.action_scale)
    result = distill_student(teacher, encoder, env, config.distillation, config.runtime.seed, _intrinsics(config))
    result.history.to_csv(run_dir / "distillation_log.csv", index=False, float_format="%.9g", lineterminator="\n")
    path = write_checkpoint(result.student, run_dir / "student.ckpt")
    click.echo(f"✅ Student checkpoint: {path}")


@cli.command("eval")
@kind_option
@click.option("--teacher", "teacher_path", type=click.Path(), default=None, help="Teacher checkpoint")
@click.option("--student", "student_path", type=click.Path(), default=None, help="Student checkpoint")
@click.option("--encoder", "encoder_path", type=click.Path(), default=None, help="Encoder checkpoint")
@click.option("--runs", type=int, default=None, help="Override evaluation.n_runs")
@click.option("--all-cases", is_flag=True, help="Evaluate all four start/goal cases and write a flight report")
@click.pass_obj
@handle_errors
def eval_command(run: RunContext, kind, teacher_path, student_path, encoder_path, runs, all_cases):
    """Closed-loop success rate and flight time"""
    if teacher_path is None and student_path is None:
        raise ConfigurationError("eval needs --teacher and/or --student", config_key="teacher checkpoint")
    policies = {}
    if teacher_path is not None:
        policies["Teacher"] = TeacherPolicy(read_checkpoint(require_file(teacher_path, "teacher checkpoint")))
    config = run.resolve()
    if student_path is not None:
        policies["Student"] = _student_policy(student_path, encoder_path, config)

    config, run_dir = run.start_run("eval", evaluation={"n_runs": runs}, environment={"kind": kind})
    kind = config.environment.kind

    if all_cases:
        report = flight_report(policies, lambda case: create_flight_env(config, kind=kind, case=case),
                               kind, config.evaluation.n_runs, config.runtime.seed, workers=config.runtime.workers)
        (run_dir / "flight_report.txt").write_text(report.to_text() + "\n", encoding="utf-8")
        report.table().to_csv(run_dir / "flight_report.csv", index=False, lineterminator="\n")
        click.echo(report.to_text())
        return

    env = create_flight_env(config, kind=kind)
    for label, policy in policies.items():
        report = evaluate_policy(policy, policy_env(env, policy), config.evaluation.n_runs, config.runtime.seed,
                                 label=label, workers=config.runtime.workers)
        write_evaluation_outputs(report, run_dir / label.lower(), verbose=config.evaluation.verbose)
        time_text = "-" if report.time_mean is None else f"{report.time_mean:.2f} ± {report.time_std:.2f} s"
        click.echo(f"📊 {label}: success {report.success_rate:.0f}% | time {time_text}")


@cli.command("ablate")
@kind_option
@click.option("--teacher-pa", type=click.Path(), default=None)
@click.option("--teacher-nonpa", type=click.Path(), default=None)
@click.option("--student-pa", type=click.Path(), default=None)
@click.option("--student-nonpa", type=click.Path(), default=None)
@click.option("--encoder-pa", type=click.Path(), default=None)
@click.option("--encoder-nonpa", type=click.Path(), default=None)
@click.option("--runs", type=int, default=None, help="Override evaluation.n_runs")
@click.pass_obj
@handle_errors
def ablate_command(run: RunContext, kind, teacher_pa, teacher_nonpa, student_pa, student_nonpa,
                   encoder_pa, encoder_nonpa, runs):
    """Perception-aware vs non-perception-aware, state-based vs vision-based"""
    cells = [
        AblationCell(AWARENESS[0], MODES[0], teacher_nonpa),
        AblationCell(AWARENESS[0], MODES[1], student_nonpa, encoder_nonpa),
        AblationCell(AWARENESS[1], MODES[0], teacher_pa),
        AblationCell(AWARENESS[1], MODES[1], student_pa, encoder_pa),
    ]
    for cell in cells:
        require_file(cell.policy_path, f"{cell_name(cell.key)} checkpoint")
        if cell.mode == MODES[1]:
            require_file(cell.encoder_path, f"{cell_name(cell.key)} encoder")

    config, run_dir = run.start_run("ablate", evaluation={"n_runs": runs, "ablation_kind": kind})
    intr = _intrinsics(config)
    policies = {cell.key: cell.load(intr) for cell in cells}
    env = create_flight_env(config, kind=config.evaluation.ablation_kind)
    report = ablation_perception(policies, env, config.evaluation.n_runs, config.runtime.seed,
                                 workers=config.runtime.workers)
    (run_dir / "ablation.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    report.table().to_csv(run_dir / "ablation.csv", index=False, lineterminator="\n")
    click.echo(report.to_text())


@cli.command("bench-latency")
@kind_option
@click.option("--student", "student_path", type=click.Path(), default=None, help="Student checkpoint")
@click.option("--encoder", "encoder_path", type=click.Path(), default=None, help="Encoder checkpoint")
@click.option("--frames", type=int, default=None, help="Override evaluation.latency_frames")
@click.pass_obj
@handle_errors
def bench_latency_command(run: RunContext, kind, student_path, encoder_path, frames):
    """Pre-processing and inference latency per frame"""
    config = run.resolve()
    policy = _student_policy(student_path, encoder_path, config)
    config, run_dir = run.start_run("bench-latency", evaluation={"latency_frames": frames})
    env = create_flight_env(config, kind=kind, action_scale=policy.action_scale)
    images = prerender_frames(env, policy.intrinsics, min(config.evaluation.latency_frames, 100),
                              config.runtime.seed)
    report = bench_latency(policy.net, policy.encoder, images, env, config.evaluation.latency_frames,
                           config.evaluation.warmup_frames)
    report.stages.to_csv(run_dir / "latency.csv", index=False, float_format="%.4f", lineterminator="\n")
    (run_dir / "latency.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    click.echo(report.to_text())


@cli.command("render-env")
@kind_option
@click.option("--frames", type=int, default=4, help="Depth images rendered from reset poses")
@click.pass_obj
@handle_errors
def render_env_command(run: RunContext, kind, frames):
    """Write the world file and depth images from random start poses"""
    config, run_dir = run.start_run("render-env", environment={"kind": kind})
    env = create_flight_env(config)
    save_world(env.world, run_dir / "world.yaml")
    for index, image in enumerate(prerender_frames(env, _intrinsics(config), frames, config.runtime.seed)):
        save_pgm(image, run_dir / f"depth_{index:03d}.pgm")
        save_depth_blob(image, run_dir / f"depth_{index:03d}.bin")
    click.echo(f"✅ World and {frames} depth images written to {run_dir}")


@cli.command("export-path")
@kind_option
@click.pass_obj
@handle_errors
def export_path_command(run: RunContext, kind):
    """Write the guiding path in trajectory format"""
    config, run_dir = run.start_run("export-path", environment={"kind": kind})
    env = create_flight_env(config)
    path = export_trajectory(path_to_frame(env.path), run_dir / "path.csv")
    click.echo(f"✅ Guiding path ({env.path.total_length:.2f} m): {path}")


def main():
    cli(obj=None)


if __name__ == "__main__":
    main()
