"""
Flight Stack - Policy Evaluation
Closed-loop success rate and flight-time statistics over uniformly drawn starts
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional

import numpy as np

from ..rl_env import FlightEnv
from ..training.rollout import EpisodeRecord, run_episode
from ..utils import get_evaluation_logger, get_performance_tracker
from .trajectory import Trajectory


@dataclass
class EvaluationReport:
    label: str
    n_runs: int
    successes: int
    time_mean: Optional[float]
    time_std: Optional[float]
    seeds: List[int] = field(default_factory=list)
    records: List[EpisodeRecord] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        """Percentage of runs that reached the goal"""
        return 100.0 * self.successes / self.n_runs if self.n_runs else 0.0

    @property
    def outcomes(self) -> List[str]:
        return [r.outcome for r in self.records]

    @property
    def mean_yaw_error(self) -> Optional[float]:
        """Mean |yaw - direction to the lookahead point| over every step of every run, radians"""
        errors = [e for r in self.records for e in r.yaw_errors]
        return float(np.mean(errors)) if errors else None

    def trajectories(self) -> List[Trajectory]:
        return [Trajectory.from_record(r) for r in self.records]

    def summary(self) -> dict:
        return {"label": self.label, "runs": self.n_runs, "success_rate": self.success_rate,
                "time_mean": self.time_mean, "time_std": self.time_std, "mean_yaw_error": self.mean_yaw_error}


def evaluation_seeds(seed: int, n_runs: int) -> List[int]:
    """Start seeds of an evaluation sweep; cells sharing ``seed`` fly from identical starts"""
    return [int(s) for s in np.random.default_rng([int(seed), 6]).integers(2 ** 31, size=n_runs)]


def policy_env(env: FlightEnv, policy) -> FlightEnv:
    """The environment rescaled to the action scale stored with the policy"""
    return env.with_action_scale(getattr(policy, "action_scale", env.settings.action_scale))


def _fly(env: FlightEnv, policy, seed: int) -> EpisodeRecord:
    return run_episode(env, policy, seed, deterministic=True)


def evaluate_policy(policy, env: FlightEnv, n_runs: int = 20, seed: int = 0, label: str = "policy",
                    workers: int = 0) -> EvaluationReport:
    """
    Fly n_runs deterministic episodes and summarize them

    Flight-time mean and std (population) are taken over successful runs only
    and are None when no run succeeds.
    """
    evaluation_logger = get_evaluation_logger()
    tracker = get_performance_tracker()
    tracker.start_timing(f"evaluation {label}")

    seeds = evaluation_seeds(seed, n_runs)
    if workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(partial(_fly, env, policy), seeds))
    else:
        records = [_fly(env, policy, s) for s in seeds]

    for run, record in enumerate(records):
        evaluation_logger.log_episode(label, run, record.outcome, record.flight_time)

    times = [r.flight_time for r in records if r.success]
    time_mean = float(np.mean(times)) if times else None
    time_std = float(np.std(times)) if times else None
    report = EvaluationReport(label=label, n_runs=n_runs, successes=len(times), time_mean=time_mean,
                              time_std=time_std, seeds=seeds, records=records)
    evaluation_logger.log_summary(label, report.success_rate, time_mean, time_std)
    tracker.end_timing(f"evaluation {label}")
    return report


def format_time(mean: Optional[float], std: Optional[float]) -> str:
    return "-" if mean is None else f"{mean:.2f} ± {std:.2f}"
