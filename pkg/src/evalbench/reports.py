"""
Flight Stack - Flight Reports
Per-case success and flight-time tables for teacher and student, plus verbose reward dumps
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Union

import pandas as pd
from tabulate import tabulate

from ..rl_env import FlightEnv
from ..utils import get_logger
from .evaluation import EvaluationReport, evaluate_policy, format_time, policy_env
from .trajectory import Trajectory, export_trajectory, reward_component_frame

logger = get_logger("evalbench")

CASES = (0, 1, 2, 3)


@dataclass
class FlightReport:
    kind: str
    reports: Dict[str, List[EvaluationReport]]
    cases: Sequence[int] = CASES

    def table(self) -> pd.DataFrame:
        rows = []
        for index, case in enumerate(self.cases):
            row = {"Case": case + 1}
            for label, reports in self.reports.items():
                report = reports[index]
                row[f"{label} Success[%]"] = round(report.success_rate, 1)
                row[f"{label} Time[s]"] = format_time(report.time_mean, report.time_std)
            rows.append(row)
        return pd.DataFrame(rows)

    def to_text(self) -> str:
        return f"{self.kind}\n" + tabulate(self.table(), headers="keys", tablefmt="github", showindex=False)


def flight_report(policies: Dict[str, object], env_factory: Callable[[int], FlightEnv], kind: str,
                  n_runs: int = 20, seed: int = 0, cases: Sequence[int] = CASES, workers: int = 0) -> FlightReport:
    """
    Evaluate every policy on every start/goal case of one environment

    Args:
        policies: Column label -> policy, e.g. {"Teacher": ..., "Student": ...}
        env_factory: Builds the evaluation environment of a case
    """
    reports: Dict[str, List[EvaluationReport]] = {label: [] for label in policies}
    for case in cases:
        env = env_factory(case)
        for label, policy in policies.items():
            reports[label].append(evaluate_policy(policy, policy_env(env, policy), n_runs=n_runs, seed=seed,
                                                  label=f"{kind} case {case + 1} {label}", workers=workers))
    report = FlightReport(kind, reports, tuple(cases))
    logger.info(f"📊 Flight report\n{report.to_text()}")
    return report


def write_evaluation_outputs(report: EvaluationReport, out_dir: Union[str, Path], verbose: bool = False) -> Path:
    """
    Trajectory CSV per run (``<label>_run<k>.csv``); with verbose also the
    per-step reward components (``<label>_run<k>_rewards.csv``)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = report.label.replace(" ", "_").replace("/", "-")
    for run, record in enumerate(report.records):
        if not record.commands:
            continue
        export_trajectory(Trajectory.from_record(record), out_dir / f"{stem}_run{run}.csv")
        if verbose:
            reward_component_frame(record).to_csv(out_dir / f"{stem}_run{run}_rewards.csv", index=False,
                                                  float_format="%.9g", lineterminator="\n")
    summary = pd.DataFrame([report.summary()])
    summary.to_csv(out_dir / f"{stem}_summary.csv", index=False, float_format="%.9g", lineterminator="\n")
    return out_dir
