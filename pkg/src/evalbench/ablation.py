"""
Flight Stack - Perception-Aware Ablation
2x2 comparison of {non-perception-aware, perception-aware} x {state-based, vision-based} policies
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import pandas as pd
from tabulate import tabulate

from ..depthcam import CameraIntrinsics
from ..nn import read_checkpoint
from ..rl_env import FlightEnv
from ..training.policies import StudentPolicy, TeacherPolicy
from ..utils import EvaluationError, get_logger
from .evaluation import EvaluationReport, evaluate_policy, format_time, policy_env

logger = get_logger("evalbench")

AWARENESS = ("Non-perception-aware", "Perception-aware")
MODES = ("State-based", "Vision-based")

CellKey = Tuple[str, str]


def cell_name(key: CellKey) -> str:
    return f"{key[0]} / {key[1]}"


@dataclass(frozen=True)
class AblationCell:
    """Checkpoint locations of one ablation cell; vision cells also need their encoder"""
    awareness: str
    mode: str
    policy_path: Optional[str] = None
    encoder_path: Optional[str] = None

    @property
    def key(self) -> CellKey:
        return (self.awareness, self.mode)

    def load(self, intr: CameraIntrinsics):
        """
        Raises:
            EvaluationError: Naming this cell when a required checkpoint is missing
        """
        required = [self.policy_path] + ([self.encoder_path] if self.mode == MODES[1] else [])
        for path in required:
            if path is None or not Path(path).exists():
                raise EvaluationError(f"Missing checkpoint for ablation cell '{cell_name(self.key)}': {path}",
                                      cell=cell_name(self.key), path=None if path is None else str(path))
        net = read_checkpoint(self.policy_path)
        if self.mode == MODES[0]:
            return TeacherPolicy(net)
        return StudentPolicy(net, read_checkpoint(self.encoder_path), intr)


@dataclass
class AblationReport:
    reports: Dict[CellKey, EvaluationReport]

    def table(self) -> pd.DataFrame:
        rows = []
        for awareness in AWARENESS:
            row = {"": awareness}
            for mode in MODES:
                report = self.reports[(awareness, mode)]
                yaw = report.mean_yaw_error
                row[f"{mode} Success[%]"] = round(report.success_rate, 1)
                row[f"{mode} Time[s]"] = format_time(report.time_mean, report.time_std)
                row[f"{mode} Yaw error[deg]"] = "-" if yaw is None else round(math.degrees(yaw), 2)
            rows.append(row)
        return pd.DataFrame(rows)

    def to_text(self) -> str:
        return tabulate(self.table(), headers="keys", tablefmt="github", showindex=False)


def ablation_perception(policies: Dict[CellKey, object], env: FlightEnv, n_runs: int = 20,
                        seed: int = 0, workers: int = 0) -> AblationReport:
    """
    Evaluate all four cells from the same start seeds

    Every cell flies the same world and path; each policy gets the action
    scale it was trained with.

    Raises:
        EvaluationError: If a cell has no policy
    """
    reports = {}
    for awareness in AWARENESS:
        for mode in MODES:
            key = (awareness, mode)
            policy = policies.get(key)
            if policy is None:
                raise EvaluationError(f"Missing policy for ablation cell '{cell_name(key)}'", cell=cell_name(key))
            reports[key] = evaluate_policy(policy, policy_env(env, policy), n_runs=n_runs, seed=seed,
                                           label=cell_name(key), workers=workers)
    report = AblationReport(reports)
    logger.info(f"📊 Perception-aware ablation\n{report.to_text()}")
    return report
