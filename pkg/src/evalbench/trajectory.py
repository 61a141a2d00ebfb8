"""
Flight Stack - Trajectory Files
One CSV row per control step: time, state, command and reward
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..rl_env import COMPONENTS
from ..utils import EvaluationError, get_logger

logger = get_logger("evalbench")

TRAJECTORY_COLUMNS = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz",
    "thrust", "wcx", "wcy", "wcz", "r_total", "r_pa",
]
FLOAT_FORMAT = "%.9g"


@dataclass(eq=False)
class Trajectory:
    """
    Flown trajectory as an f32 frame in TRAJECTORY_COLUMNS order

    Row k holds the state reached after control step k, the command applied
    during it and the reward it earned.
    """
    frame: pd.DataFrame
    outcome: Optional[str] = None
    flight_time: float = 0.0

    def __len__(self) -> int:
        return len(self.frame)

    @classmethod
    def from_record(cls, record) -> "Trajectory":
        rows = []
        for state, cmd, reward, r_pa in zip(record.states[1:], record.commands, record.rewards, record.r_pa):
            rows.append(np.concatenate([[state.time], state.position, state.velocity, state.orientation,
                                        state.body_rates, [cmd.thrust], cmd.body_rates, [reward, r_pa]]))
        values = np.asarray(rows, dtype=np.float32).reshape(-1, len(TRAJECTORY_COLUMNS))
        return cls(pd.DataFrame(values, columns=TRAJECTORY_COLUMNS), record.outcome, record.flight_time)


def _as_frame(traj: Union[Trajectory, pd.DataFrame]) -> pd.DataFrame:
    frame = traj.frame if isinstance(traj, Trajectory) else traj
    return frame[TRAJECTORY_COLUMNS].astype(np.float32)


def export_trajectory(traj: Union[Trajectory, pd.DataFrame], path: Union[str, Path]) -> Path:
    """
    Write the trajectory CSV

    Raises:
        EvaluationError: If the trajectory is empty or the path cannot be written
    """
    frame = _as_frame(traj)
    if frame.empty:
        raise EvaluationError("Cannot export an empty trajectory", path=str(path))
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise EvaluationError(f"Cannot write trajectory: {e}", path=str(path)) from e
    logger.debug(f"💾 Trajectory written: {path} ({len(frame)} rows)")
    return path


def read_trajectory(path: Union[str, Path]) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise EvaluationError(f"Trajectory file not found: {path}", path=str(path))
    frame = pd.read_csv(path)
    missing = [c for c in TRAJECTORY_COLUMNS if c not in frame.columns]
    if missing:
        raise EvaluationError(f"Trajectory file lacks columns {missing}", path=str(path))
    return Trajectory(frame[TRAJECTORY_COLUMNS].astype(np.float32))


def reward_component_frame(record) -> pd.DataFrame:
    """Per-step weighted reward components of one episode and their total"""
    frame = pd.DataFrame([{name: c[name] for name in COMPONENTS} for c in record.components],
                         columns=list(COMPONENTS))
    frame.insert(0, "step", np.arange(1, len(frame) + 1))
    frame["total"] = np.asarray(record.rewards, dtype=np.float64)
    return frame
