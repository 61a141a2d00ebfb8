"""
Flight Stack - Evaluation Bench

Success/flight-time evaluation, the perception-aware ablation, latency benchmarking and trajectory files.
"""

from .trajectory import (
    TRAJECTORY_COLUMNS,
    Trajectory,
    export_trajectory,
    read_trajectory,
    reward_component_frame
)
from .evaluation import EvaluationReport, evaluate_policy, evaluation_seeds, format_time, policy_env
from .ablation import AWARENESS, MODES, AblationCell, AblationReport, ablation_perception, cell_name
from .latency import STAGES, LatencyReport, bench_latency, prerender_frames
from .reports import CASES, FlightReport, flight_report, write_evaluation_outputs

__all__ = [
    # Trajectories
    'TRAJECTORY_COLUMNS',
    'Trajectory',
    'export_trajectory',
    'read_trajectory',
    'reward_component_frame',

    # Evaluation
    'EvaluationReport',
    'evaluate_policy',
    'evaluation_seeds',
    'format_time',
    'policy_env',
    'CASES',
    'FlightReport',
    'flight_report',
    'write_evaluation_outputs',

    # Ablation
    'AWARENESS',
    'MODES',
    'AblationCell',
    'AblationReport',
    'ablation_perception',
    'cell_name',

    # Latency
    'STAGES',
    'LatencyReport',
    'bench_latency',
    'prerender_frames'
]
