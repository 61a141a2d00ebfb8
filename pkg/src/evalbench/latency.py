"""
Flight Stack - Latency Benchmark
Per-frame wall-clock cost of depth pre-processing and policy inference
"""

import time
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd
from tabulate import tabulate

from ..depthcam import CameraIntrinsics, DepthImage, normalize_depth
from ..nn import Network
from ..rl_env import FlightEnv, observe_student
from ..utils import EvaluationError, get_logger

logger = get_logger("evalbench")

STAGES = ("Pre-processing", "NN inference")


@dataclass
class LatencyReport:
    """Per-stage mean/std in ms and share of the total; total is the sum of stage means"""
    stages: pd.DataFrame
    n_frames: int

    @property
    def total_ms(self) -> float:
        return float(self.stages["mean_ms"].sum())

    @classmethod
    def from_samples(cls, samples_ns: dict) -> "LatencyReport":
        rows = []
        for stage in STAGES:
            ms = np.asarray(samples_ns[stage], dtype=np.float64) / 1e6
            rows.append({"stage": stage, "mean_ms": float(ms.mean()), "std_ms": float(ms.std())})
        frame = pd.DataFrame(rows)
        total = frame["mean_ms"].sum()
        frame["percent"] = 100.0 * frame["mean_ms"] / total if total > 0 else 100.0 / len(STAGES)
        return cls(frame, len(samples_ns[STAGES[0]]))

    def to_text(self) -> str:
        rows = [[r.stage, f"{r.mean_ms:.2f}", f"{r.std_ms:.2f}", f"{r.percent:.1f}"] for r in self.stages.itertuples()]
        rows.append(["Total", f"{self.total_ms:.2f}", "", "100.0"])
        return tabulate(rows, headers=["Stage", "μ [ms]", "σ [ms]", "%"], tablefmt="github")


def prerender_frames(env: FlightEnv, intr: CameraIntrinsics, n_frames: int, seed: int = 0) -> List[DepthImage]:
    """Depth images from n_frames reset poses; rendering is kept out of the timed loop"""
    seeds = np.random.default_rng([int(seed), 8]).integers(2 ** 31, size=n_frames)
    frames = []
    for s in seeds:
        env.reset(int(s))
        frames.append(env.render_depth(intr))
    return frames


def bench_latency(student: Network, encoder: Network, frames: Sequence[DepthImage], env: FlightEnv,
                  n_frames: int = 1000, warmup: int = 100) -> LatencyReport:
    """
    Time normalization + encoder (pre-processing) and observation assembly +
    student forward (inference) per frame, cycling through ``frames``

    The first ``warmup`` frames are excluded. Runs single-threaded with a
    monotonic nanosecond clock.
    """
    if not frames:
        raise EvaluationError("Latency benchmark needs at least one pre-rendered frame")
    if n_frames < 1:
        raise EvaluationError(f"Latency benchmark needs n_frames >= 1, got {n_frames}")
    if env.episode is None:
        env.reset(0)
    episode = env.episode
    samples = {stage: [] for stage in STAGES}
    for i in range(warmup + n_frames):
        image = frames[i % len(frames)]
        t0 = time.perf_counter_ns()
        z = encoder.forward(normalize_depth(image)[None])
        t1 = time.perf_counter_ns()
        student.forward(observe_student(episode, z))
        t2 = time.perf_counter_ns()
        if i >= warmup:
            samples[STAGES[0]].append(t1 - t0)
            samples[STAGES[1]].append(t2 - t1)
    report = LatencyReport.from_samples(samples)
    logger.info(f"⏱️ Latency over {n_frames} frames\n{report.to_text()}")
    return report
