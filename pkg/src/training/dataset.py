"""
Flight Stack - Depth Datasets
Depth images, teacher observations and teacher actions collected by rolling out a frozen teacher

On disk a dataset is a directory with:
    depth.bin   concatenated depth blobs (u32 width, u32 height, f32 row-major depths)
    index.csv   one row per image: episode, step, offset, obs_0..obs_23, act_0..act_3, split, max_range
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from ..depthcam import CameraIntrinsics, pack_depth_blob, unpack_depth_blob
from ..rl_env import ACTION_DIM, TEACHER_OBS_DIM, FlightEnv
from ..utils import DatasetError, get_logger, get_performance_tracker
from .policies import TeacherPolicy

logger = get_logger("dataset")

SPLITS = ("train", "validation")
DEPTH_FILE = "depth.bin"
INDEX_FILE = "index.csv"


@dataclass(eq=False)
class DepthDataset:
    """
    Aligned arrays, one row per rendered frame

    ``images`` holds metric depth (N, H, W) f32; ``normalized`` divides by max_range.
    Frames are split by episode, so no episode contributes to both splits.
    """
    images: np.ndarray
    observations: np.ndarray
    actions: np.ndarray
    episodes: np.ndarray
    steps: np.ndarray
    split: np.ndarray
    max_range: float = 10.0

    def __post_init__(self):
        n = len(self.images)
        if self.images.ndim != 3:
            raise DatasetError(f"Depth images must be (N, H, W), got {self.images.shape}")
        for name in ("observations", "actions", "episodes", "steps", "split"):
            if len(getattr(self, name)) != n:
                raise DatasetError(f"Dataset field '{name}' has {len(getattr(self, name))} rows, expected {n}")
        unknown = set(np.unique(self.split)) - set(SPLITS)
        if unknown:
            raise DatasetError(f"Unknown split labels: {sorted(unknown)}")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    @property
    def normalized(self) -> np.ndarray:
        return (self.images / np.float32(self.max_range)).astype(np.float32)

    def indices(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.split == split)


def save_dataset(dataset: DepthDataset, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    offsets = []
    with open(directory / DEPTH_FILE, "wb") as f:
        for image in dataset.images:
            offsets.append(f.tell())
            f.write(pack_depth_blob(image))

    index = pd.DataFrame({"episode": dataset.episodes.astype(int), "step": dataset.steps.astype(int),
                          "offset": offsets})
    for i in range(dataset.observations.shape[1]):
        index[f"obs_{i}"] = dataset.observations[:, i]
    for i in range(dataset.actions.shape[1]):
        index[f"act_{i}"] = dataset.actions[:, i]
    index["split"] = dataset.split
    index["max_range"] = dataset.max_range
    index.to_csv(directory / INDEX_FILE, index=False, float_format="%.9g", lineterminator="\n")
    logger.info(f"💾 Dataset saved: {directory} ({len(dataset)} frames)")
    return directory


def load_dataset(directory: Union[str, Path]) -> DepthDataset:
    """
    Raises:
        DatasetError: If files are missing, offsets disagree or blobs are truncated
    """
    directory = Path(directory)
    depth_path, index_path = directory / DEPTH_FILE, directory / INDEX_FILE
    for path in (depth_path, index_path):
        if not path.exists():
            raise DatasetError(f"Dataset file not found: {path}", path=str(path))

    index = pd.read_csv(index_path)
    buffer = depth_path.read_bytes()
    images, offset = [], 0
    for expected in index["offset"]:
        if int(expected) != offset:
            raise DatasetError(f"Index offset {expected} does not match blob offset {offset}", path=str(depth_path))
        image, offset = unpack_depth_blob(buffer, offset)
        images.append(image)
    if offset != len(buffer):
        raise DatasetError(f"{len(buffer) - offset} trailing bytes after the last indexed blob", path=str(depth_path))

    obs_cols = [c for c in index.columns if c.startswith("obs_")]
    act_cols = [c for c in index.columns if c.startswith("act_")]
    max_range = float(index["max_range"].iloc[0]) if len(index) else 10.0
    return DepthDataset(
        images=np.stack(images) if images else np.zeros((0, 1, 1), dtype=np.float32),
        observations=index[obs_cols].to_numpy(dtype=np.float32),
        actions=index[act_cols].to_numpy(dtype=np.float32),
        episodes=index["episode"].to_numpy(dtype=int),
        steps=index["step"].to_numpy(dtype=int),
        split=index["split"].to_numpy(dtype=object).astype(str),
        max_range=max_range,
    )


def collect_depth_dataset(teacher: TeacherPolicy, env: FlightEnv, n_episodes: int, seed: int,
                          intr: CameraIntrinsics, validation_fraction: float = 0.1,
                          require_success: bool = True) -> DepthDataset:
    """
    Roll out the frozen teacher and record (depth image, observation, action) at every step

    The teacher acts with its deterministic mean; failed episodes are kept up
    to the failure step. The last round(validation_fraction * n_episodes)
    episodes form the validation split.

    Raises:
        DatasetError: If n_episodes < 1, or no episode reaches the goal while
            require_success is set
    """
    if n_episodes < 1:
        raise DatasetError(f"Need at least one episode, got {n_episodes}")
    tracker = get_performance_tracker()
    tracker.start_timing("depth dataset collection")

    episode_seeds = np.random.default_rng([int(seed), 2]).integers(2 ** 31, size=n_episodes)
    n_validation = min(int(round(validation_fraction * n_episodes)), n_episodes - 1)

    images, observations, actions, episodes, steps, split = [], [], [], [], [], []
    successes = 0
    for episode, episode_seed in enumerate(episode_seeds):
        obs = env.reset(int(episode_seed))
        label = "validation" if episode >= n_episodes - n_validation else "train"
        step, done = 0, False
        while not done:
            action = teacher.mean_action(obs)
            images.append(env.render_depth(intr).data)
            observations.append(obs)
            actions.append(action)
            episodes.append(episode)
            steps.append(step)
            split.append(label)
            obs, _, done, info = env.step(action)
            step += 1
        successes += info["reason"] == "goal"

    if require_success and successes == 0:
        raise DatasetError(f"Teacher never reached the goal in {n_episodes} episodes")

    dataset = DepthDataset(
        images=np.asarray(images, dtype=np.float32),
        observations=np.asarray(observations, dtype=np.float32).reshape(-1, TEACHER_OBS_DIM),
        actions=np.asarray(actions, dtype=np.float32).reshape(-1, ACTION_DIM),
        episodes=np.asarray(episodes, dtype=int),
        steps=np.asarray(steps, dtype=int),
        split=np.asarray(split, dtype=str),
        max_range=intr.max_range,
    )
    tracker.end_timing("depth dataset collection",
                       f"{len(dataset)} frames, teacher success {successes}/{n_episodes}")
    return dataset

