"""
Flight Stack - Policies
Teacher (state-based), student (depth-based) and constant policies behind one observe/act interface
"""

import math
from typing import Optional

import numpy as np

from ..depthcam import CameraIntrinsics, normalize_depth
from ..nn import Network
from ..rl_env import ACTION_DIM, FlightEnv, observe_student
from ..utils import NetworkShapeError


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Log-density of diagonal Gaussians, summed over the action axis"""
    std = np.exp(log_std)
    z = (actions - mean) / std
    return (-0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[-1] * math.log(2.0 * math.pi))


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std + 0.5 * math.log(2.0 * math.pi * math.e)))


class TeacherPolicy:
    """
    Gaussian policy over the tanh-squashed output of the teacher MLP

    Sampled actions are clipped to [-1, 1] before they reach the vehicle; the
    deterministic action is the mean.
    """

    def __init__(self, net: Network, log_std: Optional[np.ndarray] = None):
        if net.output_shape != (ACTION_DIM,):
            raise NetworkShapeError(f"Teacher network must output {ACTION_DIM} values",
                                    layer_index=len(net.layers) - 1, expected=(ACTION_DIM,),
                                    received=net.output_shape)
        self.net = net
        if log_std is None:
            log_std = net.metadata.get("log_std", [-0.5] * ACTION_DIM)
        self.log_std = np.asarray(log_std, dtype=np.float64)

    @property
    def action_scale(self) -> float:
        return float(self.net.metadata.get("action_scale", 1.0))

    def observe(self, env: FlightEnv) -> np.ndarray:
        return env.teacher_observation()

    def mean_action(self, obs: np.ndarray) -> np.ndarray:
        return self.net.forward(obs)

    def act(self, obs: np.ndarray, deterministic: bool = True, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        mean = self.mean_action(obs)
        if deterministic:
            return mean
        sample = mean + np.exp(self.log_std) * rng.standard_normal(ACTION_DIM)
        return np.clip(sample, -1.0, 1.0)


class StudentPolicy:
    """Depth image -> frozen encoder -> student MLP"""

    def __init__(self, net: Network, encoder: Network, intrinsics: CameraIntrinsics):
        self.net = net
        self.encoder = encoder
        self.intrinsics = intrinsics

    @property
    def action_scale(self) -> float:
        return float(self.net.metadata.get("action_scale", 1.0))

    def embed(self, env: FlightEnv) -> np.ndarray:
        image = env.render_depth(self.intrinsics)
        return self.encoder.forward(normalize_depth(image)[None])

    def observe(self, env: FlightEnv) -> np.ndarray:
        return observe_student(env.episode, self.embed(env))

    def act(self, obs: np.ndarray, deterministic: bool = True, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return self.net.forward(obs)


class ConstantPolicy:
    """Always the same normalized action; (-1, 0, 0, 0) is zero thrust"""

    def __init__(self, action=(-1.0, 0.0, 0.0, 0.0), action_scale: float = 1.0):
        self.action = np.asarray(action, dtype=np.float32)
        self.action_scale = action_scale

    def observe(self, env: FlightEnv) -> np.ndarray:
        return env.teacher_observation()

    def act(self, obs: np.ndarray, deterministic: bool = True, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return self.action.copy()
