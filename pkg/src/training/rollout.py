"""
Flight Stack - Rollouts
Closed-loop episodes and PPO rollout collection over private per-worker environments

Every environment's random stream is derived from (seed, iteration, env_index),
so batches do not depend on how many worker processes collect them.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..dynamics import ControlCommand, QuadState
from ..nn import Network
from ..rl_env import FlightEnv
from .policies import gaussian_log_prob


@dataclass
class EpisodeRecord:
    """Per-step log of one closed-loop episode (states include the initial one)"""
    states: List[QuadState] = field(default_factory=list)
    commands: List[ControlCommand] = field(default_factory=list)
    components: List[Dict[str, float]] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    r_pa: List[float] = field(default_factory=list)
    yaw_errors: List[float] = field(default_factory=list)
    outcome: Optional[str] = None
    flight_time: float = 0.0
    seed: int = 0

    @property
    def success(self) -> bool:
        return self.outcome == "goal"

    @property
    def total_return(self) -> float:
        return float(np.sum(self.rewards))


def run_episode(env: FlightEnv, policy, seed: int, deterministic: bool = True,
                rng: Optional[np.random.Generator] = None) -> EpisodeRecord:
    """Fly one episode with a policy exposing observe(env) and act(obs, deterministic, rng)"""
    env.reset(seed)
    record = EpisodeRecord(states=[env.state], seed=int(seed))
    done = False
    while not done:
        obs = policy.observe(env)
        action = policy.act(obs, deterministic=deterministic, rng=rng)
        _, reward, done, info = env.step(action)
        record.states.append(env.state)
        record.commands.append(info["command"])
        record.components.append(info["components"])
        record.rewards.append(reward)
        record.r_pa.append(info["r_pa"])
        if info["yaw_error"] is not None:
            record.yaw_errors.append(info["yaw_error"])
    record.outcome = env.episode.reason
    record.flight_time = env.episode.steps * env.settings.control_dt
    return record


@dataclass
class EnvRollout:
    """Raw per-step arrays from one environment plus the bootstrap value of its last state"""
    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    last_value: float
    episode_returns: List[float]
    episode_outcomes: List[str]


@dataclass
class RolloutTask:
    """Everything a worker needs; picklable"""
    env: FlightEnv
    policy_net: Network
    value_net: Network
    log_std: np.ndarray
    steps: int
    seed: Tuple[int, int, int]


def rollout_worker(task: RolloutTask) -> EnvRollout:
    """Collect ``task.steps`` transitions from one private environment"""
    rng = np.random.default_rng(list(task.seed))
    env = task.env
    std = np.exp(task.log_std)

    obs_list, act_list, logp_list, val_list, rew_list, done_list = [], [], [], [], [], []
    returns, outcomes = [], []
    obs = env.reset(int(rng.integers(2 ** 31)))
    running = 0.0
    for _ in range(task.steps):
        mean = task.policy_net.forward(obs).astype(np.float64)
        value = float(task.value_net.forward(obs)[0])
        sample = mean + std * rng.standard_normal(len(mean))
        next_obs, reward, done, info = env.step(np.clip(sample, -1.0, 1.0))

        obs_list.append(obs)
        act_list.append(sample)
        logp_list.append(float(gaussian_log_prob(mean, task.log_std, sample)))
        val_list.append(value)
        rew_list.append(reward)
        done_list.append(done)
        running += reward
        if done:
            returns.append(running)
            outcomes.append(info["reason"])
            running = 0.0
            next_obs = env.reset(int(rng.integers(2 ** 31)))
        obs = next_obs

    last_value = 0.0 if done_list and done_list[-1] else float(task.value_net.forward(obs)[0])
    return EnvRollout(
        observations=np.asarray(obs_list, dtype=np.float32),
        actions=np.asarray(act_list, dtype=np.float64),
        log_probs=np.asarray(logp_list, dtype=np.float64),
        values=np.asarray(val_list, dtype=np.float64),
        rewards=np.asarray(rew_list, dtype=np.float64),
        dones=np.asarray(done_list, dtype=bool),
        last_value=last_value,
        episode_returns=returns,
        episode_outcomes=outcomes,
    )


def run_rollout_tasks(tasks: Sequence[RolloutTask], workers: int = 0) -> List[EnvRollout]:
    """Run tasks in-process (workers <= 1) or in a process pool; result order follows task order"""
    if workers <= 1 or len(tasks) <= 1:
        return [rollout_worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(rollout_worker, tasks))
