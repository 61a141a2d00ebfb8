"""
Flight Stack - PPO Teacher Training
Clipped-surrogate PPO with GAE, separate policy/value optimizers and a speed/density curriculum
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..nn import AdamState, Network, adam_step, build_mlp, global_norm_clip, write_checkpoint
from ..rl_env import ACTION_DIM, TEACHER_OBS_DIM, FlightEnv, RewardWeights, create_flight_env
from ..utils import TrainingError, get_logger, get_performance_tracker, get_training_logger
from .curriculum import CurriculumSchedule
from .policies import TeacherPolicy, gaussian_entropy, gaussian_log_prob
from .rollout import EnvRollout, RolloutTask, run_episode, run_rollout_tasks

logger = get_logger("ppo")


# ---------------------------------------------------------------------------
# Advantage estimation
# ---------------------------------------------------------------------------

def compute_gae(rewards: Sequence[float], values: Sequence[float], dones: Sequence[bool],
                gamma: float, lam: float, last_value: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Generalized advantage estimation over one trajectory segment

    Args:
        rewards: r_t
        values: V(s_t)
        dones: True when s_{t+1} is terminal; the recursion resets there
        gamma: Discount
        lam: GAE lambda
        last_value: V(s_T) bootstrap for a segment cut mid-episode

    Returns:
        (advantages, returns) with returns = advantages + values
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    advantages = np.zeros_like(rewards)
    next_value = float(last_value)
    carry = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        if dones[t]:
            next_value = 0.0
            carry = 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        carry = delta + gamma * lam * carry
        advantages[t] = carry
        next_value = values[t]
    return advantages, advantages + values


@dataclass
class RolloutBatch:
    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    episode_returns: List[float] = field(default_factory=list)
    episode_outcomes: List[str] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.observations)
        for name in ("actions", "log_probs", "values", "rewards", "dones", "advantages", "returns"):
            if len(getattr(self, name)) != n:
                raise TrainingError(f"Rollout batch field '{name}' has {len(getattr(self, name))} rows, expected {n}")
        if not np.all(np.isfinite(self.advantages)):
            raise TrainingError("Rollout batch contains non-finite advantages")

    def __len__(self) -> int:
        return len(self.observations)

    @classmethod
    def from_rollouts(cls, rollouts: Sequence[EnvRollout], gamma: float, lam: float) -> "RolloutBatch":
        advantages, returns = [], []
        for r in rollouts:
            adv, ret = compute_gae(r.rewards, r.values, r.dones, gamma, lam, r.last_value)
            advantages.append(adv)
            returns.append(ret)
        return cls(
            observations=np.concatenate([r.observations for r in rollouts]),
            actions=np.concatenate([r.actions for r in rollouts]),
            log_probs=np.concatenate([r.log_probs for r in rollouts]),
            values=np.concatenate([r.values for r in rollouts]),
            rewards=np.concatenate([r.rewards for r in rollouts]),
            dones=np.concatenate([r.dones for r in rollouts]),
            advantages=np.concatenate(advantages),
            returns=np.concatenate(returns),
            episode_returns=[x for r in rollouts for x in r.episode_returns],
            episode_outcomes=[x for r in rollouts for x in r.episode_outcomes],
        )


# ---------------------------------------------------------------------------
# Policy head and clipped objective
# ---------------------------------------------------------------------------

@dataclass
class PolicyHead:
    """Tanh-squashed mean network, state-independent log-std and a separate value network"""
    mean_net: Network
    log_std: np.ndarray
    value_net: Network

    @classmethod
    def create(cls, hidden: Sequence[int] = (128, 128), init_log_std: float = -0.5, seed: int = 0) -> "PolicyHead":
        mean_net = build_mlp(TEACHER_OBS_DIM, hidden, ACTION_DIM, activation="tanh", squash=True, seed=seed)
        value_net = build_mlp(TEACHER_OBS_DIM, hidden, 1, activation="tanh", squash=False, seed=seed + 1)
        return cls(mean_net, np.full(ACTION_DIM, float(init_log_std)), value_net)

    def policy_vector(self) -> np.ndarray:
        return np.concatenate([self.mean_net.params.astype(np.float64), self.log_std])

    def set_policy_vector(self, vector: np.ndarray) -> None:
        n = self.mean_net.param_count
        self.mean_net.set_params(vector[:n])
        self.log_std = np.asarray(vector[n:], dtype=np.float64).copy()

    def teacher_network(self, action_scale: float) -> Network:
        """Mean network with the metadata a teacher checkpoint carries"""
        net = self.mean_net.copy()
        net.metadata = {"role": "teacher", "log_std": self.log_std.tolist(), "action_scale": float(action_scale)}
        return net

    def as_policy(self, action_scale: float = 1.0) -> TeacherPolicy:
        return TeacherPolicy(self.teacher_network(action_scale), self.log_std)


def ppo_surrogate_gradient(logp_new: np.ndarray, logp_old: np.ndarray, advantages: np.ndarray,
                           clip: float) -> Tuple[float, np.ndarray]:
    """
    Clipped surrogate objective mean(min(ρA, clip(ρ)A)) and its gradient w.r.t. logp_new

    The gradient is ρA/N where the unclipped term is active and zero where the
    clipped term is strictly smaller.
    """
    ratio = np.exp(np.asarray(logp_new, dtype=np.float64) - np.asarray(logp_old, dtype=np.float64))
    advantages = np.asarray(advantages, dtype=np.float64)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages
    objective = float(np.mean(np.minimum(unclipped, clipped)))
    active = unclipped <= clipped
    grad = np.where(active, unclipped, 0.0) / len(ratio)
    return objective, grad


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------

class PPOTrainer:
    """
    Owns the policy head, both Adam states and the update step

    Rollout collection reads frozen copies of the networks; only ``update``
    writes parameters.
    """

    def __init__(self, ppo_config, seed: int = 0):
        self.config = ppo_config
        self.seed = int(seed)
        self.head = PolicyHead.create(ppo_config.hidden, ppo_config.init_log_std, seed=self.seed)
        self.policy_adam = AdamState.zeros(len(self.head.policy_vector()), ppo_config.learning_rate)
        self.value_adam = AdamState.zeros(self.head.value_net.param_count, ppo_config.learning_rate)

    def rollout_tasks(self, env: FlightEnv, iteration: int) -> List[RolloutTask]:
        steps = max(1, self.config.batch_steps // self.config.n_envs)
        return [
            RolloutTask(env=env, policy_net=self.head.mean_net, value_net=self.head.value_net,
                        log_std=self.head.log_std.copy(), steps=steps, seed=(self.seed, iteration, index))
            for index in range(self.config.n_envs)
        ]

    def update(self, batch: RolloutBatch, iteration: int) -> Dict[str, float]:
        cfg = self.config
        rng = np.random.default_rng([self.seed, iteration, 7])
        advantages = batch.advantages
        if len(advantages) > 1:
            advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

        stats = {"policy_loss": [], "value_loss": [], "entropy": [], "approx_kl": [], "grad_norm": []}
        n = len(batch)
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.minibatch):
                idx = order[start:start + cfg.minibatch]
                stats_mb = self._minibatch_step(batch, advantages, idx)
                for key, value in stats_mb.items():
                    stats[key].append(value)
        return {key: float(np.mean(values)) if values else 0.0 for key, values in stats.items()}

    def _minibatch_step(self, batch: RolloutBatch, advantages: np.ndarray, idx: np.ndarray) -> Dict[str, float]:
        cfg = self.config
        head = self.head
        obs = batch.observations[idx]
        actions = batch.actions[idx]

        mean, cache = head.mean_net.forward_with_cache(obs)
        mean = mean.astype(np.float64)
        std = np.exp(head.log_std)
        logp_new = gaussian_log_prob(mean, head.log_std, actions)
        objective, dlogp = ppo_surrogate_gradient(logp_new, batch.log_probs[idx], advantages[idx], cfg.clip)
        entropy = gaussian_entropy(head.log_std)

        # Loss = -(objective + c_ent * entropy)
        diff = actions - mean
        grad_mean = -dlogp[:, None] * diff / (std * std)
        grad_net, _ = head.mean_net.backward(cache, grad_mean)
        grad_log_std = -np.sum(dlogp[:, None] * (diff * diff / (std * std) - 1.0), axis=0) - cfg.entropy_coef
        policy_grad, grad_norm = global_norm_clip(
            np.concatenate([grad_net.astype(np.float64), grad_log_std]), cfg.max_grad_norm)
        vector, self.policy_adam = adam_step(head.policy_vector(), policy_grad, self.policy_adam)
        head.set_policy_vector(vector)

        values, value_cache = head.value_net.forward_with_cache(obs)
        residual = values[:, 0].astype(np.float64) - batch.returns[idx]
        value_loss = cfg.value_coef * float(np.mean(residual * residual))
        grad_values = (2.0 * cfg.value_coef / len(idx)) * residual[:, None]
        value_grad, _ = head.value_net.backward(value_cache, grad_values)
        value_grad, _ = global_norm_clip(value_grad.astype(np.float64), cfg.max_grad_norm)
        value_params, self.value_adam = adam_step(head.value_net.params, value_grad, self.value_adam)
        head.value_net.set_params(value_params)

        return {
            "policy_loss": -objective - cfg.entropy_coef * entropy,
            "value_loss": value_loss,
            "entropy": entropy,
            "approx_kl": float(np.mean(batch.log_probs[idx] - logp_new)),
            "grad_norm": grad_norm,
        }

    def snapshot(self) -> Tuple[np.ndarray, np.ndarray, AdamState, AdamState]:
        return (self.head.policy_vector().copy(), self.head.value_net.params.copy(),
                self.policy_adam, self.value_adam)

    def restore(self, snapshot) -> None:
        policy_vector, value_params, self.policy_adam, self.value_adam = snapshot
        self.head.set_policy_vector(policy_vector)
        self.head.value_net.set_params(value_params)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.head.policy_vector())) and np.all(np.isfinite(self.head.value_net.params)))


def create_ppo_trainer(config, seed: Optional[int] = None) -> PPOTrainer:
    return PPOTrainer(config.ppo, seed=config.runtime.seed if seed is None else seed)


# ---------------------------------------------------------------------------
# Teacher training loop
# ---------------------------------------------------------------------------

@dataclass
class TeacherTrainingResult:
    checkpoint_path: Path
    final_checkpoint_path: Path
    log: pd.DataFrame
    best_success: float
    final_stage: int
    curriculum_complete: bool


def evaluate_success(env: FlightEnv, policy: TeacherPolicy, n_runs: int, seed: int = 0) -> float:
    """Fraction of deterministic episodes from n_runs fixed starts that reach the goal"""
    outcomes = [run_episode(env, policy, seed=seed * 100003 + run).success for run in range(n_runs)]
    return float(np.mean(outcomes)) if outcomes else 0.0


def _stage_envs(config, kind: str, schedule: CurriculumSchedule, weights: RewardWeights) -> Tuple[FlightEnv, FlightEnv]:
    train_env = create_flight_env(config, kind=kind, density=schedule.density, randomize=True,
                                  action_scale=schedule.action_scale, weights=weights)
    eval_env = FlightEnv(train_env.world, train_env.path, train_env.settings, randomize=False)
    return train_env, eval_env


def train_teacher(config, out_dir: Union[str, Path], kind: Optional[str] = None,
                  weights: Optional[RewardWeights] = None, seed: Optional[int] = None,
                  workers: int = 0, iterations: Optional[int] = None, show_progress: bool = True,
                  trainer: Optional[PPOTrainer] = None) -> TeacherTrainingResult:
    """
    Train the state-based teacher with PPO under the curriculum

    Writes ``teacher.ckpt`` (best evaluated policy), ``teacher_final.ckpt`` and
    ``training_log.csv`` into out_dir.

    Raises:
        TrainingError: On a non-finite loss or parameters; the last good
            parameters are saved first and the error names that checkpoint
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = config.runtime.seed if seed is None else int(seed)
    kind = kind or config.environment.kind
    weights = weights or RewardWeights.from_config(config.reward)
    iterations = config.ppo.iterations if iterations is None else int(iterations)
    curriculum_cfg = config.curriculum

    training_logger = get_training_logger()
    tracker = get_performance_tracker()
    tracker.start_timing(f"teacher training ({kind})")

    trainer = trainer or create_ppo_trainer(config, seed)
    schedule = CurriculumSchedule.from_config(curriculum_cfg)
    train_env, eval_env = _stage_envs(config, kind, schedule, weights)

    best_key = (-1, -1.0)
    best_path = out_dir / "teacher.ckpt"
    last_good = trainer.snapshot()
    rows = []

    for iteration in tqdm(range(iterations), desc="PPO", disable=not show_progress):
        rollouts = run_rollout_tasks(trainer.rollout_tasks(train_env, iteration), workers)
        batch = RolloutBatch.from_rollouts(rollouts, config.ppo.gamma, config.ppo.gae_lambda)
        losses = trainer.update(batch, iteration)

        if not (np.isfinite(losses["policy_loss"]) and np.isfinite(losses["value_loss"]) and trainer.is_finite()):
            trainer.restore(last_good)
            path = write_checkpoint(trainer.head.teacher_network(schedule.action_scale), out_dir / "teacher_last_good.ckpt")
            raise TrainingError(f"Non-finite loss at iteration {iteration}; last good parameters saved",
                                iteration=iteration, checkpoint_path=str(path))
        last_good = trainer.snapshot()

        finished = len(batch.episode_returns)
        mean_return = float(np.mean(batch.episode_returns)) if finished else float(np.sum(batch.rewards) / config.ppo.n_envs)
        success_rate = float(np.mean([o == "goal" for o in batch.episode_outcomes])) if finished else 0.0
        training_logger.log_iteration(iteration, mean_return, success_rate, schedule.stage, losses)

        eval_success = np.nan
        last_iteration = iteration == iterations - 1
        if (iteration + 1) % curriculum_cfg.eval_interval == 0 or last_iteration:
            policy = trainer.head.as_policy(schedule.action_scale)
            eval_success = evaluate_success(eval_env, policy, curriculum_cfg.eval_runs, seed)
            key = (schedule.stage, eval_success)
            if key > best_key:
                best_key = key
                write_checkpoint(policy.net, best_path)
            if curriculum_cfg.enabled and eval_success >= curriculum_cfg.advance_threshold and not last_iteration:
                if schedule.advance():
                    training_logger.log_stage_advance(schedule.stage, schedule.speed_cap, schedule.density)
                    train_env, eval_env = _stage_envs(config, kind, schedule, weights)

        rows.append({
            "iteration": iteration,
            "stage": schedule.stage,
            "speed_cap": schedule.speed_cap,
            "density": schedule.density,
            "mean_return": mean_return,
            "success_rate": success_rate,
            "episodes": finished,
            "eval_success": eval_success,
            **losses,
        })

    final_path = write_checkpoint(trainer.head.teacher_network(schedule.action_scale), out_dir / "teacher_final.ckpt")
    if best_key[0] < 0:
        write_checkpoint(trainer.head.teacher_network(schedule.action_scale), best_path)

    log = pd.DataFrame(rows)
    log.to_csv(out_dir / "training_log.csv", index=False, float_format="%.9g", lineterminator="\n")

    complete = schedule.is_final
    if not complete:
        logger.warning(f"⚠️ Curriculum stopped at stage {schedule.stage} "
                       f"(speed cap {schedule.speed_cap:.2f} m/s); returning best checkpoint")
    tracker.end_timing(f"teacher training ({kind})", f"Best eval success: {max(best_key[1], 0.0) * 100:.0f}%")
    return TeacherTrainingResult(best_path, final_path, log, max(best_key[1], 0.0), schedule.stage, complete)
