"""
Flight Stack - Student Distillation
Dataset aggregation: the privileged teacher labels every state the student visits
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from ..depthcam import CameraIntrinsics
from ..nn import AdamState, Network, adam_step, build_mlp, mse_loss
from ..rl_env import ACTION_DIM, STUDENT_STATE_DIM, FlightEnv
from ..utils import DistillationError, get_logger, get_performance_tracker, get_training_logger
from .policies import StudentPolicy, TeacherPolicy

logger = get_logger("distillation")


@dataclass
class LabeledRollouts:
    """Student observations with the teacher's action for each, plus per-episode outcomes"""
    observations: List[np.ndarray] = field(default_factory=list)
    labels: List[np.ndarray] = field(default_factory=list)
    outcomes: List[str] = field(default_factory=list)

    def extend(self, other: "LabeledRollouts") -> None:
        self.observations.extend(other.observations)
        self.labels.extend(other.labels)
        self.outcomes.extend(other.outcomes)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return (np.asarray(self.observations, dtype=np.float32),
                np.asarray(self.labels, dtype=np.float32).reshape(-1, ACTION_DIM))

    @property
    def success_rate(self) -> float:
        return float(np.mean([o == "goal" for o in self.outcomes])) if self.outcomes else 0.0


@dataclass
class DistillationResult:
    student: Network
    history: pd.DataFrame


def build_student(embedding_dim: int, hidden=(128, 128), seed: int = 0, action_scale: float = 1.0) -> Network:
    net = build_mlp(embedding_dim + STUDENT_STATE_DIM, hidden, ACTION_DIM, activation="tanh", squash=True, seed=seed)
    net.metadata = {"role": "student", "embedding_dim": int(embedding_dim), "action_scale": float(action_scale)}
    return net


def collect_labeled(env: FlightEnv, teacher: TeacherPolicy, student: StudentPolicy, seeds,
                    student_acts: bool) -> LabeledRollouts:
    """
    Fly one episode per seed, acting with the teacher (round 0) or the student

    Every visited state is labeled with the teacher's deterministic action.
    """
    rollouts = LabeledRollouts()
    for seed in seeds:
        env.reset(int(seed))
        done = False
        while not done:
            label = teacher.mean_action(env.teacher_observation())
            obs = student.observe(env)
            rollouts.observations.append(obs)
            rollouts.labels.append(label)
            action = student.act(obs) if student_acts else label
            _, _, done, info = env.step(action)
        rollouts.outcomes.append(info["reason"])
    return rollouts


def _fit(net: Network, observations: np.ndarray, labels: np.ndarray, adam: AdamState, epochs: int,
         batch_size: int, rng: np.random.Generator) -> Tuple[float, AdamState]:
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(observations))
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            pred, cache = net.forward_with_cache(observations[idx])
            loss, grad = mse_loss(pred, labels[idx])
            param_grad, _ = net.backward(cache, grad)
            params, adam = adam_step(net.params, param_grad, adam)
            net.set_params(params)
            losses.append(loss)
    return (float(np.mean(losses)) if losses else 0.0), adam


def action_mse(net: Network, rollouts: LabeledRollouts) -> float:
    observations, labels = rollouts.arrays()
    if len(observations) == 0:
        return 0.0
    return mse_loss(net.forward(observations), labels)[0]


def distill_student(teacher: TeacherPolicy, encoder: Network, env: FlightEnv, config, seed: int,
                    intr: CameraIntrinsics, student: Optional[Network] = None) -> DistillationResult:
    """
    Train the depth-based student to imitate the teacher by dataset aggregation

    Round 0 flies the teacher; each of the ``config.rounds`` following rounds
    flies the current student. All rounds are aggregated and the student is
    fitted with Adam on the mean squared action error; encoder and teacher
    are only read. After each round the held-out action error is measured on
    fresh student rollouts labeled by the teacher.

    A provided ``student`` network is trained in place.

    Raises:
        DistillationError: If the student never reaches the goal in the
            held-out runs of the last round; details carry the per-round
            held-out errors and success rates
    """
    if student is None:
        student = build_student(encoder.output_shape[0], config.hidden, seed=seed,
                                action_scale=teacher.action_scale)
    else:
        student.metadata = {**student.metadata, "role": "student", "action_scale": teacher.action_scale}
    student_policy = StudentPolicy(student, encoder, intr)

    training_logger = get_training_logger()
    tracker = get_performance_tracker()
    tracker.start_timing("student distillation")

    seed_rng = np.random.default_rng([int(seed), 4])
    fit_rng = np.random.default_rng([int(seed), 5])
    adam = AdamState.zeros(student.param_count, config.learning_rate)
    aggregate = LabeledRollouts()
    rows = []

    for round_index in range(config.rounds + 1):
        train_seeds = seed_rng.integers(2 ** 31, size=config.episodes_per_round)
        fresh = collect_labeled(env, teacher, student_policy, train_seeds, student_acts=round_index > 0)
        aggregate.extend(fresh)
        observations, labels = aggregate.arrays()
        train_loss, adam = _fit(student, observations, labels, adam, config.epochs_per_round,
                                config.batch_size, fit_rng)

        heldout_seeds = seed_rng.integers(2 ** 31, size=config.validation_episodes)
        heldout = collect_labeled(env, teacher, student_policy, heldout_seeds, student_acts=True)
        heldout_mse = action_mse(student, heldout)
        rows.append({"round": round_index, "frames": len(observations), "train_mse": train_loss,
                     "heldout_mse": heldout_mse, "success_rate": heldout.success_rate,
                     "collection_success_rate": fresh.success_rate})
        training_logger.log_epoch("distillation", round_index, train_loss, heldout_mse)

    history = pd.DataFrame(rows)
    tracker.end_timing("student distillation", f"held-out action MSE {history['heldout_mse'].iloc[-1]:.5f}")
    if history["success_rate"].iloc[-1] <= 0.0:
        raise DistillationError(
            f"Student never reached the goal after {config.rounds} aggregation rounds",
            diagnostics={"heldout_mse": history["heldout_mse"].tolist(),
                         "success_rate": history["success_rate"].tolist(),
                         "frames": history["frames"].tolist()},
        )
    logger.info(f"✅ Student success {history['success_rate'].iloc[-1] * 100:.0f}% on held-out runs")
    return DistillationResult(student, history)
