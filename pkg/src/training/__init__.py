"""
Flight Stack - Training Package

Teacher PPO with a curriculum, depth dataset collection, autoencoder training and student distillation.
"""

from .policies import ConstantPolicy, StudentPolicy, TeacherPolicy, gaussian_entropy, gaussian_log_prob
from .rollout import EnvRollout, EpisodeRecord, RolloutTask, rollout_worker, run_episode, run_rollout_tasks
from .curriculum import CurriculumSchedule
from .ppo import (
    PolicyHead,
    PPOTrainer,
    RolloutBatch,
    TeacherTrainingResult,
    compute_gae,
    create_ppo_trainer,
    evaluate_success,
    ppo_surrogate_gradient,
    train_teacher
)
from .dataset import DepthDataset, collect_depth_dataset, load_dataset, save_dataset
from .autoencoder import AutoencoderResult, reconstruction_mse, train_autoencoder
from .distillation import DistillationResult, build_student, collect_labeled, distill_student

__all__ = [
    # Policies and rollouts
    'ConstantPolicy',
    'StudentPolicy',
    'TeacherPolicy',
    'gaussian_entropy',
    'gaussian_log_prob',
    'EnvRollout',
    'EpisodeRecord',
    'RolloutTask',
    'rollout_worker',
    'run_episode',
    'run_rollout_tasks',

    # Teacher PPO
    'CurriculumSchedule',
    'PolicyHead',
    'PPOTrainer',
    'RolloutBatch',
    'TeacherTrainingResult',
    'compute_gae',
    'create_ppo_trainer',
    'evaluate_success',
    'ppo_surrogate_gradient',
    'train_teacher',

    # Depth data and autoencoder
    'DepthDataset',
    'collect_depth_dataset',
    'load_dataset',
    'save_dataset',
    'AutoencoderResult',
    'reconstruction_mse',
    'train_autoencoder',

    # Distillation
    'DistillationResult',
    'build_student',
    'collect_labeled',
    'distill_student'
]
