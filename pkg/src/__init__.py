"""
Flight Stack - Source Package

Quadrotor simulator, planner, depth camera and the teacher/student learning pipeline.
"""

from .config import ExperimentConfig, load_config, save_config
from .rl_env import FlightEnv, create_flight_env
from .training import create_ppo_trainer

# Subpackages
from . import evalbench
from . import nn
from . import training
from . import utils
from . import world

__all__ = [
    # Configuration
    'ExperimentConfig',
    'load_config',
    'save_config',

    # Service objects
    'FlightEnv',
    'create_flight_env',
    'create_ppo_trainer',

    # Subpackages
    'evalbench',
    'nn',
    'training',
    'utils',
    'world',
]
