"""
Flight Stack - Shared Test Fixtures
"""

import os
import sys
import tempfile
from pathlib import Path

# Log files go to a throwaway directory; must be set before the package is imported
os.environ.setdefault("FLIGHTSTACK_LOG_DIR", tempfile.mkdtemp(prefix="flightstack-logs-"))
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import numpy as np
import pytest

from src.config import ExperimentConfig
from src.depthcam import CameraIntrinsics
from src.planner import GuidingPath
from src.rl_env import EnvSettings, FlightEnv
from src.world import Cylinder, Sphere, open_world


def straight_env(obstacles=(), settings: EnvSettings = None, **kwargs) -> FlightEnv:
    """Open 20 x 20 x 5 arena with a straight guiding path from (1.5, 10, 1.5) to (18.5, 10, 1.5)"""
    world = open_world(obstacles=obstacles)
    path = GuidingPath.from_vertices([world.start_center, world.goal])
    return FlightEnv(world, path, settings or EnvSettings(), **kwargs)


@pytest.fixture
def open_arena():
    return open_world()


@pytest.fixture
def cluttered_world():
    return open_world(obstacles=(
        Sphere(center=(8.0, 10.0, 1.5), radius=1.0),
        Cylinder(center_xy=(13.0, 7.0), radius=0.6, z_min=0.0, z_max=5.0),
        Sphere(center=(5.0, 4.0, 3.0), radius=0.8),
    ))


@pytest.fixture
def env():
    return straight_env()


@pytest.fixture
def small_camera():
    return CameraIntrinsics(width=24, height=24)


@pytest.fixture
def config():
    return ExperimentConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
