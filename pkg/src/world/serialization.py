"""
Flight Stack - World Files
Human-readable YAML description of a World (primitives, bounds, start region, waypoints)
"""

from pathlib import Path
from typing import Union

import yaml

from ..utils import GeometryError, get_logger
from .primitives import World


def save_world(world: World, path: Union[str, Path]) -> Path:
    """Write a World to a YAML file; floats are written with full round-trip precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(world.to_dict(), f, sort_keys=False, default_flow_style=None)
    get_logger().debug(f"💾 World saved to: {path}")
    return path


def load_world(path: Union[str, Path]) -> World:
    """
    Read a World from a YAML file

    Raises:
        GeometryError: If the file is missing, not YAML, or describes an invalid world
    """
    path = Path(path)
    if not path.exists():
        raise GeometryError(f"World file not found: {path}", primitive="world")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise GeometryError(f"World file is not valid YAML: {e}", primitive="world") from e
    if not isinstance(data, dict):
        raise GeometryError(f"World file must contain a mapping: {path}", primitive="world")
    return World.from_dict(data)
