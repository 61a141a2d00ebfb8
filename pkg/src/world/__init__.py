"""
Flight Stack - World Package

Obstacle primitives, exact geometry queries, procedural environments and world files.
"""

from .primitives import (
    Box,
    Cylinder,
    Obstacle,
    Region,
    Sphere,
    World,
    obstacle_from_dict,
    open_world
)

from .queries import (
    bounds_distance,
    clearance,
    in_bounds,
    is_collision,
    line_of_sight,
    obstacle_clearance,
    obstacle_distances,
    segment_clearance,
    visible_from
)

from .generation import (
    CASE_LAYOUTS,
    ENVIRONMENT_KINDS,
    generate_environment,
    validate_world
)

from .serialization import load_world, save_world

__all__ = [
    # Primitives
    'Box',
    'Cylinder',
    'Obstacle',
    'Region',
    'Sphere',
    'World',
    'obstacle_from_dict',
    'open_world',

    # Queries
    'bounds_distance',
    'clearance',
    'in_bounds',
    'is_collision',
    'line_of_sight',
    'obstacle_clearance',
    'obstacle_distances',
    'segment_clearance',
    'visible_from',

    # Generation
    'CASE_LAYOUTS',
    'ENVIRONMENT_KINDS',
    'generate_environment',
    'validate_world',

    # Files
    'load_world',
    'save_world'
]
