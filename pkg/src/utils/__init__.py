"""
Flight Stack - Utilities Package

Logging setup and the exception hierarchy shared by every flight stack module.
"""

from .logging_config import (
    get_logger,
    get_performance_tracker,
    get_training_logger,
    get_evaluation_logger,
    log_system_info,
    log_system_shutdown
)

from .error_handling import (
    FlightStackError,
    DynamicsError,
    GeometryError,
    WorldGenerationError,
    PlannerError,
    DisconnectedError,
    NetworkShapeError,
    CheckpointError,
    TrainingError,
    DatasetError,
    DistillationError,
    EvaluationError,
    ConfigurationError,
    RetryableError,
    ErrorHandler,
    ErrorReporter,
    get_error_handler,
    retry_attempts,
    require_finite
)

__all__ = [
    # Logging
    'get_logger',
    'get_performance_tracker',
    'get_training_logger',
    'get_evaluation_logger',
    'log_system_info',
    'log_system_shutdown',

    # Error Handling
    'FlightStackError',
    'DynamicsError',
    'GeometryError',
    'WorldGenerationError',
    'PlannerError',
    'DisconnectedError',
    'NetworkShapeError',
    'CheckpointError',
    'TrainingError',
    'DatasetError',
    'DistillationError',
    'EvaluationError',
    'ConfigurationError',
    'RetryableError',
    'ErrorHandler',
    'ErrorReporter',
    'get_error_handler',
    'retry_attempts',
    'require_finite'
]
