"""
Flight Stack - Error Handling Utilities

Every failure the pipeline reports is a FlightStackError subclass carrying a
stable ``error_code`` and a ``details`` dict that the CLI logs verbatim.
"""

import functools
import logging
import traceback
from collections import Counter, deque
from datetime import datetime
from typing import Any, Callable, Deque, Dict, Optional, Tuple

import numpy as np

from .logging_config import get_logger


class FlightStackError(Exception):
    """Root of the flight stack exception tree"""

    def __init__(self, message: str, error_code: str = None, details: dict = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or "FLIGHT_STACK_ERROR"
        self.details = dict(details or {})
        self.raised_at = datetime.now()

    def to_dict(self) -> dict:
        return dict(
            error_type=type(self).__name__,
            error_code=self.error_code,
            message=self.message,
            details=self.details,
            timestamp=self.raised_at.isoformat(timespec="milliseconds"),
        )


class DynamicsError(FlightStackError):
    """Exception for invalid simulation inputs (non-finite state or command)"""

    def __init__(self, message: str, field_name: str = None, field_value: Any = None):
        super().__init__(message, "DYNAMICS_ERROR")
        self.field_name = field_name
        self.details.update({
            "field_name": field_name,
            "field_value": str(field_value) if field_value is not None else None
        })


class GeometryError(FlightStackError):
    """Exception for malformed obstacle primitives or world files"""

    def __init__(self, message: str, primitive: str = None):
        super().__init__(message, "GEOMETRY_ERROR")
        self.primitive = primitive
        self.details.update({"primitive": primitive})


class WorldGenerationError(FlightStackError):
    """Exception raised when no reachable environment could be generated"""

    def __init__(self, message: str, kind: str = None, seed: int = None, attempts: int = None):
        super().__init__(message, "WORLD_GENERATION_ERROR")
        self.kind = kind
        self.seed = seed
        self.attempts = attempts
        self.details.update({"kind": kind, "seed": seed, "attempts": attempts})


class PlannerError(FlightStackError):
    """Exception for roadmap construction and path extraction errors"""

    def __init__(self, message: str, error_code: str = "PLANNER_ERROR", details: dict = None):
        super().__init__(message, error_code, details)


class DisconnectedError(PlannerError):
    """Raised when the roadmap does not connect the start to a waypoint"""

    def __init__(self, message: str, waypoint_index: int = None, waypoint: Any = None):
        super().__init__(message, "DISCONNECTED")
        self.waypoint_index = waypoint_index
        self.waypoint = waypoint
        self.details.update({
            "waypoint_index": waypoint_index,
            "waypoint": None if waypoint is None else [float(x) for x in waypoint]
        })


class NetworkShapeError(FlightStackError):
    """Exception for incompatible layer shapes or inputs"""

    def __init__(self, message: str, layer_index: int = None, expected: Any = None, received: Any = None):
        super().__init__(message, "NETWORK_SHAPE_ERROR")
        self.layer_index = layer_index
        self.details.update({
            "layer_index": layer_index,
            "expected": str(expected) if expected is not None else None,
            "received": str(received) if received is not None else None
        })


class CheckpointError(FlightStackError):
    """Exception for unreadable or corrupted checkpoints"""

    def __init__(self, message: str, path: str = None):
        super().__init__(message, "CHECKPOINT_ERROR")
        self.path = path
        self.details.update({"path": path})


class TrainingError(FlightStackError):
    """Exception for diverged or failed training runs"""

    def __init__(self, message: str, iteration: int = None, checkpoint_path: str = None, epoch: int = None):
        super().__init__(message, "TRAINING_ERROR")
        self.iteration = iteration
        self.epoch = epoch
        self.checkpoint_path = checkpoint_path
        self.details.update({"iteration": iteration, "epoch": epoch, "checkpoint_path": checkpoint_path})


class DatasetError(FlightStackError):
    """Exception for depth dataset collection and loading errors"""

    def __init__(self, message: str, path: str = None):
        super().__init__(message, "DATASET_ERROR")
        self.details.update({"path": path})


class DistillationError(FlightStackError):
    """Exception for a student that never succeeds after distillation"""

    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message, "DISTILLATION_ERROR", diagnostics)


class EvaluationError(FlightStackError):
    """Exception for evaluation setup failures"""

    def __init__(self, message: str, cell: str = None, path: str = None):
        super().__init__(message, "EVALUATION_ERROR")
        self.cell = cell
        self.path = path
        self.details.update({"cell": cell, "path": path})


class ConfigurationError(FlightStackError):
    """Exception for configuration-related errors"""

    def __init__(self, message: str, config_key: str = None, config_file: str = None):
        super().__init__(message, "CONFIGURATION_ERROR")
        self.config_key = config_key
        self.config_file = config_file
        self.details.update({"config_key": config_key, "config_file": config_file})


class RetryableError(FlightStackError):
    """Exception for operations that exhausted their retries"""

    def __init__(self, message: str, retry_count: int = 0, max_retries: int = 3):
        super().__init__(message, "RETRYABLE_ERROR")
        self.retry_count = retry_count
        self.max_retries = max_retries
        self.details.update({"retry_count": retry_count, "max_retries": max_retries})


class ErrorHandler:
    """Logs errors once and keeps per-type counts for the end-of-run summary"""

    MAX_RECENT = 100

    def __init__(self, logger: logging.Logger = None):
        self.logger = logger or get_logger()
        self.counts: Counter = Counter()
        self.recent: Deque[dict] = deque(maxlen=self.MAX_RECENT)

    def handle_error(self, error: Exception, context: str = None, critical: bool = False) -> dict:
        """
        Record and log an error

        Returns:
            The error record; FlightStackErrors contribute their ``to_dict()`` fields
        """
        if isinstance(error, FlightStackError):
            record = error.to_dict()
        else:
            record = dict(error_type=type(error).__name__, message=str(error),
                          timestamp=datetime.now().isoformat(timespec="milliseconds"))
        record["context"] = context

        self.counts[record["error_type"]] += 1
        self.recent.append(record)

        where = f" [{context}]" if context else ""
        self.logger.log(logging.CRITICAL if critical else logging.ERROR,
                        f"❌ {record['error_type']}{where}: {record['message']}")
        self.logger.debug(f"{record} {traceback.format_exc().strip()}")
        return record

    def get_error_stats(self) -> dict:
        return {
            "total_errors": sum(self.counts.values()),
            "errors_by_type": dict(self.counts),
            "recent_errors": list(self.recent),
        }


def retry_attempts(max_retries: int = 3, retry_exceptions: Tuple[type, ...] = (Exception,)):
    """
    Retry the decorated function up to ``max_retries`` times

    The function is called with ``attempt=0, 1, ...`` so each try can derive its own
    sub-seed. Exceptions outside ``retry_exceptions`` propagate immediately; when every
    attempt fails the last error is chained into a RetryableError.
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            logger = get_logger()
            failure: Optional[BaseException] = None
            for attempt in range(max_retries):
                try:
                    return func(*args, attempt=attempt, **kwargs)
                except retry_exceptions as e:
                    failure = e
                    logger.debug(f"🔄 {func.__name__}: attempt {attempt + 1}/{max_retries} failed: {e}")

            logger.error(f"🔄 {func.__name__}: giving up after {max_retries} attempts: {failure}")
            raise RetryableError(f"{func.__name__} failed after {max_retries} attempts: {failure}",
                                 retry_count=max_retries, max_retries=max_retries) from failure

        return wrapper
    return decorator


def require_finite(name: str, value: Any) -> None:
    """
    Reject NaN / Inf inputs with a diagnostic naming the field

    Raises:
        DynamicsError: If any element of value is not finite
    """
    array = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise DynamicsError(f"Non-finite value in field '{name}': {array.tolist()}",
                            field_name=name, field_value=array.tolist())


class ErrorReporter:
    """End-of-run error summary"""

    def __init__(self, error_handler: ErrorHandler):
        self.error_handler = error_handler
        self.logger = get_logger()

    def log_error_summary(self):
        stats = self.error_handler.get_error_stats()
        if not stats["total_errors"]:
            self.logger.info("✅ No errors recorded this run")
            return

        by_type: Dict[str, int] = stats["errors_by_type"]
        breakdown = ", ".join(f"{name} x{count}" for name, count in sorted(by_type.items()))
        self.logger.info(f"📊 {stats['total_errors']} error(s) this run: {breakdown}")


_error_handler: Optional[ErrorHandler] = None


def get_error_handler() -> ErrorHandler:
    """Process-wide ErrorHandler"""
    global _error_handler
    if _error_handler is None:
        _error_handler = ErrorHandler()
    return _error_handler
