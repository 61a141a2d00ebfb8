"""
Flight Stack - Logging Configuration

One process-wide logger tree: ``flight_stack`` for the pipeline, ``flight_stack.<component>``
for the simulator and learning modules. Console output is coloured; files rotate.
"""

import logging
import logging.handlers
import os
import platform
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional

import colorama
from colorama import Back, Fore, Style

colorama.init()

LOG_DIR_ENV = "FLIGHTSTACK_LOG_DIR"
DEFAULT_LOG_DIR = "data/logs"

FILE_FORMAT = "%(asctime)s.%(msecs)03d %(levelname)-8s %(name)s [%(module)s:%(lineno)d] %(message)s"
COMPONENT_FORMAT = "%(asctime)s.%(msecs)03d %(levelname)-8s [%(funcName)s] %(message)s"
CONSOLE_FORMAT = "%(asctime)s %(levelname).1s %(message)s"

MEGABYTE = 1024 * 1024


class ColoredFormatter(logging.Formatter):
    """Level-coloured console lines; plain text when stdout is not a terminal"""

    LEVEL_COLORS = {
        logging.DEBUG: Fore.CYAN,
        logging.INFO: Fore.GREEN,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
        logging.CRITICAL: Fore.RED + Back.YELLOW,
    }

    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        if not getattr(sys.stdout, "isatty", lambda: False)():
            return text
        return f"{self.LEVEL_COLORS.get(record.levelno, '')}{text}{Style.RESET_ALL}"


def _rotating(path: Path, level: int, formatter: logging.Formatter,
              max_mb: int = 5, backups: int = 3) -> logging.Handler:
    handler = logging.handlers.RotatingFileHandler(path, maxBytes=max_mb * MEGABYTE,
                                                   backupCount=backups, encoding="utf-8")
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


class FlightLogger:
    """
    Owner of the ``flight_stack`` logger tree

    Handlers on the root of the tree:
        console       INFO and above, coloured
        flight_stack.log   everything, rotated at 10 MB
        errors/errors.log  ERROR and above
        performance/performance.log  INFO and above

    Component loggers add one file each under the log directory and propagate
    to the handlers above.
    """

    SUBDIRECTORIES = ("training", "evaluation", "errors", "performance")

    def __init__(self, name: str = "flight_stack", log_dir: Optional[str] = None):
        self.name = name
        self.log_dir = Path(log_dir or os.getenv(LOG_DIR_ENV, DEFAULT_LOG_DIR))
        for sub in ("",) + self.SUBDIRECTORIES:
            (self.log_dir / sub).mkdir(parents=True, exist_ok=True)
        self._components: Dict[str, logging.Logger] = {}
        self.logger = self._configure_root()

    def _configure_root(self) -> logging.Logger:
        logger = logging.getLogger(self.name)
        logger.setLevel(logging.DEBUG)
        logger.propagate = False
        for old in list(logger.handlers):
            logger.removeHandler(old)
            old.close()

        file_formatter = logging.Formatter(FILE_FORMAT, datefmt="%Y-%m-%dT%H:%M:%S")
        console = logging.StreamHandler(sys.stdout)
        console.setLevel(logging.INFO)
        console.setFormatter(ColoredFormatter(CONSOLE_FORMAT, datefmt="%H:%M:%S"))

        for handler in (
            console,
            _rotating(self.log_dir / "flight_stack.log", logging.DEBUG, file_formatter, max_mb=10, backups=5),
            _rotating(self.log_dir / "errors" / "errors.log", logging.ERROR, file_formatter),
            _rotating(self.log_dir / "performance" / "performance.log", logging.INFO, file_formatter),
        ):
            logger.addHandler(handler)
        return logger

    def get_logger(self) -> logging.Logger:
        return self.logger

    def component_logger(self, component: str) -> logging.Logger:
        """Child logger ``<name>.<component>`` that also writes ``<log_dir>/<component>.log``"""
        cached = self._components.get(component)
        if cached is not None:
            return cached

        logger = logging.getLogger(f"{self.name}.{component}")
        logger.setLevel(logging.DEBUG)
        logger.addHandler(_rotating(self.log_dir / f"{component}.log", logging.DEBUG,
                                    logging.Formatter(COMPONENT_FORMAT, datefmt="%Y-%m-%dT%H:%M:%S")))
        self._components[component] = logger
        return logger


class PerformanceTracker:
    """Wall-clock timing of named pipeline stages (monotonic clock)"""

    def __init__(self, logger: logging.Logger):
        self.logger = logger
        self.started: Dict[str, float] = {}

    def start_timing(self, operation_name: str):
        self.started[operation_name] = time.perf_counter()
        self.logger.info(f"🚀 {operation_name} started")

    def end_timing(self, operation_name: str, additional_info: str = "") -> Optional[float]:
        """Log and return the elapsed seconds; None if the stage was never started"""
        start = self.started.pop(operation_name, None)
        if start is None:
            self.logger.warning(f"⚠️ {operation_name}: end_timing without start_timing")
            return None

        elapsed = time.perf_counter() - start
        suffix = f" ({additional_info})" if additional_info else ""
        self.logger.info(f"✅ {operation_name} finished in {elapsed:.2f}s{suffix}")
        return elapsed


class TrainingLogger:
    """
    Specialized logger for learning runs

    Tracks PPO iterations, curriculum stage changes and supervised epochs
    """

    def __init__(self, logger: logging.Logger):
        self.logger = logger
        self.training_stats = {
            'iterations': 0,
            'stage_advances': 0,
            'best_success_rate': 0.0,
            'epochs': 0
        }

    def log_iteration(self, iteration: int, mean_return: float, success_rate: float,
                      stage: int, losses: Optional[dict] = None):
        """Log one PPO iteration"""
        self.training_stats['iterations'] += 1
        self.training_stats['best_success_rate'] = max(
            self.training_stats['best_success_rate'], success_rate
        )
        loss_str = ""
        if losses:
            loss_str = " | " + " | ".join(f"{k}: {v:.4f}" for k, v in losses.items())
        self.logger.info(
            f"🎯 ITERATION {iteration} | Return: {mean_return:.2f} | "
            f"Success: {success_rate * 100:.0f}% | Stage: {stage}{loss_str}"
        )

    def log_stage_advance(self, stage: int, speed_cap: float, density: float):
        """Log a curriculum stage change"""
        self.training_stats['stage_advances'] += 1
        self.logger.info(
            f"📈 CURRICULUM: advanced to stage {stage} | "
            f"Speed cap: {speed_cap:.2f} m/s | Obstacle density: {density:.2f}"
        )

    def log_epoch(self, name: str, epoch: int, train_loss: float, validation_loss: float):
        """Log one supervised epoch (autoencoder, distillation)"""
        self.training_stats['epochs'] += 1
        self.logger.info(
            f"🧠 {name.upper()} EPOCH {epoch} | Train: {train_loss:.6f} | Validation: {validation_loss:.6f}"
        )

    def get_training_stats(self) -> dict:
        """Get training statistics"""
        return self.training_stats.copy()


class EvaluationLogger:
    """
    Specialized logger for closed-loop evaluation episodes
    """

    def __init__(self, logger: logging.Logger):
        self.logger = logger
        self.outcome_counts = {'goal': 0, 'collision': 0, 'out-of-bounds': 0, 'timeout': 0}

    def log_episode(self, label: str, run: int, outcome: str, flight_time: float):
        """Log the outcome of one evaluation run"""
        self.outcome_counts[outcome] = self.outcome_counts.get(outcome, 0) + 1
        marker = "✅" if outcome == "goal" else "❌"
        self.logger.debug(f"{marker} EPISODE: {label} | Run {run} | Outcome: {outcome} | "
                          f"Flight time: {flight_time:.2f}s")

    def log_summary(self, label: str, success_rate: float, time_mean: Optional[float],
                    time_std: Optional[float]):
        """Log the summary of an evaluation sweep"""
        time_str = "-" if time_mean is None else f"{time_mean:.2f}±{time_std:.2f}s"
        self.logger.info(f"📊 EVALUATION: {label} | Success: {success_rate:.0f}% | Time: {time_str}")

    def get_outcome_counts(self) -> dict:
        """Get outcome statistics"""
        return self.outcome_counts.copy()


_flight_logger: Optional[FlightLogger] = None


def _instance() -> FlightLogger:
    global _flight_logger
    if _flight_logger is None:
        _flight_logger = FlightLogger()
    return _flight_logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Main pipeline logger, or the component logger for ``name``

    Args:
        name: Component name such as ``"planner"`` or ``"ppo"``

    Returns:
        logging.Logger writing to the console and the rotating log files
    """
    return _instance().component_logger(name) if name else _instance().get_logger()


def get_performance_tracker() -> PerformanceTracker:
    return PerformanceTracker(get_logger())


def get_training_logger() -> TrainingLogger:
    return TrainingLogger(get_logger())


def get_evaluation_logger() -> EvaluationLogger:
    return EvaluationLogger(get_logger())


def log_system_info():
    """Banner at the start of every CLI run"""
    logger = get_logger()
    rule = "-" * 60
    logger.info(rule)
    logger.info(f"🚀 Flight stack run started {datetime.now().isoformat(timespec='seconds')}")
    logger.info(f"🐍 Python {platform.python_version()} on {platform.system()} {platform.machine()}")
    logger.info(f"📁 cwd {Path.cwd()}")
    logger.info(f"📝 logs {_instance().log_dir.resolve()}")
    logger.info(rule)


def log_system_shutdown():
    get_logger().info(f"🛑 Flight stack run ended {datetime.now().isoformat(timespec='seconds')}")
