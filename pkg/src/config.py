"""
Flight Stack - Experiment Configuration
Loads, validates and resolves the single YAML experiment file that drives every pipeline stage
"""

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml
from cerberus import Validator

from .utils import ConfigurationError, get_logger
from .world.generation import ENVIRONMENT_KINDS


@dataclass(frozen=True)
class EnvironmentConfig:
    kind: str = "Columns"
    seed: int = 1
    scale: float = 20.0
    case: int = 0
    density: float = 1.0


@dataclass(frozen=True)
class VehicleConfig:
    mass: float = 0.54
    gravity: float = 9.81
    max_thrust: float = 34.0
    max_body_rate: float = 10.0
    rate_time_constant: float = 0.05
    collision_radius: float = 0.2


@dataclass(frozen=True)
class SimulationConfig:
    control_dt: float = 0.02
    substep: float = 0.005
    max_steps: int = 500


@dataclass(frozen=True)
class CameraConfig:
    width: int = 64
    height: int = 48
    fov_deg: float = 90.0
    max_range: float = 10.0


@dataclass(frozen=True)
class RewardConfig:
    k_p: float = 10.0
    k_s: float = 1.0
    k_wp: float = 5.0
    r_t: float = -20.0
    k_omega: float = -0.01
    k_pa: float = 0.5


@dataclass(frozen=True)
class PlannerConfig:
    n_samples: int = 1000
    k: int = 10
    lookahead_step: float = 0.1
    hysteresis: float = 0.5
    progress_window: float = 3.0
    observation_clip: float = 10.0


@dataclass(frozen=True)
class PPOConfig:
    iterations: int = 200
    gamma: float = 0.98
    gae_lambda: float = 0.95
    clip: float = 0.2
    learning_rate: float = 3e-4
    n_envs: int = 16
    batch_steps: int = 4096
    epochs: int = 4
    minibatch: int = 256
    entropy_coef: float = 1e-3
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    init_log_std: float = -0.5
    hidden: Tuple[int, ...] = (128, 128)


@dataclass(frozen=True)
class CurriculumConfig:
    enabled: bool = True
    initial_speed_cap: float = 3.0
    full_speed: float = 12.0
    speed_factor: float = 1.5
    initial_density: float = 0.4
    density_factor: float = 1.25
    advance_threshold: float = 0.8
    eval_runs: int = 20
    eval_interval: int = 10


@dataclass(frozen=True)
class RandomizationConfig:
    enabled: bool = True
    mass_range: float = 0.1
    disturbance_std: float = 0.2


@dataclass(frozen=True)
class AutoencoderConfig:
    embedding_dim: int = 64
    n_episodes: int = 50
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    validation_fraction: float = 0.1


@dataclass(frozen=True)
class DistillationConfig:
    rounds: int = 3
    episodes_per_round: int = 20
    epochs_per_round: int = 10
    batch_size: int = 256
    learning_rate: float = 1e-3
    hidden: Tuple[int, ...] = (128, 128)
    validation_episodes: int = 10


@dataclass(frozen=True)
class EvaluationConfig:
    n_runs: int = 20
    verbose: bool = False
    ablation_kind: str = "RacingMW"
    latency_frames: int = 1000
    warmup_frames: int = 100


@dataclass(frozen=True)
class RuntimeConfig:
    seed: int = 0
    workers: int = 0  # 0 = logical cores, resolved by the CLI
    output_dir: str = "runs"


SECTION_TYPES = {
    "environment": EnvironmentConfig,
    "vehicle": VehicleConfig,
    "simulation": SimulationConfig,
    "camera": CameraConfig,
    "reward": RewardConfig,
    "planner": PlannerConfig,
    "ppo": PPOConfig,
    "curriculum": CurriculumConfig,
    "randomization": RandomizationConfig,
    "autoencoder": AutoencoderConfig,
    "distillation": DistillationConfig,
    "evaluation": EvaluationConfig,
    "runtime": RuntimeConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment configuration (every field defaulted)"""
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    vehicle: VehicleConfig = field(default_factory=VehicleConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    randomization: RandomizationConfig = field(default_factory=RandomizationConfig)
    autoencoder: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    distillation: DistillationConfig = field(default_factory=DistillationConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        """Plain nested dict (tuples as lists) suitable for YAML output"""
        resolved = {}
        for name in SECTION_TYPES:
            section = asdict(getattr(self, name))
            resolved[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in section.items()}
        return resolved

    def override(self, section: str, **values) -> "ExperimentConfig":
        """Copy with some fields of one section replaced"""
        return replace(self, **{section: replace(getattr(self, section), **values)})


_CERBERUS_TYPES = {bool: "boolean", int: "integer", float: "number", str: "string"}


def _field_rule(dc_field) -> Dict[str, Any]:
    default = dc_field.default
    if isinstance(default, tuple):
        return {"type": "list", "schema": {"type": "integer", "min": 1}, "minlength": 1}
    return {"type": _CERBERUS_TYPES[type(default)]}


def _build_schema() -> Dict[str, Any]:
    schema = {}
    for name, section_type in SECTION_TYPES.items():
        section_schema = {f.name: _field_rule(f) for f in fields(section_type)}
        schema[name] = {"type": "dict", "schema": section_schema}

    # Value ranges beyond plain types
    schema["environment"]["schema"]["kind"]["allowed"] = list(ENVIRONMENT_KINDS)
    schema["environment"]["schema"]["scale"]["min"] = 1e-6
    schema["environment"]["schema"]["case"].update({"min": 0, "max": 3})
    schema["environment"]["schema"]["density"].update({"min": 1e-6, "max": 1.0})
    schema["evaluation"]["schema"]["ablation_kind"]["allowed"] = list(ENVIRONMENT_KINDS)
    schema["camera"]["schema"]["width"]["min"] = 8
    schema["camera"]["schema"]["height"]["min"] = 8
    schema["camera"]["schema"]["fov_deg"].update({"min": 1e-3, "max": 179.9})
    schema["camera"]["schema"]["max_range"]["min"] = 1e-6
    schema["reward"]["schema"]["r_t"]["max"] = -1e-12
    schema["reward"]["schema"]["k_omega"]["max"] = 0.0
    for key in ("k_p", "k_s", "k_wp", "k_pa"):
        schema["reward"]["schema"][key]["min"] = 0.0
    schema["planner"]["schema"]["n_samples"]["min"] = 2
    schema["planner"]["schema"]["k"]["min"] = 1
    schema["simulation"]["schema"]["control_dt"]["min"] = 1e-6
    schema["simulation"]["schema"]["substep"]["min"] = 1e-6
    schema["runtime"]["schema"]["workers"]["min"] = 0
    return schema


CONFIG_SCHEMA = _build_schema()


def _first_error_key(errors: Dict[str, Any], prefix: str = "") -> Tuple[str, str]:
    """Walk cerberus' nested error tree down to the first offending key"""
    key = sorted(errors)[0]
    value = errors[key]
    path = f"{prefix}.{key}" if prefix else str(key)
    if isinstance(value, list):
        for item in value:
            if isinstance(item, dict):
                return _first_error_key(item, path)
        return path, str(value[0])
    return path, str(value)


def config_from_dict(raw: Optional[Dict[str, Any]], source: str = "<dict>") -> ExperimentConfig:
    """
    Validate a raw config mapping and resolve it into an ExperimentConfig

    Raises:
        ConfigurationError: naming the first unknown or invalid key
    """
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"Config root must be a mapping in {source}", config_file=source)

    validator = Validator(CONFIG_SCHEMA, allow_unknown=False)
    if not validator.validate(raw):
        key, reason = _first_error_key(validator.errors)
        raise ConfigurationError(f"Invalid config key '{key}': {reason}", config_key=key, config_file=source)

    sections = {}
    for name, section_type in SECTION_TYPES.items():
        values = dict(raw.get(name) or {})
        for f in fields(section_type):
            if f.name in values and isinstance(values[f.name], list):
                values[f.name] = tuple(values[f.name])
            if f.name in values and f.type in ("float", float) and isinstance(values[f.name], int):
                values[f.name] = float(values[f.name])
        sections[name] = section_type(**values)
    return ExperimentConfig(**sections)


def load_config(config_path: Union[str, Path, None] = None) -> ExperimentConfig:
    """
    Load the experiment configuration

    Args:
        config_path: YAML file; when None the defaults are used

    Returns:
        Resolved ExperimentConfig
    """
    logger = get_logger()
    if config_path is None:
        logger.info("⚙️ No config file given, using defaults")
        return ExperimentConfig()

    path = Path(config_path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}", config_file=str(path))

    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Config file is not valid YAML: {e}", config_file=str(path)) from e

    config = config_from_dict(raw, source=str(path))
    logger.info(f"✅ Loaded experiment config from: {path}")
    return config


def save_config(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    """Write the resolved config (all defaults filled) next to run artifacts"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False, default_flow_style=False)
    return path
