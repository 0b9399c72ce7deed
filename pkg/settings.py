"""
Settings - environment configuration, logging setup and suite config files

Defaults come from the environment (a local .env file is loaded first):
    GEOLAB_WORKERS     default worker threads for suite runs (4)
    GEOLAB_FD_STEP     default finite-difference step (1e-4)
    GEOLAB_LOG_LEVEL   loguru level for the stderr sink (WARNING)

Suite configs are JSON files with "schema": "suite_config.v1"; command-line
flags override their fields one-to-one.
"""
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional

from dotenv import load_dotenv
from loguru import logger

from chart_core import DEFAULT_STEP, ConfigError
import identity_registry

load_dotenv()

SUITE_SCHEMA = "suite_config.v1"

DEFAULT_WORKERS = 4
DEFAULT_LOG_LEVEL = "WARNING"


def _from_env(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError:
        raise ConfigError(f"{name}={raw!r} is not a valid {cast.__name__}") from None


def get_default_workers() -> int:
    """Worker count from GEOLAB_WORKERS, else 4."""
    workers = _from_env("GEOLAB_WORKERS", int, DEFAULT_WORKERS)
    if workers < 1:
        raise ConfigError(f"GEOLAB_WORKERS must be positive, got {workers}")
    return workers


def get_default_fd_step() -> float:
    step = _from_env("GEOLAB_FD_STEP", float, DEFAULT_STEP)
    if step <= 0:
        raise ConfigError(f"GEOLAB_FD_STEP must be positive, got {step}")
    return step


def get_log_level() -> str:
    return _from_env("GEOLAB_LOG_LEVEL", str, DEFAULT_LOG_LEVEL).upper()


def configure_logging(level: Optional[str] = None) -> None:
    """Route loguru to a single stderr sink at the given (or environment) level."""
    level = (level or get_log_level()).upper()
    logger.remove()
    try:
        logger.add(sys.stderr, level=level,
                   format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}")
    except ValueError as e:
        raise ConfigError(f"unknown log level {level!r}") from e


#%% Suite configuration

@dataclass(frozen=True)
class SuiteConfig:
    """One verification run: which bundle, which suites, how many points, which tolerances."""
    bundle: str
    suites: List[str] = field(default_factory=lambda: list(identity_registry.SUITES))
    points: int = 10
    fd_step: float = field(default_factory=get_default_fd_step)
    tolerances: Dict[str, float] = field(default_factory=dict)
    seed: int = 0
    output: str = "report.json"
    workers: int = field(default_factory=get_default_workers)
    geodesics: int = 3
    geodesic_steps: int = 1000
    schema: str = SUITE_SCHEMA

    def __post_init__(self):
        if self.schema != SUITE_SCHEMA:
            raise ConfigError(f"unsupported config schema {self.schema!r}, expected {SUITE_SCHEMA!r}")
        unknown = [s for s in self.suites if s not in identity_registry.SUITES]
        if unknown:
            raise ConfigError(f"unknown suites {unknown}; choose from {list(identity_registry.SUITES)}")
        if not self.suites:
            raise ConfigError("at least one suite is required")
        for name in ('points', 'workers', 'geodesics'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.geodesic_steps < 20:
            raise ConfigError(f"geodesic_steps must be at least 20, got {self.geodesic_steps}")
        if self.fd_step <= 0:
            raise ConfigError(f"fd_step must be positive, got {self.fd_step}")
        for identity_id, tol in self.tolerances.items():
            if identity_id not in identity_registry.IDENTITY_TABLE:
                raise ConfigError(f"tolerance override for unknown identity {identity_id!r}")
            if not tol > 0:
                raise ConfigError(f"tolerance for {identity_id} must be positive, got {tol}")

    @classmethod
    def from_dict(cls, data: Dict) -> "SuiteConfig":
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown config fields {extra}")
        if 'bundle' not in data:
            raise ConfigError("config needs a 'bundle'")
        data = dict(data)
        if isinstance(data.get('suites'), str):
            data['suites'] = [s.strip() for s in data['suites'].split(',') if s.strip()]
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"bad config: {e}") from e

    def merged(self, **overrides) -> "SuiteConfig":
        """Copy with every non-None override applied (command-line flags)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> Dict:
        return asdict(self)


def load_suite_config(path: str) -> SuiteConfig:
    """Load a SuiteConfig JSON file."""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return SuiteConfig.from_dict(data)
