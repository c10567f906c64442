import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional

from appdirs import user_config_dir
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

CONFIG_FILENAME = "config.json"

# Environment variable -> (field, converter)
_ENV_OVERRIDES = {
    "BUBBLESCOPE_WINDOW": ("window_length", float),
    "BUBBLESCOPE_STEP": ("step", float),
    "BUBBLESCOPE_MODEL": ("model", str),
    "BUBBLESCOPE_SEED": ("seed", int),
    "BUBBLESCOPE_N_JOBS": ("n_jobs", int),
    "BUBBLESCOPE_LOG_LEVEL": ("log_level", str),
}


def config_dir() -> Path:
    """Directory holding the per-user config file"""
    override = os.getenv("BUBBLESCOPE_CONFIG_DIR")
    if override:
        return Path(override)
    return Path(user_config_dir("bubblescope"))


@dataclass
class AppConfig:
    """Defaults for every CLI flag"""
    # Scan
    window_length: float = 250
    step: float = 21
    model: str = "fts"
    improvement_min: float = 0.25
    horizon_fraction: float = 0.25
    lookback: float = 63

    # Crashes and drawdowns
    crash_threshold: float = 0.15
    crash_window: float = 15
    epsilon: float = 0.0
    bulk_quantile: float = 0.99
    king_expected_max: float = 0.1

    # Execution
    seed: int = 0
    n_jobs: int = 1
    log_level: str = "WARNING"

    @classmethod
    def load(cls, directory: Optional[Path] = None) -> 'AppConfig':
        """Load configuration from .env, config file and environment"""
        load_dotenv()

        directory = directory or config_dir()
        config_file = directory / CONFIG_FILENAME

        instance = cls()

        if config_file.exists():
            try:
                with open(config_file, "r") as f:
                    config_data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                logger.warning("Ignoring unreadable config file %s: %s", config_file, e)
                config_data = {}
            instance.update(config_data)

        for variable, (name, convert) in _ENV_OVERRIDES.items():
            if value := os.getenv(variable):
                try:
                    setattr(instance, name, convert(value))
                except ValueError:
                    logger.warning("Ignoring %s=%r: not a valid %s", variable, value, convert.__name__)

        return instance

    def update(self, values: Dict[str, Any]) -> None:
        """Override fields from a mapping; unknown keys are ignored"""
        known = {f.name for f in fields(self)}
        for key, value in values.items():
            if key in known and value is not None:
                setattr(self, key, value)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save(self, directory: Optional[Path] = None) -> Path:
        """Save current configuration to file"""
        directory = directory or config_dir()
        directory.mkdir(parents=True, exist_ok=True)
        config_file = directory / CONFIG_FILENAME

        with open(config_file, "w") as f:
            json.dump(self.to_dict(), f, indent=4)
        return config_file
