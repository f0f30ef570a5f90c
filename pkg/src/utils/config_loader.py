"""Configuration loader for the clipscore pipeline."""
import os
import yaml
from pathlib import Path
from typing import Dict, Any
from dotenv import load_dotenv

from .error_handler import ConfigurationError

PROJECT_ROOT = Path(__file__).parent.parent.parent


class ConfigLoader:
    """Loads and manages configuration from YAML and environment variables."""

    def __init__(self, config_path: str = None):
        """Initialize the config loader.

        Args:
            config_path: Path to the config.yaml file. If None, uses default location.
        """
        # Load environment variables
        load_dotenv()

        # Determine config file path
        if config_path is None:
            config_path = os.getenv('CONFIG_PATH')

        if config_path is None:
            config_path = PROJECT_ROOT / 'config' / 'config.yaml'

        self.config_path = Path(config_path)
        self.config = self._load_config()
        self._validate_config()

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from YAML file."""
        if not self.config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {self.config_path}")

        with open(self.config_path, 'r') as f:
            config = yaml.safe_load(f) or {}

        return config

    def _validate_config(self):
        """Validate required configuration sections and environment overrides."""
        required_sections = ['logging', 'database', 'data', 'runtime']
        for section in required_sections:
            if section not in self.config:
                raise ConfigurationError(f"Missing required config section: {section}")

        # Fail early on a malformed thread cap rather than at first use
        self.get_threads()

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get a configuration value using dot notation.

        Args:
            key_path: Dot-separated path to the config value (e.g., 'data.synth.frame_size')
            default: Default value if key not found

        Returns:
            The configuration value
        """
        keys = key_path.split('.')
        value = self.config

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default

        return value

    def get_env(self, key: str, default: str = None) -> str:
        """Get an environment variable.

        Args:
            key: Environment variable name
            default: Default value if not found

        Returns:
            The environment variable value
        """
        return os.getenv(key, default)

    def get_threads(self) -> int:
        """Internal parallelism cap: ``CLIPSCORE_THREADS`` overrides ``runtime.threads``."""
        raw = self.get_env('CLIPSCORE_THREADS', self.get('runtime.threads', 1))
        try:
            threads = int(raw)
        except (TypeError, ValueError):
            raise ConfigurationError(f"CLIPSCORE_THREADS must be an integer, got {raw!r}")

        if threads < 1:
            raise ConfigurationError(f"CLIPSCORE_THREADS must be >= 1, got {threads}")
        return threads

    def resolve_path(self, path) -> Path:
        """Resolve a path from the config relative to the project root."""
        path = Path(path)
        if not path.is_absolute():
            path = PROJECT_ROOT / path
        return path

    def get_database_path(self) -> Path:
        """Get the absolute path to the run registry database file."""
        return self.resolve_path(self.get('database.path', 'data/clipscore_runs.db'))

    def get_log_path(self) -> Path:
        """Get the absolute path to the log file, or None when file logging is off."""
        log_path = self.get('logging.file')
        if not log_path:
            return None
        return self.resolve_path(log_path)
