import os
from pathlib import Path
from typing import Any, List, Optional

from dotenv import load_dotenv


class ConfigurationError(Exception):
    """Raised when environment settings are invalid"""
    pass


_LOG_LEVELS = ('CRITICAL', 'ERROR', 'WARNING', 'INFO', 'DEBUG')


def _parse_seed_list(value: str) -> List[int]:
    seeds = [int(part) for part in value.split(',') if part.strip()]
    if not seeds:
        raise ValueError("empty seed list")
    return seeds


def _load_env_file(env_path: Optional[str]) -> None:
    """Load an explicit .env file, else the repo's .env, else one in the working directory"""
    if env_path:
        path = Path(env_path)
        if not path.exists():
            raise ConfigurationError(f"Environment file not found: {env_path}")
        load_dotenv(path, override=False)
        return
    for candidate in (Path(__file__).parent / '.env', Path('.env')):
        if candidate.exists():
            load_dotenv(candidate, override=False)
            return


def _env(name: str) -> Optional[str]:
    """Environment value with blank treated as unset"""
    value = os.getenv(name)
    return value.strip() if value is not None and value.strip() else None


class Config:
    """
    greyplace settings from the environment (and an optional .env file).
    One instance per process; use get_config().
    """

    _instance = None
    _initialized = False

    def __new__(cls, env_path: Optional[str] = None):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self, env_path: Optional[str] = None):
        if self._initialized:
            return
        _load_env_file(env_path)
        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Check every formatted setting and report all problems at once"""
        problems = []

        seeds = _env('GREYPLACE_SEED')
        if seeds is not None:
            try:
                _parse_seed_list(seeds)
            except ValueError:
                problems.append(f"GREYPLACE_SEED must be comma-separated integers, got '{seeds}'")

        workers = _env('GREYPLACE_WORKERS')
        if workers is not None and (not workers.isdigit() or int(workers) < 1):
            problems.append(f"GREYPLACE_WORKERS must be a positive integer, got '{workers}'")

        level = _env('GREYPLACE_LOG_LEVEL')
        if level is not None and level.upper() not in _LOG_LEVELS:
            problems.append(f"GREYPLACE_LOG_LEVEL must be one of {', '.join(_LOG_LEVELS)}, got '{level}'")

        if problems:
            raise ConfigurationError(
                "Invalid environment settings:\n" + '\n'.join(f"  - {p}" for p in problems)
            )

    @property
    def seed_override(self) -> Optional[List[int]]:
        """Seed list from GREYPLACE_SEED, or None when unset"""
        value = _env('GREYPLACE_SEED')
        if value is None:
            return None
        try:
            return _parse_seed_list(value)
        except ValueError:
            raise ConfigurationError(f"GREYPLACE_SEED must be comma-separated integers, got '{value}'")

    @property
    def workers(self) -> int:
        value = _env('GREYPLACE_WORKERS')
        return 1 if value is None else int(value)

    @property
    def log_level(self) -> str:
        return (_env('GREYPLACE_LOG_LEVEL') or 'INFO').upper()

    @property
    def out_dir(self) -> Path:
        """Default root for run directories"""
        return Path(_env('GREYPLACE_OUT_DIR') or 'runs')

    @property
    def aruba_path(self) -> Optional[Path]:
        """Local copy of the CASAS Aruba log, if any"""
        value = _env('GREYPLACE_ARUBA_PATH')
        return None if value is None else Path(value)

    def get(self, key: str, default: Any = None, required: bool = False) -> Any:
        """Raw environment lookup; raises ConfigurationError when a required key is unset"""
        value = os.getenv(key, default)
        if required and value is None:
            raise ConfigurationError(f"Missing required setting: {key}")
        return value

    def reload(self, env_path: Optional[str] = None) -> None:
        """Re-read the .env file and re-validate (tests change the environment)"""
        self._initialized = False
        self.__init__(env_path)

    def __repr__(self) -> str:
        return f"Config(seeds={self.seed_override}, workers={self.workers}, log_level={self.log_level})"


_config_instance = None


def get_config(env_path: Optional[str] = None) -> Config:
    """Return the process-wide Config, creating it on first use"""
    global _config_instance
    if _config_instance is None:
        _config_instance = Config(env_path)
    return _config_instance
