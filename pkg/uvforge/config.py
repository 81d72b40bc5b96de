import hashlib
import json
import os
from os import PathLike
from pathlib import Path
from typing import Any, Optional, Sequence

import yaml
from pydantic import BaseModel, ValidationError

from .exceptions import ConfigError, MissingFileError
from .types.config import RunConfig

_DEFAULT_PATH = Path.home() / ".uvforge" / "config.yaml"
_UVFORGE_THREADS_ENV_VAR = "UVFORGE_THREADS"
_UVFORGE_RUNS_ENV_VAR = "UVFORGE_RUNS"
_DEFAULT_RUNS_ROOT = Path("runs")


class UvforgeSettings:
    """Machine-local settings that are not part of a run's config.

    Each value is resolved from the explicit argument, then the environment, then the
    settings file, then a default.
    """

    def __init__(
        self,
        settings_path: PathLike = _DEFAULT_PATH,
        threads: Optional[int] = None,
        runs_root: Optional[PathLike] = None,
    ):
        self._settings_path = Path(settings_path)
        self._threads = threads
        self._runs_root = runs_root

    def _file_value(self, key: str):
        if self._settings_path.exists():
            with open(self._settings_path, "r") as f:
                data = yaml.safe_load(f) or {}
                return data.get(key)
        return None

    def threads(self) -> int:
        if self._threads is not None:
            return _positive_threads(self._threads, "threads")
        if val := os.getenv(_UVFORGE_THREADS_ENV_VAR):
            try:
                return _positive_threads(int(val), _UVFORGE_THREADS_ENV_VAR)
            except ValueError:
                raise ConfigError(f"expected an integer, got {val!r}", _UVFORGE_THREADS_ENV_VAR)
        if (val := self._file_value("threads")) is not None:
            return _positive_threads(int(val), f"{self._settings_path}:threads")
        return max(1, os.cpu_count() or 1)

    def runs_root(self) -> Path:
        if self._runs_root is not None:
            return Path(self._runs_root)
        if val := os.getenv(_UVFORGE_RUNS_ENV_VAR):
            return Path(val)
        if (val := self._file_value("runs_root")) is not None:
            return Path(val)
        return _DEFAULT_RUNS_ROOT


def _positive_threads(value: int, key: str) -> int:
    if value < 1:
        raise ConfigError(f"thread count must be >= 1, got {value}", key)
    return value


def config_fingerprint(config: Any) -> str:
    """First 12 hex digits of SHA-256 over the canonical JSON of a config."""
    if isinstance(config, BaseModel):
        config = config.model_dump(mode="json")
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def read_config_file(path: PathLike) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"config file not found: {path}", path)
    with open(path, "r") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}", "") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of sections", "")
    return data


def apply_override(data: dict[str, Any], assignment: str) -> None:
    """Apply one ``section.key=value`` assignment in place; the value is parsed as YAML."""
    key_path, sep, raw = assignment.partition("=")
    if not sep or not key_path.strip():
        raise ConfigError(f"expected section.key=value, got {assignment!r}", key_path.strip())
    keys = key_path.strip().split(".")
    node = data
    for i, key in enumerate(keys[:-1]):
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError(f"{key} is not a section", ".".join(keys[: i + 1]))
        node = child
    try:
        node[keys[-1]] = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse value {raw!r}", key_path.strip()) from e


def validate_run_config(data: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        key_path = ".".join(str(part) for part in err["loc"])
        raise ConfigError(err["msg"], key_path) from None


def load_run_config(path: Optional[PathLike] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Resolve a run config: model defaults, then the YAML file at ``path``, then each
    ``section.key=value`` override in order.

    Raises:
        MissingFileError: when ``path`` does not exist
        ConfigError: on unknown keys or invalid values, naming the dotted key path
    """
    data = read_config_file(path) if path is not None else {}
    for assignment in overrides:
        apply_override(data, assignment)
    return validate_run_config(data)


def write_resolved_config(config: RunConfig, path: PathLike) -> Path:
    """Snapshot of every resolved value; loading it back reproduces ``config``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(config.model_dump(mode="json"), f, sort_keys=True)
    return path
