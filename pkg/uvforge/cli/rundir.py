"""
Run directories.

Every invocation writes into exactly one directory, holding ``run.lock`` for as long as it
runs. A second invocation targeting the same directory fails with RunLockedError instead
of interleaving outputs.
"""

import logging
import os
from contextlib import contextmanager
from datetime import datetime, timezone
from os import PathLike
from pathlib import Path
from typing import Iterator, Optional

from ..config import UvforgeSettings, config_fingerprint, write_resolved_config
from ..exceptions import RunLockedError
from ..runlog import EventLog
from ..types.config import RunConfig

_logger = logging.getLogger(__name__)

LOCK_NAME = "run.lock"
RESOLVED_CONFIG_NAME = "config.resolved.yaml"
EVENTS_NAME = "events.jsonl"


def default_run_dir(config: RunConfig, settings: Optional[UvforgeSettings] = None) -> Path:
    """``<runs root>/<UTC timestamp>-<config fingerprint>``."""
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return (settings or UvforgeSettings()).runs_root() / f"{stamp}-{config_fingerprint(config)}"


class RunDir:
    def __init__(self, path: Path, config: RunConfig) -> None:
        self.path = path
        self.config = config
        self.log = EventLog(path / EVENTS_NAME)

    def __truediv__(self, name: str) -> Path:
        return self.path / name


@contextmanager
def open_run_dir(path: PathLike, config: RunConfig, command: str) -> Iterator[RunDir]:
    """
    Lock ``path``, snapshot the resolved config into it and yield the run.

    Raises:
        RunLockedError: when another invocation holds the directory
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lock = path / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RunLockedError(f"run directory {path} is locked by another invocation", lock) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        write_resolved_config(config, path / RESOLVED_CONFIG_NAME)
        run = RunDir(path, config)
        run.log.emit("run_start", command=command, fingerprint=config_fingerprint(config))
        _logger.info(f"Running {command} in {path}")
        yield run
        run.log.emit("run_done", command=command)
    finally:
        lock.unlink(missing_ok=True)
