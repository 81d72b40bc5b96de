"""
Line-delimited JSON event log kept next to every run's outputs.

Events are appended one per line so a crashed run still leaves a readable log:

    {"event": "train_step", "step": 10, "loss": 0.41, "lr": 3e-05, "wallclock": 1.92}
"""

import json
import logging
import threading
import time
from os import PathLike
from pathlib import Path
from typing import Any, Optional

import numpy as np

_logger = logging.getLogger(__name__)


class EventLog:
    def __init__(self, path: Optional[PathLike] = None) -> None:
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._start = time.monotonic()
        self.events: list[dict[str, Any]] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def emit(self, event: str, **fields: Any) -> dict[str, Any]:
        record = {"event": event, **fields, "wallclock": round(time.monotonic() - self._start, 4)}
        with self._lock:
            self.events.append(record)
            if self.path is not None:
                with open(self.path, "a") as f:
                    f.write(json.dumps(record, default=_jsonable) + "\n")
        return record

    def warn(self, event: str, message: str, **fields: Any) -> None:
        _logger.warning(message)
        self.emit(event, message=message, **fields)

    def of(self, event: str) -> list[dict[str, Any]]:
        return [e for e in self.events if e["event"] == event]


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


