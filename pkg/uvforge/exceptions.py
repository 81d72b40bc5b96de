from pathlib import Path
from typing import Any, Optional, Sequence, Union


class UvforgeError(Exception):
    code = 1
    kind = "error"

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message

    def details(self) -> dict[str, Any]:
        """Structured attributes reported alongside the message."""
        return {}

    def __str__(self) -> str:
        return self.message


class ShapeError(UvforgeError):
    kind = "shape"

    def __init__(self, message: str, shapes: Sequence[tuple[int, ...]]) -> None:
        shape_text = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{message}: {shape_text}")
        self.shapes = [tuple(s) for s in shapes]

    def details(self) -> dict[str, Any]:
        return {"shapes": [list(s) for s in self.shapes]}


class NonFiniteError(UvforgeError):
    kind = "non_finite"

    def __init__(self, message: str, op: str, step: Optional[int] = None) -> None:
        super().__init__(message)
        self.op = op
        self.step = step

    def details(self) -> dict[str, Any]:
        return {"op": self.op, "step": self.step}


class TapeError(UvforgeError):
    kind = "tape"


class ConfigError(UvforgeError):
    code = 2
    kind = "config"

    def __init__(self, message: str, key_path: str) -> None:
        super().__init__(f"{key_path}: {message}" if key_path else message)
        self.key_path = key_path

    def details(self) -> dict[str, Any]:
        return {"key": self.key_path}


class MissingFileError(UvforgeError):
    code = 3
    kind = "missing_file"

    def __init__(self, message: str, path: Union[str, Path]) -> None:
        super().__init__(message)
        self.path = str(path)

    def details(self) -> dict[str, Any]:
        return {"path": self.path}


class RunLockedError(UvforgeError):
    code = 4
    kind = "locked"

    def __init__(self, message: str, path: Union[str, Path]) -> None:
        super().__init__(message)
        self.path = str(path)

    def details(self) -> dict[str, Any]:
        return {"path": self.path}


class SampleRejectedError(UvforgeError):
    kind = "sample_rejected"

    def __init__(self, message: str, sample_id: str, reason: str) -> None:
        super().__init__(message)
        self.sample_id = sample_id
        self.reason = reason

    def details(self) -> dict[str, Any]:
        return {"sample_id": self.sample_id, "reason": self.reason}


class CheckpointError(UvforgeError):
    kind = "checkpoint"

    def __init__(self, message: str, offending: Optional[Sequence[str]] = None) -> None:
        offending = list(offending or [])
        if offending:
            message = f"{message}: {', '.join(offending)}"
        super().__init__(message)
        self.offending = offending

    def details(self) -> dict[str, Any]:
        return {"offending": self.offending}


class TrainingHaltedError(UvforgeError):
    kind = "training_halted"

    def __init__(self, message: str, step: int, checkpoint: Optional[Union[str, Path]]) -> None:
        super().__init__(message)
        self.step = step
        self.checkpoint = str(checkpoint) if checkpoint is not None else None

    def details(self) -> dict[str, Any]:
        return {"step": self.step, "checkpoint": self.checkpoint}


class SamplerAbortedError(UvforgeError):
    kind = "sampler_aborted"

    def __init__(self, message: str, step: int, t: int) -> None:
        super().__init__(message)
        self.step = step
        self.t = t

    def details(self) -> dict[str, Any]:
        return {"step": self.step, "t": self.t}


class CorpusError(UvforgeError):
    kind = "corpus"

    def __init__(self, message: str, sample_id: Optional[str] = None) -> None:
        super().__init__(message)
        self.sample_id = sample_id

    def details(self) -> dict[str, Any]:
        return {"sample_id": self.sample_id}
