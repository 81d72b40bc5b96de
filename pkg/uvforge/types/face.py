from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SHAPE_COUNT = 8
EXPRESSION_COUNT = 4


def _clamp(values: list[float]) -> list[float]:
    return [float(min(1.0, max(-1.0, v))) for v in values]


class FaceParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape_weights: list[float] = Field(
        default_factory=lambda: [0.0] * SHAPE_COUNT, description="Identity blendshape weights, clamped to [-1, 1]."
    )
    expression_weights: list[float] = Field(
        default_factory=lambda: [0.0] * EXPRESSION_COUNT,
        description="Expression blendshape weights, clamped to [-1, 1].",
    )

    @field_validator("shape_weights", "expression_weights")
    @classmethod
    def _clamp_weights(cls, v: list[float]) -> list[float]:
        return _clamp(v)

    @model_validator(mode="after")
    def _check_counts(self) -> "FaceParams":
        if len(self.shape_weights) != SHAPE_COUNT:
            raise ValueError(f"expected {SHAPE_COUNT} shape weights, got {len(self.shape_weights)}")
        if len(self.expression_weights) != EXPRESSION_COUNT:
            raise ValueError(f"expected {EXPRESSION_COUNT} expression weights, got {len(self.expression_weights)}")
        return self


class OccluderKind(str, Enum):
    hair = "hair"
    glasses = "glasses"
    hat = "hat"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value == value.lower():
                    return member
        return None

    @property
    def color(self) -> tuple[float, float, float]:
        return _OCCLUDER_COLORS[self]


_OCCLUDER_COLORS = {
    OccluderKind.hair: (0.15, 0.10, 0.07),
    OccluderKind.glasses: (0.05, 0.05, 0.06),
    OccluderKind.hat: (0.20, 0.25, 0.50),
}


class Occluder(BaseModel):
    kind: OccluderKind = Field(description="What the polygon stands for; decides its paint color.")
    polygon: list[tuple[float, float]] = Field(description="Convex polygon vertices in pixel coordinates (x, y).")

    @field_validator("polygon")
    @classmethod
    def _at_least_triangle(cls, v: list[tuple[float, float]]) -> list[tuple[float, float]]:
        if len(v) < 3:
            raise ValueError("an occluder polygon needs at least three vertices")
        return v


class Scene(BaseModel):
    """
    Weak-perspective camera, per-channel light gain and painted occluders.

    Pixel coordinates of an object point X are::

        x = size/2 + scale·(R X)_x + tx
        y = size/2 - scale·(R X)_y + ty

    with R = Rz(roll)·Rx(pitch)·Ry(yaw). Depth is -scale·(R X)_z, so smaller is nearer.
    """

    model_config = ConfigDict(extra="forbid")

    yaw: float = Field(default=0.0, description="Rotation about the vertical axis, degrees.")
    pitch: float = Field(default=0.0, description="Rotation about the horizontal axis, degrees.")
    roll: float = Field(default=0.0, description="In-plane rotation, degrees.")
    scale: float = Field(default=26.88, gt=0, description="Pixels per object unit.")
    translation: tuple[float, float] = Field(default=(0.0, 0.0), description="Pixel offset from the image centre.")
    light_gain: tuple[float, float, float] = Field(default=(1.0, 1.0, 1.0), description="Per-channel gain.")
    occluders: list[Occluder] = Field(default_factory=list, description="Occluders painted over the render.")
    image_size: int = Field(default=64, gt=0, description="Square image side in pixels.")
    seed: Optional[int] = Field(default=None, description="Seed the scene was drawn from, if any.")

    @field_validator("light_gain")
    @classmethod
    def _positive_gain(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(g <= 0 for g in v):
            raise ValueError(f"light gain must be positive, got {v}")
        return v

    def rotation(self) -> np.ndarray:
        y, p, r = np.radians([self.yaw, self.pitch, self.roll])
        ry = np.array([[np.cos(y), 0.0, np.sin(y)], [0.0, 1.0, 0.0], [-np.sin(y), 0.0, np.cos(y)]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, np.cos(p), -np.sin(p)], [0.0, np.sin(p), np.cos(p)]])
        rz = np.array([[np.cos(r), -np.sin(r), 0.0], [np.sin(r), np.cos(r), 0.0], [0.0, 0.0, 1.0]])
        return rz @ rx @ ry

    def project(self, points: np.ndarray, size: Optional[int] = None) -> np.ndarray:
        """
        N×3 object points to N×3 (x_px, y_px, depth_px), float64.

        ``size`` renders the same framing at another resolution: scale and translation
        follow the image side.
        """
        rotated = np.asarray(points, dtype=np.float64) @ self.rotation().T
        size = size or self.image_size
        zoom = size / self.image_size
        half = size / 2.0
        scale = self.scale * zoom
        tx, ty = self.translation[0] * zoom, self.translation[1] * zoom
        return np.stack(
            [
                half + scale * rotated[:, 0] + tx,
                half - scale * rotated[:, 1] + ty,
                -scale * rotated[:, 2],
            ],
            axis=1,
        )


class FitPerturbation(BaseModel):
    """Gaussian jitter standing in for 3DMM fitting error."""

    model_config = ConfigDict(extra="forbid")

    sigma_shape: float = Field(default=0.05, ge=0, description="Std of each identity coefficient offset.")
    sigma_expression: float = Field(default=0.05, ge=0, description="Std of each expression coefficient offset.")
    sigma_rot: float = Field(default=3.0, ge=0, description="Std of yaw, pitch and roll offsets, degrees.")
    sigma_trans: float = Field(default=1.0, ge=0, description="Std of the translation offset, pixels.")

    @classmethod
    def zero(cls) -> "FitPerturbation":
        return cls(sigma_shape=0.0, sigma_expression=0.0, sigma_rot=0.0, sigma_trans=0.0)
