import numpy as np

from ..autodiff.rng import Rng
from ..types.face import EXPRESSION_COUNT, SHAPE_COUNT, FaceParams, Occluder, OccluderKind, Scene

# fraction of the image side covered by one object unit
SCALE_FRACTION = 0.42


def sample_face(rng: Rng) -> FaceParams:
    """Blendshape coefficients drawn i.i.d. uniform in [-1, 1]."""
    shape = rng.uniform(-1.0, 1.0, size=SHAPE_COUNT)
    expression = rng.uniform(-1.0, 1.0, size=EXPRESSION_COUNT)
    return FaceParams(shape_weights=shape.tolist(), expression_weights=expression.tolist())


def _rect(cx: float, cy: float, w: float, h: float, angle: float) -> list[tuple[float, float]]:
    c, s = np.cos(angle), np.sin(angle)
    corners = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
    return [(float(cx + x * c - y * s), float(cy + x * s + y * c)) for x, y in corners]


def _occluder(kind: OccluderKind, rng: Rng, cx: float, cy: float, s: float) -> Occluder:
    tilt = rng.uniform(-0.25, 0.25)
    if kind is OccluderKind.hair:
        side = 1.0 if rng.bernoulli(0.5) else -1.0
        poly = _rect(cx + side * 0.45 * s, cy - 0.55 * s, 0.5 * s, 1.1 * s, tilt + side * 0.3)
    elif kind is OccluderKind.glasses:
        poly = _rect(cx, cy - 0.2 * s + rng.uniform(-0.05, 0.05) * s, 1.5 * s, 0.18 * s, tilt * 0.3)
    else:
        poly = _rect(cx, cy - (0.95 - rng.uniform(0.0, 0.15)) * s, 1.8 * s, 0.55 * s, tilt * 0.5)
    return Occluder(kind=kind, polygon=poly)


def sample_scene(
    rng: Rng,
    pose_range: float = 45.0,
    *,
    occluder_prob: float = 0.3,
    image_size: int = 64,
    scale_jitter: float = 0.05,
    translation_jitter: float = 2.0,
    gain_range: tuple[float, float] = (0.8, 1.2),
) -> Scene:
    """
    Draw a camera, light gain and occluders.

    Yaw is uniform in ``[-pose_range, pose_range]`` and pitch uniform in a quarter of that
    range; roll stays 0. With probability ``occluder_prob`` one or two occluder polygons are
    added.

    Args:
        rng: stream this scene is drawn from
        pose_range: yaw half-range in degrees, within [0, 90]

    Returns:
        the Scene

    Example:
         .. code-block:: python

            from uvforge.autodiff import Rng
            from uvforge.world import sample_scene

            scene = sample_scene(Rng(7, "scene"), pose_range=60.0, occluder_prob=0.0)
    """
    if not 0.0 <= pose_range <= 90.0:
        raise ValueError(f"pose_range must be within [0, 90] degrees, got {pose_range}")
    yaw = float(rng.uniform(-pose_range, pose_range))
    pitch = float(rng.uniform(-pose_range / 4.0, pose_range / 4.0))
    scale = SCALE_FRACTION * image_size * float(rng.uniform(1.0 - scale_jitter, 1.0 + scale_jitter))
    tx, ty = (float(t) for t in rng.uniform(-translation_jitter, translation_jitter, size=2))
    gain = tuple(float(g) for g in rng.uniform(gain_range[0], gain_range[1], size=3))

    occluders: list[Occluder] = []
    if rng.bernoulli(occluder_prob):
        count = int(rng.integers(1, 3))
        kinds = list(OccluderKind)
        cx, cy = image_size / 2.0 + tx, image_size / 2.0 + ty
        for _ in range(count):
            kind = kinds[int(rng.integers(0, len(kinds)))]
            occluders.append(_occluder(kind, rng, cx, cy, scale))

    return Scene(
        yaw=yaw,
        pitch=pitch,
        scale=scale,
        translation=(tx, ty),
        light_gain=gain,
        occluders=occluders,
        image_size=image_size,
        seed=rng.seed,
    )
